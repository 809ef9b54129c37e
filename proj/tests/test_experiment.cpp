#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "rfcl/experiment.hpp"
#include "rfcl/inspect.hpp"
#include "rfcl/synthetic.hpp"
#include "rfcl/visualize.hpp"

using namespace rfcl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("rfcl_exp_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Synthetic train/test files shared by the end-to-end tests.
struct SmallData {
    std::string train, test;
    SmallData() {
        const fs::path dir = scratch("data");
        train = (dir / "train.bin").string();
        test = (dir / "test.bin").string();
        save_canonical(make_synthetic({.count = 240, .seed = 1}), train);
        save_canonical(make_synthetic({.count = 80, .seed = 2}, Split::test), test);
    }
};

const SmallData& small_data() {
    static const SmallData d;
    return d;
}

ExperimentConfig small_config() {
    ExperimentConfig c = desk_preset();
    c.dataset = "synthetic";
    c.train_paths = {small_data().train};
    c.test_paths = {small_data().test};
    c.train_count = 240;
    c.test_count = 80;
    c.l1_patches = 3000;
    c.l2_patches_per_group = 600;
    c.l2_source_images = 60;
    c.similarity_samples = 60;
    c.kmeans_max_iters = 15;
    c.train.max_epochs = 4;
    return c;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream is(path);
    std::vector<std::string> out;
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

std::size_t count_fields(const std::string& line) {
    std::size_t n = 1;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') quoted = !quoted;
        n += !quoted && ch == ',';
    }
    return n;
}

}  // namespace

TEST(Config, TextSettingsAndComments) {
    ExperimentConfig c = desk_preset();
    apply_config_text(c, "# comment\nstrategy = learned\nfanin=4  # trailing\ntrain_path=a.bin, b.bin\n"
                         "learning_rate=0.05\nl2_whiten_patches=true\nhidden_units=64\nsweep_seeds=4,5\n");
    EXPECT_EQ(c.strategy, Strategy::learned);
    EXPECT_EQ(c.resolved_fanin(), 4u);
    EXPECT_EQ(c.train_paths, (std::vector<std::string>{"a.bin", "b.bin"}));
    EXPECT_EQ(c.train.learning_rate, 0.05);
    EXPECT_TRUE(c.l2_whiten_patches);
    EXPECT_EQ(c.train.hidden, 64u);
    EXPECT_EQ(c.sweep_seeds, (std::vector<std::uint64_t>{4, 5}));
}

TEST(Config, UnknownKeysAndBadValuesAreErrors) {
    ExperimentConfig c;
    EXPECT_THROW(apply_config_text(c, "colour=red\n"), ConfigError);
    EXPECT_THROW(apply_config_text(c, "fanin=two\n"), ConfigError);
    EXPECT_THROW(apply_config_text(c, "strategy=greedy\n"), ConfigError);
    EXPECT_THROW(apply_config_text(c, "no equals sign\n"), ConfigError);
    EXPECT_THROW(apply_config_file(c, "/nonexistent/rfcl.cfg"), ConfigError);
}

TEST(Config, Presets) {
    EXPECT_EQ(preset_by_name("desk")->train_count, 5000u);
    EXPECT_EQ(preset_by_name("paper")->train_count, 20000u);
    EXPECT_FALSE(preset_by_name("huge"));
    const ExperimentConfig d = desk_preset();
    EXPECT_EQ(d.n1, 32u);
    EXPECT_EQ(d.total_l2_filters, 512u);
    EXPECT_EQ(d.filters_per_group(), 16u);
}

TEST(Config, ValidationRules) {
    ExperimentConfig c = small_config();
    EXPECT_NO_THROW(c.validate());
    auto bad = [&](auto mutate) {
        ExperimentConfig x = small_config();
        mutate(x);
        EXPECT_THROW(x.validate(), ConfigError);
    };
    bad([](ExperimentConfig& x) { x.train_paths.clear(); });
    bad([](ExperimentConfig& x) { x.fanin = 33; });
    bad([](ExperimentConfig& x) { x.strategy = Strategy::single; x.fanin = 2; });
    bad([](ExperimentConfig& x) { x.strategy = Strategy::full; x.fanin = 4; });
    bad([](ExperimentConfig& x) { x.total_l2_filters = 500; });
    bad([](ExperimentConfig& x) { x.rf_grouping = "greedy"; });
    bad([](ExperimentConfig& x) { x.layers = 3; });
    ExperimentConfig full = small_config();
    full.strategy = Strategy::full;
    EXPECT_EQ(full.resolved_fanin(), 32u);
    EXPECT_EQ(full.filters_per_group(), 512u);
    EXPECT_NO_THROW(full.validate());
}

TEST(Csv, ColumnsAndErrorRows) {
    EXPECT_EQ(count_fields(kResultsHeader), 12u);
    RunResult r;
    r.config = small_config();
    r.test_accuracy = 0.5;
    r.l2_maps = 512;
    EXPECT_EQ(count_fields(csv_row(r)), 12u);
    EXPECT_EQ(csv_row(r).substr(0, 28), "synthetic,random,2,32,512,1,");
    const std::string err = csv_error_row(r.config, "stage 'load' failed: x, y");
    EXPECT_EQ(count_fields(err), 12u);
    EXPECT_NE(err.find("\"stage 'load' failed: x, y\""), std::string::npos);
    ExperimentConfig one = small_config();
    one.layers = 1;
    EXPECT_EQ(csv_strategy(one), "layer1");
    const fs::path dir = scratch("csv");
    append_csv((dir / "r.csv").string(), csv_row(r));
    append_csv((dir / "r.csv").string(), err);
    const auto lines = read_lines((dir / "r.csv").string());
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0], kResultsHeader);
}

TEST(Median, OddAndEven) {
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0}), 2.5);
    EXPECT_THROW(median({}), ArgumentError);
}

TEST(Pgm, TileGeometryAndScaling) {
    FilterBank fb;
    fb.fanin = 1;
    fb.size = 5;
    for (int k = 0; k < 16; ++k) {
        std::vector<double> w(25);
        for (int i = 0; i < 25; ++i) w[static_cast<std::size_t>(i)] = k == 3 ? 0.7 : i - 12.0 * k;
        fb.filters.push_back({Kernel(1, 5, w), {0}});
    }
    const fs::path dir = scratch("pgm");
    save_filter_bank(fb, (dir / "f.fb").string());
    const GrayImage img = export_filters((dir / "f.fb").string(), (dir / "f.pgm").string());
    EXPECT_EQ(img.width, 23u);
    EXPECT_EQ(img.height, 23u);
    const GrayImage back = read_pgm((dir / "f.pgm").string());
    EXPECT_EQ(back.pixels, img.pixels);
    EXPECT_EQ(img.at(0, 0), 0);      // minimum of the first cell
    EXPECT_EQ(img.at(4, 4), 255);    // maximum of the first cell
    EXPECT_EQ(img.at(0, 5), 0);      // separator column
    EXPECT_EQ(img.at(2, 18 + 2), 128);  // constant cell (kernel 3) is mid-gray
}

TEST(Inspect, RecognisesArtifactsAndRejectsJunk) {
    const fs::path dir = scratch("inspect");
    save_mlp(init_mlp(5, 3, 2, 1), (dir / "m.mlp").string());
    EXPECT_EQ(inspect_artifact((dir / "m.mlp").string()), "mlp: input=5 hidden=3 classes=2");
    save_connection_table(build_full_rf(4), (dir / "t.txt").string());
    EXPECT_EQ(inspect_artifact((dir / "t.txt").string()), "connection table: strategy=full n1=4 groups=1 fanin=4");
    EXPECT_NE(inspect_artifact(small_data().test).find("canonical dataset: records=80"), std::string::npos);
    std::ofstream((dir / "junk").string()) << "hello";
    EXPECT_THROW(inspect_artifact((dir / "junk").string()), FormatError);
    EXPECT_THROW(inspect_artifact((dir / "missing").string()), FormatError);
}

TEST(Experiment, RandomTwoLayerRunWritesArtifacts) {
    const fs::path out = scratch("run");
    const RunResult r = run_experiment(small_config(), {.out_dir = out.string()});
    EXPECT_EQ(r.feature_length, 12992u);
    EXPECT_EQ(r.l2_maps, 512u);
    EXPECT_GE(r.test_accuracy, 0.0);
    EXPECT_LE(r.test_accuracy, 1.0);
    EXPECT_GE(r.epochs_run, 1u);
    const fs::path dir = out / "random_k2_s1";
    for (const char* f : {"l1_filters.fb", "l2_filters.fb", "table.txt", "model.mlp", "train_log.csv"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    const FilterBank l2 = load_filter_bank((dir / "l2_filters.fb").string());
    EXPECT_EQ(l2.count(), 512u);
    EXPECT_EQ(l2.fanin, 2u);
    const ConnectionTable t = load_connection_table((dir / "table.txt").string());
    for (std::size_t f = 0; f < 512; ++f) EXPECT_EQ(l2.filters[f].channels, t.groups[f / 16]);
    EXPECT_EQ(load_mlp((dir / "model.mlp").string()).input_dim(), 12992u);
    EXPECT_EQ(load_filter_bank((dir / "l1_filters.fb").string()).count(), 32u);
}

TEST(Experiment, DeterministicForSeed) {
    const ExperimentConfig c = small_config();
    const RunResult a = run_experiment(c), b = run_experiment(c);
    EXPECT_EQ(a.test_accuracy, b.test_accuracy);
    EXPECT_EQ(a.train_accuracy, b.train_accuracy);
    EXPECT_EQ(a.epochs_run, b.epochs_run);
}

TEST(Experiment, FullConnectivityAndLayerOne) {
    ExperimentConfig full = small_config();
    full.strategy = Strategy::full;
    const RunResult r = run_experiment(full);
    EXPECT_EQ(r.l2_maps, 512u);
    EXPECT_EQ(r.feature_length, 12992u);
    ExperimentConfig one = small_config();
    one.layers = 1;
    const RunResult s = run_experiment(one);
    EXPECT_EQ(s.feature_length, 6464u);
    EXPECT_EQ(s.l2_maps, 0u);
}

TEST(Experiment, FailureRemovesRunDirectoryAndNamesStage) {
    const fs::path out = scratch("fail");
    ExperimentConfig c = small_config();
    c.train_count = 10'000;  // more records than the file holds
    try {
        (void)run_experiment(c, {.out_dir = out.string()});
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "load");
    }
    EXPECT_FALSE(fs::exists(out / run_label(c)));
}

TEST(Sweep, OneRowPerRunAndErrorsRecorded) {
    const fs::path out = scratch("sweep");
    ExperimentConfig c = small_config();
    c.layers = 1;  // sweep_config forces two layers
    const std::string csv = (out / "results.csv").string();
    const auto entries = run_sweep(c, {1, 4}, {7}, csv);
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_TRUE(entries[0].result);
    EXPECT_EQ(entries[0].config.strategy, Strategy::single);
    EXPECT_EQ(entries[1].config.strategy, Strategy::random);
    const auto lines = read_lines(csv);
    ASSERT_EQ(lines.size(), 3u);
    for (const auto& l : lines) EXPECT_EQ(count_fields(l), 12u);
    EXPECT_EQ(lines[1].substr(0, 26), "synthetic,single,1,32,512,");
    const auto summary = summarize_sweep(entries);
    ASSERT_EQ(summary.size(), 2u);
    EXPECT_EQ(summary[1].fanin, 4u);

    ExperimentConfig broken = small_config();
    broken.test_paths = {(out / "missing.bin").string()};
    const auto failed = run_sweep(broken, {2}, {1, 2}, (out / "failed.csv").string());
    ASSERT_EQ(failed.size(), 2u);
    EXPECT_FALSE(failed[0].result);
    EXPECT_FALSE(failed[1].result);
    EXPECT_EQ(read_lines((out / "failed.csv").string()).size(), 3u);
    EXPECT_TRUE(std::isnan(summarize_sweep(failed)[0].median_test_accuracy));
}

TEST(Sweep, EmptyListsAreRejected) {
    EXPECT_THROW(run_sweep(small_config(), {}, {1}, ""), ArgumentError);
    EXPECT_THROW(run_sweep(small_config(), {2}, {}, ""), ArgumentError);
    EXPECT_THROW(run_sweep(small_config(), {64}, {1}, ""), ArgumentError);
}
