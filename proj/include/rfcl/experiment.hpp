#pragma once

// End-to-end experiment driver: preprocessing, clustering learning of both
// layers, connection tables, feature extraction, classifier training, and
// the results CSV.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rfcl/clustering.hpp"
#include "rfcl/config.hpp"
#include "rfcl/data.hpp"
#include "rfcl/mlp.hpp"
#include "rfcl/network.hpp"
#include "rfcl/random.hpp"
#include "rfcl/receptive_fields.hpp"

namespace rfcl {

/// A failure inside one pipeline stage.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& cause)
        : std::runtime_error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}
    [[nodiscard]] const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct RunResult {
    ExperimentConfig config;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::size_t epochs_run = 0;
    StopReason stop = StopReason::max_epochs;
    std::size_t feature_length = 0;
    std::size_t l2_maps = 0;
    std::vector<std::pair<std::string, double>> stage_seconds;
    std::map<std::string, std::string> artifacts;

    [[nodiscard]] double seconds(const std::string& stage) const {
        double s = 0.0;
        for (const auto& [name, t] : stage_seconds)
            if (name == stage) s += t;
        return s;
    }
};

struct RunOptions {
    std::string out_dir;           // empty: no artifacts written
    std::ostream* log = nullptr;   // progress messages
};

// ---------------------------------------------------------------------------
// Building blocks

inline FilterBank learn_layer1(const std::vector<Tensor3>& images, const ExperimentConfig& c) {
    const std::vector<std::size_t> rgb{0, 1, 2};
    const std::uint64_t s = c.master_seed;
    PatchSet ps = extract_patches(images, rgb, c.filter_size, c.l1_patches, derive_seed(s, "l1-patches"));
    ps = normalize_patches(std::move(ps), c.patch_epsilon);
    const Centroids cent = kmeans(ps, c.n1, c.kmeans_max_iters, c.kmeans_tol, derive_seed(s, "l1-kmeans"));
    FilterBank fb;
    fb.fanin = rgb.size();
    fb.size = c.filter_size;
    for (auto& k : centroids_to_filterbank(cent, fb.fanin, fb.size, derive_seed(s, "l1-fill")))
        fb.filters.push_back({std::move(k), rgb});
    return fb;
}

inline ConnectionTable build_table(const std::vector<Tensor3>& l1_outputs, const ExperimentConfig& c) {
    switch (c.strategy) {
        case Strategy::single: return build_single_rf(c.n1);
        case Strategy::full: return build_full_rf(c.n1);
        case Strategy::random: return build_random_rf(c.n1, c.resolved_fanin(), derive_seed(c.master_seed, "rf-random"));
        case Strategy::learned:
            return build_learned_rf(similarity_matrix(l1_outputs, c.similarity_samples), c.resolved_fanin());
    }
    throw ArgumentError("build_table: unknown strategy");
}

/// Per group: patches from the group's channels only, clustered into
/// filters_per_group kernels that read exactly those channels.
inline FilterBank learn_layer2(const std::vector<Tensor3>& l1_outputs, const ConnectionTable& table,
                               const ExperimentConfig& c) {
    FilterBank fb;
    fb.fanin = table.fanin();
    fb.size = c.filter_size;
    const std::size_t per_group = c.total_l2_filters / table.group_count();
    for (std::size_t g = 0; g < table.group_count(); ++g) {
        const auto& grp = table.groups[g];
        const std::string tag = "-g" + std::to_string(g);
        PatchSet ps = extract_patches(l1_outputs, grp, c.filter_size, c.l2_patches_per_group,
                                      derive_seed(c.master_seed, "l2-patches" + tag));
        ps = normalize_patches(std::move(ps), c.patch_epsilon);
        std::optional<WhiteningTransform> zca;
        if (c.l2_whiten_patches) {
            zca = fit_whitening(ps.patches, c.whitening_epsilon);
            ps.patches = apply_whitening(*zca, ps.patches);
        }
        Centroids cent = kmeans(ps, per_group, c.kmeans_max_iters, c.kmeans_tol,
                                derive_seed(c.master_seed, "l2-kmeans" + tag));
        // Responses in whitened-patch space equal responses of P*c on raw
        // patches up to a constant offset; there are no biases, so the offset
        // is dropped.
        if (zca) cent.vectors = cent.vectors * zca->projection;
        for (auto& k : centroids_to_filterbank(cent, fb.fanin, fb.size, derive_seed(c.master_seed, "l2-fill" + tag)))
            fb.filters.push_back({std::move(k), grp});
    }
    return fb;
}

inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    k = std::min(k, n);
    Rng rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    return idx;
}

inline std::string run_label(const ExperimentConfig& c) {
    std::ostringstream os;
    if (c.layers == 1)
        os << "layer1";
    else
        os << to_string(c.strategy) << "_k" << c.resolved_fanin();
    os << "_s" << c.master_seed;
    return os.str();
}

// ---------------------------------------------------------------------------
// run_experiment

/// load -> standardize -> whiten -> layer-1 CL -> connection table ->
/// layer-2 CL per group -> features (+ bypass) -> MLP -> evaluate.
/// Every random choice derives from master_seed and a stage label.
inline RunResult run_experiment(const ExperimentConfig& config, const RunOptions& opt = {}) {
    config.validate();
    RunResult res;
    res.config = config;
    auto say = [&](const std::string& m) {
        if (opt.log) *opt.log << "[" << run_label(config) << "] " << m << std::endl;
    };

    namespace fs = std::filesystem;
    fs::path run_dir;
    if (!opt.out_dir.empty()) {
        run_dir = fs::path(opt.out_dir) / run_label(config);
        fs::create_directories(run_dir);
    }

    std::string stage;
    auto clock = std::chrono::steady_clock::now();
    auto begin = [&](const std::string& name) {
        stage = name;
        clock = std::chrono::steady_clock::now();
        say(name);
    };
    auto end = [&] {
        res.stage_seconds.emplace_back(
            stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - clock).count());
    };

    try {
        begin("load");
        Dataset train_raw = load_canonical(config.train_paths, config.train_count, Split::train, config.dataset);
        Dataset test_raw = load_canonical(config.test_paths, config.test_count, Split::test, config.dataset);
        end();

        NetworkSpec net;
        net.bypass_window = config.bypass_window;
        net.bypass_stride = config.bypass_stride;

        begin("standardize");
        Standardized st = standardize(train_raw);
        Dataset test_std = standardize_with(test_raw, st.mean, st.stddev);
        train_raw = Dataset{};
        test_raw = Dataset{};
        const RowMatrix train_bypass = bypass_matrix(st.data, net);
        const RowMatrix test_bypass = bypass_matrix(test_std, net);
        end();

        begin("whiten");
        const WhiteningTransform zca = fit_whitening(st.data, config.whitening_epsilon);
        const Dataset train_w = apply_whitening(zca, st.data);
        const Dataset test_w = apply_whitening(zca, test_std);
        st.data = Dataset{};
        test_std = Dataset{};
        end();

        begin("layer1");
        std::vector<Tensor3> train_images;
        train_images.reserve(train_w.size());
        for (const auto& li : train_w.images) train_images.push_back(li.image);
        net.layer1.bank = learn_layer1(train_images, config);
        net.layer1.pool_window = config.pool_window;
        net.layer1.pool_stride = config.pool_stride;
        net.layer1.theta = config.theta;
        train_images = {};
        end();

        if (config.layers == 2) {
            begin("connections");
            std::vector<Tensor3> l1_out;
            for (std::size_t i : sample_indices(train_w.size(), config.l2_source_images,
                                                derive_seed(config.master_seed, "l2-source")))
                l1_out.push_back(forward_layer(train_w.images[i].image, net.layer1));
            net.table = build_table(l1_out, config);
            end();

            begin("layer2");
            LayerSpec l2;
            l2.bank = learn_layer2(l1_out, net.table, config);
            l2.pool_window = config.pool_window;
            l2.pool_stride = config.pool_stride;
            l2.theta = config.theta;
            net.layer2 = std::move(l2);
            end();
        }
        net.validate();

        begin("features");
        const FeatureMatrix ftrain = extract_dataset(train_w, train_bypass, net);
        const FeatureMatrix ftest = extract_dataset(test_w, test_bypass, net);
        res.feature_length = ftrain.cols();
        res.l2_maps = net.layer2 ? net.layer2->bank.count() : 0;
        end();

        begin("train");
        TrainConfig tc = config.train;
        tc.rng_seed = derive_seed(config.master_seed, "mlp");
        tc.classes = kNumClasses;
        const TrainResult tr = train(ftrain.features, ftrain.labels, tc);
        end();

        begin("evaluate");
        res.train_accuracy = evaluate(tr.model, ftrain.features, ftrain.labels);
        res.test_accuracy = evaluate(tr.model, ftest.features, ftest.labels);
        res.epochs_run = tr.log.epochs.size();
        res.stop = tr.log.stop;
        end();

        if (!run_dir.empty()) {
            begin("artifacts");
            auto put = [&](const std::string& key, const std::string& file) {
                res.artifacts[key] = (run_dir / file).string();
                return res.artifacts[key];
            };
            save_filter_bank(net.layer1.bank, put("l1_filters", "l1_filters.fb"));
            if (net.layer2) {
                save_filter_bank(net.layer2->bank, put("l2_filters", "l2_filters.fb"));
                save_connection_table(net.table, put("table", "table.txt"));
            }
            save_mlp(tr.model, put("model", "model.mlp"));
            if (config.save_features) {
                save_features(ftrain, put("train_features", "train_features.ft"));
                save_features(ftest, put("test_features", "test_features.ft"));
            }
            std::ofstream log(put("train_log", "train_log.csv"));
            log << "epoch,loss,train_acc\n";
            for (const auto& e : tr.log.epochs)
                log << e.epoch << "," << std::setprecision(17) << e.loss << "," << e.train_accuracy << "\n";
            log << "# initial_acc=" << tr.log.initial_accuracy << " stop=" << to_string(tr.log.stop) << "\n";
            end();
        }
        say("test_acc=" + std::to_string(res.test_accuracy) + " train_acc=" + std::to_string(res.train_accuracy));
    } catch (const std::exception& e) {
        if (!run_dir.empty()) {
            std::error_code ec;
            fs::remove_all(run_dir, ec);
        }
        throw StageError(stage, e.what());
    }
    return res;
}

// ---------------------------------------------------------------------------
// CSV

inline const char* kResultsHeader =
    "dataset,strategy,fanin,n1,l2_filters,seed,train_acc,test_acc,epochs,secs_features,secs_train,error";

inline std::string csv_escape(std::string s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch == '\n' ? ' ' : ch;
    }
    return out + "\"";
}

inline std::string csv_strategy(const ExperimentConfig& c) {
    return c.layers == 1 ? "layer1" : to_string(c.strategy);
}

/// Feature-stage seconds cover everything before classifier training.
inline std::string csv_row(const RunResult& r) {
    const auto& c = r.config;
    double secs_features = 0.0;
    for (const auto& [name, t] : r.stage_seconds)
        if (name != "train" && name != "evaluate" && name != "artifacts") secs_features += t;
    std::ostringstream os;
    os << c.dataset << "," << csv_strategy(c) << "," << (c.layers == 1 ? 0 : c.resolved_fanin()) << "," << c.n1
       << "," << r.l2_maps << "," << c.master_seed << "," << std::setprecision(6) << std::fixed
       << r.train_accuracy << "," << r.test_accuracy << "," << r.epochs_run << "," << std::setprecision(3)
       << secs_features << "," << r.seconds("train") << ",";
    return os.str();
}

inline std::string csv_error_row(const ExperimentConfig& c, const std::string& error) {
    std::ostringstream os;
    os << c.dataset << "," << csv_strategy(c) << "," << (c.layers == 1 ? 0 : c.resolved_fanin()) << "," << c.n1
       << ",," << c.master_seed << ",,,,,," << csv_escape(error);
    return os.str();
}

inline void append_csv(const std::string& path, const std::string& row) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream os(path, std::ios::app);
    if (!os) throw FormatError("cannot open results CSV " + path);
    if (fresh) os << kResultsHeader << "\n";
    os << row << "\n";
}

// ---------------------------------------------------------------------------
// run_sweep

struct SweepEntry {
    ExperimentConfig config;
    std::optional<RunResult> result;
    std::string error;
};

/// Configuration for one (fanin, seed) cell: random tables, single-map at fanin 1.
inline ExperimentConfig sweep_config(const ExperimentConfig& base, std::size_t fanin, std::uint64_t seed) {
    ExperimentConfig c = base;
    c.layers = 2;
    c.strategy = fanin == 1 ? Strategy::single : Strategy::random;
    c.fanin = fanin;
    c.master_seed = seed;
    return c;
}

/// One run per (fanin, seed); a failing run is recorded and the sweep continues.
inline std::vector<SweepEntry> run_sweep(const ExperimentConfig& base, const std::vector<std::size_t>& fanins,
                                         const std::vector<std::uint64_t>& seeds, const std::string& csv_path,
                                         const RunOptions& opt = {}) {
    if (fanins.empty()) throw ArgumentError("run_sweep: empty fanin list");
    if (seeds.empty()) throw ArgumentError("run_sweep: empty seed list");
    for (std::size_t k : fanins)
        if (k == 0 || k > base.n1)
            throw ArgumentError("run_sweep: fanin " + std::to_string(k) + " outside [1, n1]");
    if (base.total_l2_filters % base.n1 != 0)
        throw ArgumentError("run_sweep: total_l2_filters must be divisible by n1");
    std::vector<SweepEntry> out;
    for (std::size_t k : fanins) {
        for (std::uint64_t s : seeds) {
            SweepEntry e;
            e.config = sweep_config(base, k, s);
            try {
                e.result = run_experiment(e.config, opt);
                if (!csv_path.empty()) append_csv(csv_path, csv_row(*e.result));
            } catch (const std::exception& ex) {
                e.error = ex.what();
                if (opt.log) *opt.log << "run failed: " << e.error << std::endl;
                if (!csv_path.empty()) append_csv(csv_path, csv_error_row(e.config, e.error));
            }
            out.push_back(std::move(e));
        }
    }
    return out;
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw ArgumentError("median: empty input");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct SweepSummary {
    std::size_t fanin = 0;
    std::size_t succeeded = 0;
    std::size_t failed = 0;
    double median_test_accuracy = 0.0;
};

/// Median test accuracy per fanin over the successful seeds.
inline std::vector<SweepSummary> summarize_sweep(const std::vector<SweepEntry>& entries) {
    std::vector<SweepSummary> out;
    std::map<std::size_t, std::vector<double>> acc;
    std::map<std::size_t, std::size_t> failed;
    std::vector<std::size_t> order;
    for (const auto& e : entries) {
        const std::size_t k = e.config.resolved_fanin();
        if (std::find(order.begin(), order.end(), k) == order.end()) order.push_back(k);
        if (e.result)
            acc[k].push_back(e.result->test_accuracy);
        else
            ++failed[k];
    }
    for (std::size_t k : order) {
        SweepSummary s;
        s.fanin = k;
        s.succeeded = acc[k].size();
        s.failed = failed[k];
        s.median_test_accuracy = acc[k].empty() ? std::numeric_limits<double>::quiet_NaN() : median(acc[k]);
        out.push_back(s);
    }
    return out;
}

}  // namespace rfcl
