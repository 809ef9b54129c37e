// rfcl: run connection-topology experiments, sweeps over fanin, filter
// visualization, and artifact inspection.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rfcl/rfcl.hpp"
#include "rfcl/synthetic.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string preset = "desk";
    std::optional<std::uint64_t> seed;
    std::string out_dir = "rfcl_out";
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "key=value experiment config file");
    cmd->add_option("--preset", f.preset, "desk | paper")->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--seed", f.seed, "master seed (overrides the config)");
    cmd->add_option("--out", f.out_dir, "output directory for CSV and artifacts");
}

rfcl::ExperimentConfig resolve(const CommonFlags& f) {
    rfcl::ExperimentConfig c = *rfcl::preset_by_name(f.preset);
    if (!f.config_path.empty()) rfcl::apply_config_file(c, f.config_path);
    if (f.seed) c.master_seed = *f.seed;
    return c;
}

void print_result(const rfcl::RunResult& r) {
    std::cout << std::fixed << std::setprecision(4) << "strategy=" << rfcl::csv_strategy(r.config)
              << " fanin=" << (r.config.layers == 1 ? 0 : r.config.resolved_fanin())
              << " features=" << r.feature_length << " train_acc=" << r.train_accuracy
              << " test_acc=" << r.test_accuracy << " epochs=" << r.epochs_run
              << " stop=" << rfcl::to_string(r.stop) << "\n";
    for (const auto& [stage, secs] : r.stage_seconds)
        std::cout << "  " << stage << ": " << std::setprecision(2) << secs << " s\n";
    for (const auto& [key, path] : r.artifacts) std::cout << "  " << key << " -> " << path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Receptive-field connection experiments for clustering-learning networks"};
    app.require_subcommand(1);

    CommonFlags run_flags;
    auto* run = app.add_subcommand("run", "run one experiment and append a CSV row");
    add_common(run, run_flags);

    CommonFlags sweep_flags;
    std::vector<std::size_t> fanins;
    std::vector<std::uint64_t> seeds;
    auto* sweep = app.add_subcommand("sweep", "random-table fanin sweep over several seeds");
    add_common(sweep, sweep_flags);
    sweep->add_option("--fanins", fanins, "fanins to run (default from config)")->delimiter(',');
    sweep->add_option("--seeds", seeds, "master seeds (default from config)")->delimiter(',');

    std::string fb_path, pgm_path;
    auto* exp = app.add_subcommand("export-filters", "tile a filter bank into a PGM image");
    exp->add_option("filterbank", fb_path, "RFCL-FB1 file")->required();
    exp->add_option("output", pgm_path, "output .pgm path")->required();

    std::string inspect_path;
    auto* insp = app.add_subcommand("inspect", "print the header of a persisted artifact");
    insp->add_option("path", inspect_path)->required();

    rfcl::SyntheticSpec synth_spec;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "write a synthetic dataset in the canonical layout");
    synth->add_option("output", synth_out)->required();
    synth->add_option("--count", synth_spec.count);
    synth->add_option("--seed", synth_spec.seed);
    synth->add_option("--noise", synth_spec.noise);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const auto cfg = resolve(run_flags);
            std::filesystem::create_directories(run_flags.out_dir);
            const std::string csv = (std::filesystem::path(run_flags.out_dir) / "results.csv").string();
            try {
                const auto res = rfcl::run_experiment(cfg, {run_flags.out_dir, &std::cerr});
                rfcl::append_csv(csv, rfcl::csv_row(res));
                print_result(res);
            } catch (const rfcl::StageError& e) {
                rfcl::append_csv(csv, rfcl::csv_error_row(cfg, e.what()));
                throw;
            }
        } else if (*sweep) {
            const auto cfg = resolve(sweep_flags);
            if (fanins.empty()) fanins = cfg.sweep_fanins;
            if (seeds.empty()) seeds = cfg.sweep_seeds;
            std::filesystem::create_directories(sweep_flags.out_dir);
            const auto dir = std::filesystem::path(sweep_flags.out_dir);
            const auto entries =
                rfcl::run_sweep(cfg, fanins, seeds, (dir / "results.csv").string(), {sweep_flags.out_dir, &std::cerr});
            std::ofstream summary(dir / "summary.csv");
            summary << "fanin,runs,failed,median_test_acc\n";
            for (const auto& s : rfcl::summarize_sweep(entries)) {
                summary << s.fanin << "," << s.succeeded << "," << s.failed << "," << std::setprecision(6)
                        << s.median_test_accuracy << "\n";
                std::cout << "K=" << s.fanin << " median test_acc=" << std::fixed << std::setprecision(4)
                          << s.median_test_accuracy << " (" << s.succeeded << " ok, " << s.failed << " failed)\n";
            }
        } else if (*exp) {
            const auto img = rfcl::export_filters(fb_path, pgm_path);
            std::cout << "wrote " << pgm_path << " (" << img.width << "x" << img.height << ")\n";
        } else if (*insp) {
            std::cout << rfcl::inspect_artifact(inspect_path) << "\n";
        } else if (*synth) {
            rfcl::save_canonical(rfcl::make_synthetic(synth_spec), synth_out);
            std::cout << "wrote " << synth_spec.count << " records to " << synth_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
