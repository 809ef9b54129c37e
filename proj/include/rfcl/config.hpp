#pragma once

// Declarative experiment configuration: presets plus flat key=value files.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rfcl/error.hpp"
#include "rfcl/mlp.hpp"
#include "rfcl/receptive_fields.hpp"

namespace rfcl {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
    std::string dataset = "cifar10";
    std::vector<std::string> train_paths;
    std::vector<std::string> test_paths;
    std::size_t train_count = 5000;
    std::size_t test_count = 2000;

    std::size_t layers = 2;                 // 1 = one-layer baseline
    Strategy strategy = Strategy::random;
    std::optional<std::size_t> fanin;       // resolved by resolved_fanin()
    std::string rf_grouping = "anchored";   // "greedy" is recognised but not implemented
    std::size_t n1 = 32;
    std::size_t total_l2_filters = 512;
    std::size_t filter_size = 5;
    std::size_t pool_window = 2;
    std::size_t pool_stride = 2;
    double theta = 0.0;
    std::size_t bypass_window = 4;
    std::size_t bypass_stride = 4;

    double whitening_epsilon = 0.01;
    double patch_epsilon = 0.1;
    bool l2_whiten_patches = false;
    std::size_t l1_patches = 40'000;
    std::size_t l2_patches_per_group = 20'000;
    std::size_t l2_source_images = 2000;
    std::size_t similarity_samples = 500;
    std::size_t kmeans_max_iters = 100;
    double kmeans_tol = 1e-4;

    TrainConfig train{};
    std::uint64_t master_seed = 1;

    std::vector<std::size_t> sweep_fanins{1, 2, 4, 8, 16};
    std::vector<std::uint64_t> sweep_seeds{1, 2, 3};
    bool save_features = false;

    [[nodiscard]] std::size_t resolved_fanin() const {
        if (fanin) return *fanin;
        switch (strategy) {
            case Strategy::single: return 1;
            case Strategy::full: return n1;
            default: return 2;
        }
    }

    [[nodiscard]] std::size_t group_count() const {
        return strategy == Strategy::full ? 1 : n1;
    }

    [[nodiscard]] std::size_t filters_per_group() const { return total_l2_filters / group_count(); }

    void validate() const {
        auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
        if (train_paths.empty()) fail("train_path is required");
        if (test_paths.empty()) fail("test_path is required");
        if (train_count == 0 || test_count == 0) fail("train_count and test_count must be >= 1");
        if (layers != 1 && layers != 2) fail("layers must be 1 or 2");
        if (n1 == 0) fail("n1 must be >= 1");
        if (filter_size == 0) fail("filter_size must be >= 1");
        if (pool_window == 0 || pool_stride == 0 || bypass_window == 0 || bypass_stride == 0)
            fail("pool and bypass window/stride must be >= 1");
        if (!(whitening_epsilon >= 0.0)) fail("whitening_epsilon must be >= 0");
        if (!(patch_epsilon > 0.0)) fail("patch_epsilon must be > 0");
        if (l1_patches < n1) fail("l1_patches must be >= n1");
        if (kmeans_max_iters == 0) fail("kmeans_max_iters must be >= 1");
        if (!(train.learning_rate >= 0.0)) fail("learning_rate must be >= 0");
        if (train.batch_size == 0) fail("batch_size must be >= 1");
        if (rf_grouping == "greedy") fail("rf_grouping=greedy (disjoint greedy matching) is not implemented");
        if (rf_grouping != "anchored") fail("unknown rf_grouping '" + rf_grouping + "'");
        if (layers == 1) return;
        const std::size_t k = resolved_fanin();
        if (k == 0 || k > n1) fail("fanin must be in [1, n1]");
        if (strategy == Strategy::single && k != 1) fail("strategy=single requires fanin=1");
        if (strategy == Strategy::full && k != n1) fail("strategy=full requires fanin=n1");
        if (strategy == Strategy::learned && k < 2) fail("strategy=learned requires fanin >= 2");
        if (total_l2_filters == 0 || total_l2_filters % group_count() != 0)
            fail("total_l2_filters (" + std::to_string(total_l2_filters) +
                 ") must be divisible by the group count (" + std::to_string(group_count()) + ")");
        if (l2_patches_per_group < filters_per_group()) fail("l2_patches_per_group must be >= filters per group");
        if (l2_source_images == 0) fail("l2_source_images must be >= 1");
        if (strategy == Strategy::learned && similarity_samples == 0) fail("similarity_samples must be >= 1");
    }
};

/// Small training set and 10x fewer k-means patches; full filter counts.
inline ExperimentConfig desk_preset() { return ExperimentConfig{}; }

/// Dataset and patch sizes at the scale of the original experiments.
inline ExperimentConfig paper_preset() {
    ExperimentConfig c;
    c.train_count = 20'000;
    c.test_count = 10'000;
    c.l1_patches = 400'000;
    c.l2_patches_per_group = 200'000;
    c.l2_source_images = 5000;
    return c;
}

inline std::optional<ExperimentConfig> preset_by_name(std::string_view name) {
    if (name == "desk") return desk_preset();
    if (name == "paper") return paper_preset();
    return std::nullopt;
}

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end) throw ConfigError("config: bad value for " + key + ": '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
    std::vector<T> out;
    for (const auto& item : split_list(v)) out.push_back(parse_number<T>(key, item));
    return out;
}

}  // namespace detail

/// Applies one key=value setting; unknown keys are errors.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
    using detail::parse_number;
    using Setter = std::function<void(const std::string&)>;
    auto sz = [&](std::size_t& f) { return Setter([p = &f, k = key](const std::string& v) { *p = parse_number<std::size_t>(k, v); }); };
    auto real = [&](double& f) { return Setter([p = &f, k = key](const std::string& v) { *p = parse_number<double>(k, v); }); };
    const std::map<std::string, Setter> table{
        {"dataset", [&](const std::string& v) { c.dataset = v; }},
        {"train_path", [&](const std::string& v) { c.train_paths = detail::split_list(v); }},
        {"test_path", [&](const std::string& v) { c.test_paths = detail::split_list(v); }},
        {"train_count", sz(c.train_count)},
        {"test_count", sz(c.test_count)},
        {"layers", sz(c.layers)},
        {"strategy",
         [&](const std::string& v) {
             const auto s = parse_strategy(v);
             if (!s) throw ConfigError("config: unknown strategy '" + v + "'");
             c.strategy = *s;
         }},
        {"fanin", [&](const std::string& v) { c.fanin = parse_number<std::size_t>("fanin", v); }},
        {"rf_grouping", [&](const std::string& v) { c.rf_grouping = v; }},
        {"n1", sz(c.n1)},
        {"total_l2_filters", sz(c.total_l2_filters)},
        {"filter_size", sz(c.filter_size)},
        {"pool_window", sz(c.pool_window)},
        {"pool_stride", sz(c.pool_stride)},
        {"theta", real(c.theta)},
        {"bypass_window", sz(c.bypass_window)},
        {"bypass_stride", sz(c.bypass_stride)},
        {"whitening_epsilon", real(c.whitening_epsilon)},
        {"patch_epsilon", real(c.patch_epsilon)},
        {"l2_whiten_patches", [&](const std::string& v) { c.l2_whiten_patches = detail::parse_bool("l2_whiten_patches", v); }},
        {"l1_patches", sz(c.l1_patches)},
        {"l2_patches_per_group", sz(c.l2_patches_per_group)},
        {"l2_source_images", sz(c.l2_source_images)},
        {"similarity_samples", sz(c.similarity_samples)},
        {"kmeans_max_iters", sz(c.kmeans_max_iters)},
        {"kmeans_tol", real(c.kmeans_tol)},
        {"learning_rate", real(c.train.learning_rate)},
        {"lr_decay", real(c.train.lr_decay)},
        {"momentum", real(c.train.momentum)},
        {"batch_size", sz(c.train.batch_size)},
        {"max_epochs", sz(c.train.max_epochs)},
        {"stop_at_train_accuracy", real(c.train.stop_at_train_accuracy)},
        {"hidden_units", sz(c.train.hidden)},
        {"master_seed", [&](const std::string& v) { c.master_seed = parse_number<std::uint64_t>("master_seed", v); }},
        {"sweep_fanins", [&](const std::string& v) { c.sweep_fanins = detail::parse_list<std::size_t>("sweep_fanins", v); }},
        {"sweep_seeds", [&](const std::string& v) { c.sweep_seeds = detail::parse_list<std::uint64_t>("sweep_seeds", v); }},
        {"save_features", [&](const std::string& v) { c.save_features = detail::parse_bool("save_features", v); }},
    };
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second(value);
}

/// Flat `key = value` lines; `#` starts a comment.
inline void apply_config_text(ExperimentConfig& c, const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        apply_setting(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
}

inline void apply_config_file(ExperimentConfig& c, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot read " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    apply_config_text(c, ss.str());
}

}  // namespace rfcl
