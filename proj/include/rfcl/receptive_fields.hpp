#pragma once

// Connection tables between layer 1 and layer 2, and the co-activation
// similarity that drives the learned grouping.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rfcl/error.hpp"
#include "rfcl/linalg.hpp"
#include "rfcl/random.hpp"
#include "rfcl/tensor.hpp"

namespace rfcl {

enum class Strategy { single, learned, random, full };

inline const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::single: return "single";
        case Strategy::learned: return "learned";
        case Strategy::random: return "random";
        case Strategy::full: return "full";
    }
    return "?";
}

inline std::optional<Strategy> parse_strategy(std::string_view s) {
    if (s == "single") return Strategy::single;
    if (s == "learned") return Strategy::learned;
    if (s == "random") return Strategy::random;
    if (s == "full") return Strategy::full;
    return std::nullopt;
}

struct SimilarityMatrix {
    std::size_t n = 0;
    Eigen::MatrixXd values;  // n x n, entries in [-1, 1]
};

struct ConnectionTable {
    std::vector<std::vector<std::size_t>> groups;
    std::size_t n1 = 0;
    Strategy strategy = Strategy::single;

    [[nodiscard]] std::size_t group_count() const { return groups.size(); }
    /// Common group size K (0 for an empty table).
    [[nodiscard]] std::size_t fanin() const { return groups.empty() ? 0 : groups.front().size(); }

    void validate() const {
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const auto& grp = groups[g];
            if (grp.size() != fanin())
                throw ShapeError("ConnectionTable: group " + std::to_string(g) + " has " +
                                 std::to_string(grp.size()) + " members, expected " +
                                 std::to_string(fanin()));
            std::vector<std::size_t> sorted(grp);
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
                throw ShapeError("ConnectionTable: group " + std::to_string(g) + " repeats an index");
            for (std::size_t idx : grp)
                if (idx >= n1)
                    throw ShapeError("ConnectionTable: group " + std::to_string(g) + " index " +
                                     std::to_string(idx) + " >= n1 = " + std::to_string(n1));
        }
    }

    friend bool operator==(const ConnectionTable&, const ConnectionTable&) = default;
};

/// Pearson correlation between every pair of channels, pooling all pixels of
/// the first `sample_count` maps into one sequence per channel. Constant
/// channels correlate 0 with every other channel and 1 with themselves.
/// Two passes (means, then centered moments) keep the result stable under
/// large offsets.
inline SimilarityMatrix similarity_matrix(std::span<const Tensor3> feature_maps,
                                          std::size_t sample_count) {
    const std::size_t used = std::min(sample_count, feature_maps.size());
    if (used == 0) throw ArgumentError("similarity_matrix: no images");
    const std::size_t n = feature_maps.front().channels();
    for (std::size_t i = 0; i < used; ++i)
        if (feature_maps[i].channels() != n)
            throw ShapeError("similarity_matrix: image " + std::to_string(i) + " has " +
                             std::to_string(feature_maps[i].channels()) + " channels, expected " +
                             std::to_string(n));

    using MapMatrix = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    const auto ni = static_cast<Eigen::Index>(n);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(ni);
    double pixels = 0.0;
    for (std::size_t i = 0; i < used; ++i) {
        const auto& t = feature_maps[i];
        MapMatrix m(t.data().data(), ni, static_cast<Eigen::Index>(t.plane()));
        sum += m.rowwise().sum();
        pixels += static_cast<double>(t.plane());
    }
    const Eigen::VectorXd mean = sum / pixels;
    Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(ni, ni);
    for (std::size_t i = 0; i < used; ++i) {
        const auto& t = feature_maps[i];
        MapMatrix m(t.data().data(), ni, static_cast<Eigen::Index>(t.plane()));
        const Eigen::MatrixXd centered = m.colwise() - mean;
        moment.noalias() += centered * centered.transpose();
    }

    SimilarityMatrix sim;
    sim.n = n;
    sim.values = Eigen::MatrixXd::Zero(ni, ni);
    const Eigen::VectorXd var = moment.diagonal();
    for (Eigen::Index a = 0; a < ni; ++a) {
        for (Eigen::Index b = 0; b < ni; ++b) {
            if (a == b) {
                sim.values(a, b) = 1.0;
            } else if (var(a) > 0.0 && var(b) > 0.0) {
                // Symmetric by construction: same operands in the same order.
                const Eigen::Index lo = std::min(a, b), hi = std::max(a, b);
                const double r = moment(lo, hi) / std::sqrt(var(lo) * var(hi));
                sim.values(a, b) = std::clamp(r, -1.0, 1.0);
            }
        }
    }
    return sim;
}

/// One group per anchor map: the anchor followed by its (fanin - 1) most
/// similar other maps, in descending similarity (ties to the lower index).
/// Partners may appear in several groups.
inline ConnectionTable build_learned_rf(const SimilarityMatrix& sim, std::size_t fanin) {
    if (fanin < 2) throw ArgumentError("build_learned_rf: fanin must be >= 2");
    if (fanin > sim.n)
        throw ArgumentError("build_learned_rf: fanin " + std::to_string(fanin) + " exceeds n = " +
                            std::to_string(sim.n));
    ConnectionTable table;
    table.n1 = sim.n;
    table.strategy = Strategy::learned;
    for (std::size_t a = 0; a < sim.n; ++a) {
        std::vector<std::size_t> others;
        for (std::size_t b = 0; b < sim.n; ++b)
            if (b != a) others.push_back(b);
        const auto ai = static_cast<Eigen::Index>(a);
        std::stable_sort(others.begin(), others.end(), [&](std::size_t x, std::size_t y) {
            return sim.values(ai, static_cast<Eigen::Index>(x)) > sim.values(ai, static_cast<Eigen::Index>(y));
        });
        std::vector<std::size_t> grp{a};
        grp.insert(grp.end(), others.begin(), others.begin() + static_cast<std::ptrdiff_t>(fanin - 1));
        table.groups.push_back(std::move(grp));
    }
    return table;
}

/// One group per anchor map: the anchor followed by (fanin - 1) other maps
/// drawn uniformly without replacement. fanin = 1 yields the single-map table.
inline ConnectionTable build_random_rf(std::size_t n1, std::size_t fanin, std::uint64_t rng_seed) {
    if (fanin < 1) throw ArgumentError("build_random_rf: fanin must be >= 1");
    if (fanin > n1)
        throw ArgumentError("build_random_rf: fanin " + std::to_string(fanin) + " exceeds n1 = " +
                            std::to_string(n1));
    Rng rng(rng_seed);
    ConnectionTable table;
    table.n1 = n1;
    table.strategy = fanin == 1 ? Strategy::single : Strategy::random;
    for (std::size_t a = 0; a < n1; ++a) {
        std::vector<std::size_t> others;
        for (std::size_t b = 0; b < n1; ++b)
            if (b != a) others.push_back(b);
        std::vector<std::size_t> grp{a};
        for (std::size_t i = 0; i + 1 < fanin; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, others.size() - 1);
            std::swap(others[i], others[pick(rng)]);
            grp.push_back(others[i]);
        }
        table.groups.push_back(std::move(grp));
    }
    return table;
}

inline ConnectionTable build_single_rf(std::size_t n1) {
    if (n1 < 1) throw ArgumentError("build_single_rf: n1 must be >= 1");
    ConnectionTable table;
    table.n1 = n1;
    table.strategy = Strategy::single;
    for (std::size_t a = 0; a < n1; ++a) table.groups.push_back({a});
    return table;
}

inline ConnectionTable build_full_rf(std::size_t n1) {
    if (n1 < 1) throw ArgumentError("build_full_rf: n1 must be >= 1");
    ConnectionTable table;
    table.n1 = n1;
    table.strategy = Strategy::full;
    table.groups.emplace_back(n1);
    std::iota(table.groups.front().begin(), table.groups.front().end(), std::size_t{0});
    return table;
}

// Text form: header "strategy=<name> n1=<n> fanin=<k>", then one line of
// space-separated indices per group.

inline std::string format_connection_table(const ConnectionTable& t) {
    std::ostringstream os;
    os << "strategy=" << to_string(t.strategy) << " n1=" << t.n1 << " fanin=" << t.fanin() << "\n";
    for (const auto& g : t.groups) {
        for (std::size_t i = 0; i < g.size(); ++i) os << (i ? " " : "") << g[i];
        os << "\n";
    }
    return os.str();
}

inline ConnectionTable parse_connection_table(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw FormatError("connection table: missing header line");
    std::istringstream hs(line);
    std::string tok;
    std::optional<Strategy> strategy;
    std::optional<std::size_t> n1, fanin;
    while (hs >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw FormatError("connection table: bad header token '" + tok + "'");
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        try {
            if (key == "strategy") {
                strategy = parse_strategy(val);
                if (!strategy) throw FormatError("connection table: unknown strategy '" + val + "'");
            } else if (key == "n1") {
                n1 = std::stoul(val);
            } else if (key == "fanin") {
                fanin = std::stoul(val);
            } else {
                throw FormatError("connection table: unknown header key '" + key + "'");
            }
        } catch (const std::logic_error&) {
            throw FormatError("connection table: bad header value '" + tok + "'");
        }
    }
    if (!strategy || !n1 || !fanin) throw FormatError("connection table: incomplete header");
    ConnectionTable t;
    t.strategy = *strategy;
    t.n1 = *n1;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        std::vector<std::size_t> grp;
        long long v = 0;
        while (ls >> v) {
            if (v < 0) throw FormatError("connection table: negative index on line " + std::to_string(lineno));
            grp.push_back(static_cast<std::size_t>(v));
        }
        if (!ls.eof()) throw FormatError("connection table: non-numeric token on line " + std::to_string(lineno));
        t.groups.push_back(std::move(grp));
    }
    if (t.fanin() != *fanin && !t.groups.empty())
        throw FormatError("connection table: header fanin " + std::to_string(*fanin) +
                          " does not match groups of size " + std::to_string(t.fanin()));
    try {
        t.validate();
    } catch (const ShapeError& e) {
        throw FormatError(e.what());
    }
    return t;
}

inline void save_connection_table(const ConnectionTable& t, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("cannot open for writing: " + path);
    os << format_connection_table(t);
    if (!os) throw FormatError("save_connection_table: write failed for " + path);
}

inline ConnectionTable load_connection_table(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_connection_table(ss.str());
}

}  // namespace rfcl
