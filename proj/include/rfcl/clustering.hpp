#pragma once

// Clustering learning: filters are k-means centroids of patches sampled from
// a stream of images or feature maps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rfcl/error.hpp"
#include "rfcl/linalg.hpp"
#include "rfcl/random.hpp"
#include "rfcl/tensor.hpp"

namespace rfcl {

struct PatchSet {
    RowMatrix patches;  // one patch per row, layout fanin x size x size
    std::size_t fanin = 0;
    std::size_t size = 0;

    [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(patches.rows()); }
    [[nodiscard]] std::size_t dim() const { return fanin * size * size; }
};

/// Draws `count` patches, each from a uniformly chosen tensor at a uniformly
/// chosen valid position, reading only the selected channels.
inline PatchSet extract_patches(std::span<const Tensor3> source,
                                std::span<const std::size_t> selection, std::size_t size,
                                std::size_t count, std::uint64_t rng_seed) {
    if (source.empty()) throw ArgumentError("extract_patches: empty source");
    if (count == 0) throw ArgumentError("extract_patches: count must be >= 1");
    if (selection.empty()) throw ArgumentError("extract_patches: empty channel selection");
    if (size == 0) throw ArgumentError("extract_patches: patch size must be >= 1");
    for (std::size_t i = 0; i < source.size(); ++i) {
        const auto& t = source[i];
        if (size > t.height() || size > t.width())
            throw ShapeError("extract_patches: patch size " + std::to_string(size) +
                             " exceeds spatial dims of source " + std::to_string(i) + " " +
                             to_string(t.shape()));
        for (std::size_t ch : selection)
            if (ch >= t.channels())
                throw ShapeError("extract_patches: channel " + std::to_string(ch) +
                                 " out of range for source " + std::to_string(i));
    }

    PatchSet ps;
    ps.fanin = selection.size();
    ps.size = size;
    ps.patches.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(ps.dim()));
    Rng rng(rng_seed);
    std::uniform_int_distribution<std::size_t> pick_image(0, source.size() - 1);
    for (std::size_t n = 0; n < count; ++n) {
        const Tensor3& t = source[pick_image(rng)];
        std::uniform_int_distribution<std::size_t> pick_row(0, t.height() - size);
        std::uniform_int_distribution<std::size_t> pick_col(0, t.width() - size);
        const std::size_t r0 = pick_row(rng);
        const std::size_t c0 = pick_col(rng);
        double* dst = ps.patches.row(static_cast<Eigen::Index>(n)).data();
        for (std::size_t ch : selection)
            for (std::size_t u = 0; u < size; ++u)
                for (std::size_t v = 0; v < size; ++v) *dst++ = t(ch, r0 + u, c0 + v);
    }
    return ps;
}

/// Per-row contrast normalization: (row - mean) / sqrt(var + epsilon).
inline PatchSet normalize_patches(PatchSet ps, double epsilon) {
    if (!(epsilon > 0.0)) throw ArgumentError("normalize_patches: epsilon must be > 0");
    const auto d = static_cast<double>(ps.patches.cols());
    for (Eigen::Index r = 0; r < ps.patches.rows(); ++r) {
        auto row = ps.patches.row(r);
        const double mean = row.sum() / d;
        row.array() -= mean;
        const double var = row.squaredNorm() / d;
        row /= std::sqrt(var + epsilon);
    }
    return ps;
}

struct Centroids {
    std::size_t k = 0;
    RowMatrix vectors;                   // k x dim
    std::vector<double> inertia_history;  // one entry per evaluated iteration
    std::vector<std::size_t> assignment;  // cluster of each patch under `vectors`
    bool converged = false;

    [[nodiscard]] double inertia() const {
        return inertia_history.empty() ? std::numeric_limits<double>::infinity()
                                       : inertia_history.back();
    }
};

namespace detail {

inline double squared_distance(const double* a, const double* b, Eigen::Index d) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        const double t = a[i] - b[i];
        s += t * t;
    }
    return s;
}

// Nearest centroid per row via the expanded form ||x||^2 - 2 x.c + ||c||^2
// (ties to the lowest index), then the exact squared residual of that pick.
inline double assign_clusters(const RowMatrix& x, const RowMatrix& c,
                              std::vector<std::size_t>& assignment, std::vector<double>& residual) {
    constexpr Eigen::Index kChunk = 2048;
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    const Eigen::VectorXd c_norm = c.rowwise().squaredNorm();
    assignment.resize(static_cast<std::size_t>(n));
    residual.resize(static_cast<std::size_t>(n));
    Eigen::MatrixXd cross;
    for (Eigen::Index r0 = 0; r0 < n; r0 += kChunk) {
        const Eigen::Index m = std::min(kChunk, n - r0);
        cross.noalias() = x.middleRows(r0, m) * c.transpose();
        for (Eigen::Index i = 0; i < m; ++i) {
            Eigen::Index best = 0;
            double best_score = c_norm(0) - 2.0 * cross(i, 0);
            for (Eigen::Index j = 1; j < c.rows(); ++j) {
                const double s = c_norm(j) - 2.0 * cross(i, j);
                if (s < best_score) best_score = s, best = j;
            }
            const auto row = static_cast<std::size_t>(r0 + i);
            assignment[row] = static_cast<std::size_t>(best);
            residual[row] = squared_distance(x.row(r0 + i).data(), c.row(best).data(), d);
        }
    }
    double inertia = 0.0;
    for (double r : residual) inertia += r;
    return inertia;
}

}  // namespace detail

/// Lloyd's k-means with Euclidean distance. Initial centroids are k distinct
/// rows chosen by seeded sampling; clusters that empty out are re-seeded from
/// the worst-fit patches. Iteration stops when the relative inertia
/// improvement drops below `tol`, when inertia reaches zero, or after
/// `max_iters` evaluations. An iteration whose inertia would exceed the
/// previous one (possible only through rounding) is discarded and ends the
/// run, so `inertia_history` never increases.
inline Centroids kmeans(const PatchSet& ps, std::size_t k, std::size_t max_iters, double tol,
                        std::uint64_t rng_seed) {
    const RowMatrix& x = ps.patches;
    const auto n = static_cast<std::size_t>(x.rows());
    if (k == 0) throw ArgumentError("kmeans: k must be >= 1");
    if (k > n)
        throw ArgumentError("kmeans: k = " + std::to_string(k) + " exceeds the " +
                            std::to_string(n) + " available patches");
    if (max_iters == 0) throw ArgumentError("kmeans: max_iters must be >= 1");
    if (!x.allFinite()) throw NumericError("kmeans: patches contain non-finite values");

    Rng rng(rng_seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(order[i], order[pick(rng)]);
    }

    Centroids out;
    out.k = k;
    RowMatrix c(static_cast<Eigen::Index>(k), x.cols());
    for (std::size_t j = 0; j < k; ++j) c.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(order[j]));

    std::vector<std::size_t> assignment;
    std::vector<double> residual;
    RowMatrix sums(c.rows(), c.cols());
    std::vector<std::size_t> counts(k);

    for (std::size_t it = 0; it < max_iters; ++it) {
        const double inertia = detail::assign_clusters(x, c, assignment, residual);
        if (!out.inertia_history.empty() && inertia > out.inertia_history.back()) {
            out.converged = true;
            break;
        }
        out.vectors = c;
        out.assignment = assignment;
        out.inertia_history.push_back(inertia);
        if (inertia == 0.0) {
            out.converged = true;
            break;
        }
        if (out.inertia_history.size() >= 2) {
            const double prev = out.inertia_history[out.inertia_history.size() - 2];
            if (prev - inertia <= tol * prev) {
                out.converged = true;
                break;
            }
        }
        if (it + 1 == max_iters) break;

        sums.setZero();
        std::fill(counts.begin(), counts.end(), std::size_t{0});
        for (std::size_t i = 0; i < n; ++i) {
            sums.row(static_cast<Eigen::Index>(assignment[i])) += x.row(static_cast<Eigen::Index>(i));
            ++counts[assignment[i]];
        }
        std::vector<std::size_t> empty;
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] == 0)
                empty.push_back(j);
            else
                c.row(static_cast<Eigen::Index>(j)) = sums.row(static_cast<Eigen::Index>(j)) / static_cast<double>(counts[j]);
        }
        if (!empty.empty()) {
            std::vector<std::size_t> worst(n);
            std::iota(worst.begin(), worst.end(), std::size_t{0});
            std::stable_sort(worst.begin(), worst.end(),
                             [&](std::size_t a, std::size_t b) { return residual[a] > residual[b]; });
            for (std::size_t e = 0; e < empty.size(); ++e)
                c.row(static_cast<Eigen::Index>(empty[e])) = x.row(static_cast<Eigen::Index>(worst[e]));
        }
    }
    return out;
}

/// Best (lowest final inertia) of `restarts` runs with seeds derived from `rng_seed`.
inline Centroids kmeans_best_of(const PatchSet& ps, std::size_t k, std::size_t max_iters,
                                double tol, std::uint64_t rng_seed, std::size_t restarts) {
    if (restarts == 0) throw ArgumentError("kmeans_best_of: restarts must be >= 1");
    Centroids best;
    for (std::size_t r = 0; r < restarts; ++r) {
        Centroids c = kmeans(ps, k, max_iters, tol, derive_seed(rng_seed, "restart" + std::to_string(r)));
        if (r == 0 || c.inertia() < best.inertia()) best = std::move(c);
    }
    return best;
}

/// Reshapes each centroid into a fanin x size x size kernel scaled to unit
/// norm. A zero centroid is replaced by a seeded random unit vector.
inline std::vector<Kernel> centroids_to_filterbank(const Centroids& centroids, std::size_t fanin,
                                                   std::size_t size, std::uint64_t rng_seed = 0) {
    const std::size_t len = fanin * size * size;
    if (static_cast<std::size_t>(centroids.vectors.cols()) != len)
        throw ShapeError("centroids_to_filterbank: centroid length " +
                         std::to_string(centroids.vectors.cols()) + " != fanin*size^2 = " +
                         std::to_string(len));
    Rng rng(rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Kernel> kernels;
    kernels.reserve(static_cast<std::size_t>(centroids.vectors.rows()));
    for (Eigen::Index j = 0; j < centroids.vectors.rows(); ++j) {
        const auto row = centroids.vectors.row(j);
        std::vector<double> w(row.data(), row.data() + row.size());
        double norm = row.norm();
        if (!(norm > 0.0)) {
            std::clog << "warning: centroid " << j << " has zero norm; using a random unit kernel\n";
            do {
                for (double& v : w) v = gauss(rng);
                norm = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())).norm();
            } while (!(norm > 0.0));
        }
        for (double& v : w) v /= norm;
        kernels.emplace_back(fanin, size, std::move(w));
    }
    return kernels;
}

}  // namespace rfcl
