#pragma once

// Dataset ingestion (CIFAR-10 binary layout), global standardization and
// image-level ZCA whitening.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rfcl/binary_io.hpp"
#include "rfcl/error.hpp"
#include "rfcl/linalg.hpp"
#include "rfcl/tensor.hpp"

namespace rfcl {

inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kImageSide = 32;
inline constexpr std::size_t kImagePixels = kImageChannels * kImageSide * kImageSide;  // 3072
inline constexpr std::size_t kRecordBytes = 1 + kImagePixels;                          // 3073
inline constexpr std::size_t kNumClasses = 10;

enum class Split { train, test };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct LabeledImage {
    Tensor3 image;
    std::uint8_t label = 0;
};

struct Dataset {
    std::vector<LabeledImage> images;
    Split split = Split::train;
    std::string name;

    [[nodiscard]] std::size_t size() const { return images.size(); }
    [[nodiscard]] bool empty() const { return images.empty(); }
};

// ---------------------------------------------------------------------------
// Canonical binary format

namespace detail {

inline void append_records(const std::string& path, std::size_t limit, Dataset& out) {
    const auto bytes = std::filesystem::file_size(path);
    if (bytes == 0) throw FormatError(path + ": empty dataset file");
    if (bytes % kRecordBytes != 0) {
        const auto offset = (bytes / kRecordBytes) * kRecordBytes;
        throw FormatError(path + ": truncated record at byte offset " + std::to_string(offset) +
                          " (file length " + std::to_string(bytes) + " is not a multiple of " +
                          std::to_string(kRecordBytes) + ")");
    }
    const std::size_t records = std::min<std::size_t>(bytes / kRecordBytes, limit);
    auto is = io::open_in(path);
    std::vector<unsigned char> buf(kRecordBytes);
    for (std::size_t r = 0; r < records; ++r) {
        io::read_exact(is, reinterpret_cast<char*>(buf.data()), kRecordBytes, path);
        if (buf[0] >= kNumClasses)
            throw FormatError(path + ": record " + std::to_string(r) + " has label " +
                              std::to_string(buf[0]) + " > 9");
        LabeledImage li;
        li.label = buf[0];
        li.image = Tensor3(kImageChannels, kImageSide, kImageSide);
        auto px = li.image.data();
        for (std::size_t i = 0; i < kImagePixels; ++i) px[i] = static_cast<double>(buf[1 + i]);
        out.images.push_back(std::move(li));
    }
}

}  // namespace detail

/// Reads 3073-byte records (label byte, then 1024 R, 1024 G, 1024 B bytes,
/// each plane row-major 32x32) from one or more files in order. With
/// `expected_count`, exactly that many records are taken and a shortfall is
/// an error.
inline Dataset load_canonical(const std::vector<std::string>& paths,
                              std::optional<std::size_t> expected_count = std::nullopt,
                              Split split = Split::train, std::string name = "dataset") {
    if (paths.empty()) throw ArgumentError("load_canonical: no input files");
    Dataset ds;
    ds.split = split;
    ds.name = std::move(name);
    const std::size_t want = expected_count.value_or(static_cast<std::size_t>(-1));
    for (const auto& p : paths) {
        if (ds.size() >= want) break;
        if (!std::filesystem::exists(p)) throw FormatError(p + ": no such file");
        detail::append_records(p, want - ds.size(), ds);
    }
    if (expected_count && ds.size() != *expected_count)
        throw FormatError("load_canonical: requested " + std::to_string(*expected_count) +
                          " records but input holds only " + std::to_string(ds.size()));
    return ds;
}

inline Dataset load_canonical(const std::string& path,
                              std::optional<std::size_t> expected_count = std::nullopt,
                              Split split = Split::train, std::string name = "dataset") {
    return load_canonical(std::vector<std::string>{path}, expected_count, split, std::move(name));
}

/// Writes pixels rounded and clamped to [0,255].
inline void save_canonical(const Dataset& ds, const std::string& path) {
    auto os = io::open_out(path);
    std::vector<unsigned char> buf(kRecordBytes);
    for (const auto& li : ds.images) {
        if (li.image.shape() != Shape3{kImageChannels, kImageSide, kImageSide})
            throw ShapeError("save_canonical: image shape " + to_string(li.image.shape()) +
                             " is not (3,32,32)");
        buf[0] = li.label;
        const auto px = li.image.data();
        for (std::size_t i = 0; i < kImagePixels; ++i)
            buf[1 + i] = static_cast<unsigned char>(std::clamp(std::lround(px[i]), 0L, 255L));
        os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }
    if (!os) throw FormatError("save_canonical: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Standardization

struct Standardized {
    Dataset data;
    double mean = 0.0;
    double stddev = 1.0;
};

/// x -> (x - mean) / stddev with externally supplied statistics.
inline Dataset standardize_with(const Dataset& ds, double mean, double stddev) {
    if (!(stddev > 0.0)) throw DegenerateDataError("standardize: standard deviation is zero");
    Dataset out = ds;
    for (auto& li : out.images)
        for (double& v : li.image.data()) v = (v - mean) / stddev;
    return out;
}

/// Global scalar mean and population standard deviation over every pixel of
/// every channel of `train`, then applied to it.
inline Standardized standardize(const Dataset& train) {
    if (train.empty()) throw ArgumentError("standardize: empty dataset");
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& li : train.images)
        for (double v : li.image.data()) sum += v, ++n;
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& li : train.images)
        for (double v : li.image.data()) ss += (v - mean) * (v - mean);
    const double stddev = std::sqrt(ss / static_cast<double>(n));
    if (!(stddev > 0.0)) throw DegenerateDataError("standardize: standard deviation is zero");
    return {standardize_with(train, mean, stddev), mean, stddev};
}

// ---------------------------------------------------------------------------
// ZCA whitening

struct WhiteningTransform {
    Eigen::VectorXd mean;        // per-dimension
    Eigen::MatrixXd projection;  // symmetric D x D
    double epsilon = 0.0;        // NaN when loaded from disk (not persisted)

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
};

inline RowMatrix to_matrix(const Dataset& ds) {
    if (ds.empty()) throw ArgumentError("to_matrix: empty dataset");
    const std::size_t d = ds.images.front().image.size();
    RowMatrix x(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto px = ds.images[i].image.data();
        if (px.size() != d) throw ShapeError("to_matrix: images differ in size");
        std::copy(px.begin(), px.end(), x.row(static_cast<Eigen::Index>(i)).data());
    }
    return x;
}

/// P = E diag(1/sqrt(lambda + epsilon)) E^T from the population covariance of
/// the rows of `samples`. Eigenvalues that come out slightly negative from
/// rounding are clamped to zero.
inline WhiteningTransform fit_whitening(const RowMatrix& samples, double epsilon) {
    if (samples.rows() == 0 || samples.cols() == 0)
        throw ArgumentError("fit_whitening: empty sample matrix");
    if (!(epsilon >= 0.0)) throw ArgumentError("fit_whitening: epsilon must be >= 0");
    WhiteningTransform t;
    t.epsilon = epsilon;
    t.mean = samples.colwise().mean().transpose();
    const RowMatrix centered = samples.rowwise() - t.mean.transpose();
    Eigen::MatrixXd cov(centered.cols(), centered.cols());
    cov.setZero();
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(),
                                                   1.0 / static_cast<double>(samples.rows()));
    cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
    if (!cov.allFinite()) throw NumericError("fit_whitening: covariance has non-finite entries");
    const SymmetricEigen eig = symmetric_eigen(cov);
    Eigen::VectorXd scale(eig.values.size());
    for (Eigen::Index i = 0; i < scale.size(); ++i) {
        const double denom = std::max(eig.values(i), 0.0) + epsilon;
        if (!(denom > 0.0))
            throw NumericError("fit_whitening: covariance is singular along eigenvector " +
                               std::to_string(i) + "; epsilon must be > 0");
        scale(i) = 1.0 / std::sqrt(denom);
    }
    Eigen::MatrixXd p = eig.vectors * scale.asDiagonal() * eig.vectors.transpose();
    t.projection = 0.5 * (p + p.transpose());
    return t;
}

/// Fits on the flattened train images only.
inline WhiteningTransform fit_whitening(const Dataset& train, double epsilon) {
    if (train.split != Split::train)
        throw ArgumentError("fit_whitening: transform must be fitted on the train split");
    return fit_whitening(to_matrix(train), epsilon);
}

/// Rows x -> P (x - mean).
inline RowMatrix apply_whitening(const WhiteningTransform& t, const RowMatrix& samples) {
    if (static_cast<std::size_t>(samples.cols()) != t.dim())
        throw ShapeError("apply_whitening: sample dimension " + std::to_string(samples.cols()) +
                         " != transform dimension " + std::to_string(t.dim()));
    RowMatrix out(samples.rows(), samples.cols());
    constexpr Eigen::Index kChunk = 1024;
    for (Eigen::Index r0 = 0; r0 < samples.rows(); r0 += kChunk) {
        const Eigen::Index n = std::min(kChunk, samples.rows() - r0);
        out.middleRows(r0, n).noalias() =
            (samples.middleRows(r0, n).rowwise() - t.mean.transpose()) * t.projection;
    }
    return out;
}

inline Dataset apply_whitening(const WhiteningTransform& t, const Dataset& ds) {
    Dataset out;
    out.split = ds.split;
    out.name = ds.name;
    if (ds.empty()) return out;
    for (const auto& li : ds.images)
        if (li.image.size() != t.dim())
            throw ShapeError("apply_whitening: image of " + std::to_string(li.image.size()) +
                             " values does not match transform dimension " +
                             std::to_string(t.dim()));
    const RowMatrix w = apply_whitening(t, to_matrix(ds));
    out.images.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto row = w.row(static_cast<Eigen::Index>(i));
        out.images.push_back(
            {Tensor3(ds.images[i].image.shape(), std::vector<double>(row.data(), row.data() + row.size())),
             ds.images[i].label});
    }
    return out;
}

/// "RFCL-ZCA1", D (u32 LE), D f64 mean, D*D f64 projection row-major.
inline void save_whitening(const WhiteningTransform& t, const std::string& path) {
    auto os = io::open_out(path);
    io::write_magic(os, "RFCL-ZCA1");
    const std::size_t d = t.dim();
    io::write_u32(os, io::checked_u32(d, "whitening dimension"));
    for (std::size_t i = 0; i < d; ++i) io::write_f64(os, t.mean(static_cast<Eigen::Index>(i)));
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c)
            io::write_f64(os, t.projection(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
    if (!os) throw FormatError("save_whitening: write failed for " + path);
}

inline WhiteningTransform load_whitening(const std::string& path) {
    auto is = io::open_in(path);
    io::expect_magic(is, "RFCL-ZCA1", path);
    const std::size_t d = io::read_u32(is, path);
    WhiteningTransform t;
    t.epsilon = std::numeric_limits<double>::quiet_NaN();
    t.mean.resize(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) t.mean(static_cast<Eigen::Index>(i)) = io::read_f64(is, path);
    t.projection.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c)
            t.projection(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = io::read_f64(is, path);
    return t;
}

}  // namespace rfcl
