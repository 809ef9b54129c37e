#pragma once

// The two-layer clustering-learning feature extractor with color bypass.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rfcl/binary_io.hpp"
#include "rfcl/data.hpp"
#include "rfcl/error.hpp"
#include "rfcl/filter_bank.hpp"
#include "rfcl/linalg.hpp"
#include "rfcl/receptive_fields.hpp"
#include "rfcl/tensor.hpp"

namespace rfcl {

/// conv -> max pool -> threshold, one output map per filter.
struct LayerSpec {
    FilterBank bank;
    std::size_t pool_window = 2;
    std::size_t pool_stride = 2;
    double theta = 0.0;

    void validate() const {
        bank.validate();
        if (bank.count() == 0) throw ShapeError("LayerSpec: no filters");
        if (pool_window < 1 || pool_stride < 1) throw ShapeError("LayerSpec: pool params must be >= 1");
    }
};

struct NetworkSpec {
    LayerSpec layer1;
    std::optional<LayerSpec> layer2;  // absent for the one-layer baseline
    ConnectionTable table;
    std::size_t bypass_window = 4;
    std::size_t bypass_stride = 4;

    [[nodiscard]] Shape3 layer1_output_shape(Shape3 in) const {
        const std::size_t k = layer1.bank.size;
        return {layer1.bank.count(),
                pooled_extent(in.height - k + 1, layer1.pool_window, layer1.pool_stride),
                pooled_extent(in.width - k + 1, layer1.pool_window, layer1.pool_stride)};
    }

    [[nodiscard]] Shape3 deep_output_shape(Shape3 in) const {
        const Shape3 s1 = layer1_output_shape(in);
        if (!layer2) return s1;
        const std::size_t k = layer2->bank.size;
        return {layer2->bank.count(),
                pooled_extent(s1.height - k + 1, layer2->pool_window, layer2->pool_stride),
                pooled_extent(s1.width - k + 1, layer2->pool_window, layer2->pool_stride)};
    }

    [[nodiscard]] std::size_t bypass_length(Shape3 in) const {
        return in.channels * pooled_extent(in.height, bypass_window, bypass_stride) *
               pooled_extent(in.width, bypass_window, bypass_stride);
    }

    [[nodiscard]] std::size_t feature_length(Shape3 in) const {
        return deep_output_shape(in).size() + bypass_length(in);
    }

    /// Layer-2 filters must be the table's groups in order, each group
    /// contributing an equal number of consecutive filters.
    void validate() const {
        layer1.validate();
        if (!layer2) return;
        layer2->validate();
        table.validate();
        const std::size_t g = table.group_count();
        if (g == 0 || layer2->bank.count() % g != 0)
            throw ShapeError("NetworkSpec: " + std::to_string(layer2->bank.count()) +
                             " layer-2 filters do not split evenly over " + std::to_string(g) + " groups");
        if (table.n1 != layer1.bank.count())
            throw ShapeError("NetworkSpec: table n1 " + std::to_string(table.n1) +
                             " != layer-1 filter count " + std::to_string(layer1.bank.count()));
        const std::size_t per_group = layer2->bank.count() / g;
        for (std::size_t f = 0; f < layer2->bank.count(); ++f)
            if (layer2->bank.filters[f].channels != table.groups[f / per_group])
                throw ShapeError("NetworkSpec: layer-2 filter " + std::to_string(f) +
                                 " does not read the channels of group " + std::to_string(f / per_group));
    }
};

inline Tensor3 forward_layer(const Tensor3& input, const LayerSpec& layer) {
    const auto& bank = layer.bank;
    if (bank.count() == 0) throw ShapeError("forward_layer: layer has no filters");
    if (bank.size > input.height() || bank.size > input.width())
        throw ShapeError("forward_layer: kernel size " + std::to_string(bank.size) +
                         " exceeds input " + to_string(input.shape()));
    Tensor3 conv(bank.count(), input.height() - bank.size + 1, input.width() - bank.size + 1);
    for (std::size_t f = 0; f < bank.count(); ++f)
        conv2d_valid_into(input, bank.filters[f].kernel, bank.filters[f].channels, conv.channel(f));
    return threshold(maxpool2d(conv, layer.pool_window, layer.pool_stride), layer.theta);
}

/// Flattened output of the deepest enabled layer.
inline std::vector<double> deep_features(const Tensor3& image, const NetworkSpec& net) {
    Tensor3 y = forward_layer(image, net.layer1);
    if (net.layer2) y = forward_layer(y, *net.layer2);
    return y.values();
}

inline std::vector<double> bypass_features(const Tensor3& bypass_source, const NetworkSpec& net) {
    return subsample(bypass_source, net.bypass_window, net.bypass_stride).values();
}

/// flatten(deep output) ++ flatten(subsample(bypass_source)).
inline std::vector<double> extract_features(const Tensor3& image, const Tensor3& bypass_source,
                                            const NetworkSpec& net) {
    if (image.shape() != bypass_source.shape())
        throw ShapeError("extract_features: image " + to_string(image.shape()) +
                         " and bypass source " + to_string(bypass_source.shape()) + " differ");
    std::vector<double> v = deep_features(image, net);
    const std::vector<double> b = bypass_features(bypass_source, net);
    v.insert(v.end(), b.begin(), b.end());
    return v;
}

struct FeatureMatrix {
    RowMatrixF features;  // rows x cols, stored in 32-bit (the on-disk precision)
    std::vector<std::uint8_t> labels;

    [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
    [[nodiscard]] std::size_t cols() const { return static_cast<std::size_t>(features.cols()); }
};

/// Row i = deep features of whitened image i ++ bypass_rows row i.
inline FeatureMatrix extract_dataset(const Dataset& whitened, const RowMatrix& bypass_rows,
                                     const NetworkSpec& net) {
    if (whitened.empty()) throw ArgumentError("extract_dataset: empty dataset");
    if (static_cast<std::size_t>(bypass_rows.rows()) != whitened.size())
        throw ShapeError("extract_dataset: " + std::to_string(bypass_rows.rows()) +
                         " bypass rows for " + std::to_string(whitened.size()) + " images");
    const Shape3 in = whitened.images.front().image.shape();
    const std::size_t deep = net.deep_output_shape(in).size();
    const auto bl = static_cast<std::size_t>(bypass_rows.cols());
    FeatureMatrix fm;
    fm.features.resize(static_cast<Eigen::Index>(whitened.size()), static_cast<Eigen::Index>(deep + bl));
    fm.labels.reserve(whitened.size());
    for (std::size_t i = 0; i < whitened.size(); ++i) {
        const auto& li = whitened.images[i];
        if (li.image.shape() != in) throw ShapeError("extract_dataset: images differ in shape");
        const std::vector<double> d = deep_features(li.image, net);
        const auto ri = static_cast<Eigen::Index>(i);
        float* dst = fm.features.row(ri).data();
        for (std::size_t j = 0; j < deep; ++j) dst[j] = static_cast<float>(d[j]);
        for (std::size_t j = 0; j < bl; ++j)
            dst[deep + j] = static_cast<float>(bypass_rows(ri, static_cast<Eigen::Index>(j)));
        fm.labels.push_back(li.label);
    }
    return fm;
}

inline RowMatrix bypass_matrix(const Dataset& standardized, const NetworkSpec& net) {
    if (standardized.empty()) throw ArgumentError("bypass_matrix: empty dataset");
    const std::size_t len = net.bypass_length(standardized.images.front().image.shape());
    RowMatrix out(static_cast<Eigen::Index>(standardized.size()), static_cast<Eigen::Index>(len));
    for (std::size_t i = 0; i < standardized.size(); ++i) {
        const std::vector<double> b = bypass_features(standardized.images[i].image, net);
        if (b.size() != len) throw ShapeError("bypass_matrix: images differ in shape");
        std::copy(b.begin(), b.end(), out.row(static_cast<Eigen::Index>(i)).data());
    }
    return out;
}

inline FeatureMatrix extract_dataset(const Dataset& whitened, const Dataset& standardized,
                                     const NetworkSpec& net) {
    if (whitened.empty()) throw ArgumentError("extract_dataset: empty dataset");
    if (whitened.size() != standardized.size())
        throw ShapeError("extract_dataset: whitened and bypass datasets differ in length");
    return extract_dataset(whitened, bypass_matrix(standardized, net), net);
}

/// "RFCL-FT1", (rows, cols) u32 LE, row-major f32 LE values, then one label byte per row.
inline void save_features(const FeatureMatrix& fm, const std::string& path) {
    if (fm.labels.size() != fm.rows()) throw ShapeError("save_features: label count != rows");
    auto os = io::open_out(path);
    io::write_magic(os, "RFCL-FT1");
    io::write_u32(os, io::checked_u32(fm.rows(), "feature rows"));
    io::write_u32(os, io::checked_u32(fm.cols(), "feature cols"));
    for (Eigen::Index r = 0; r < fm.features.rows(); ++r)
        for (Eigen::Index c = 0; c < fm.features.cols(); ++c) io::write_f32(os, fm.features(r, c));
    os.write(reinterpret_cast<const char*>(fm.labels.data()), static_cast<std::streamsize>(fm.labels.size()));
    if (!os) throw FormatError("save_features: write failed for " + path);
}

inline FeatureMatrix load_features(const std::string& path) {
    auto is = io::open_in(path);
    io::expect_magic(is, "RFCL-FT1", path);
    const std::size_t rows = io::read_u32(is, path);
    const std::size_t cols = io::read_u32(is, path);
    FeatureMatrix fm;
    fm.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < fm.features.rows(); ++r)
        for (Eigen::Index c = 0; c < fm.features.cols(); ++c) fm.features(r, c) = io::read_f32(is, path);
    fm.labels.resize(rows);
    io::read_exact(is, reinterpret_cast<char*>(fm.labels.data()), rows, path);
    return fm;
}

}  // namespace rfcl
