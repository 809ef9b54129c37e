#pragma once

// Dense channel-major tensors and the three layer kernels: valid
// cross-correlation over a channel selection, spatial max pooling,
// thresholding, plus mean subsampling for the color bypass.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rfcl/error.hpp"

namespace rfcl {

struct Shape3 {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    [[nodiscard]] std::size_t size() const { return channels * height * width; }
    friend bool operator==(const Shape3&, const Shape3&) = default;
};

inline std::string to_string(const Shape3& s) {
    return "(" + std::to_string(s.channels) + "," + std::to_string(s.height) + "," +
           std::to_string(s.width) + ")";
}

/// Channels x height x width, row-major within a channel, channel-major overall.
class Tensor3 {
public:
    Tensor3() = default;

    Tensor3(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0)
        : shape_{channels, height, width}, data_(channels * height * width, fill) {}

    Tensor3(Shape3 shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
        if (data_.size() != shape_.size())
            throw ShapeError("Tensor3: data length " + std::to_string(data_.size()) +
                             " does not match shape " + to_string(shape_));
    }

    [[nodiscard]] const Shape3& shape() const { return shape_; }
    [[nodiscard]] std::size_t channels() const { return shape_.channels; }
    [[nodiscard]] std::size_t height() const { return shape_.height; }
    [[nodiscard]] std::size_t width() const { return shape_.width; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] std::size_t plane() const { return shape_.height * shape_.width; }

    double& operator()(std::size_t c, std::size_t r, std::size_t col) {
        return data_[(c * shape_.height + r) * shape_.width + col];
    }
    double operator()(std::size_t c, std::size_t r, std::size_t col) const {
        return data_[(c * shape_.height + r) * shape_.width + col];
    }

    [[nodiscard]] std::span<double> channel(std::size_t c) {
        return {data_.data() + c * plane(), plane()};
    }
    [[nodiscard]] std::span<const double> channel(std::size_t c) const {
        return {data_.data() + c * plane(), plane()};
    }

    [[nodiscard]] std::span<double> data() { return data_; }
    [[nodiscard]] std::span<const double> data() const { return data_; }
    [[nodiscard]] const std::vector<double>& values() const { return data_; }

    [[nodiscard]] bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Tensor3&, const Tensor3&) = default;

private:
    Shape3 shape_{};
    std::vector<double> data_;
};

/// A square convolution kernel reading `fanin` input channels; weights are
/// laid out fanin x size x size, the same layout as an extracted patch.
struct Kernel {
    std::size_t fanin = 0;
    std::size_t size = 0;
    std::vector<double> weights;

    Kernel() = default;
    Kernel(std::size_t fanin_, std::size_t size_, std::vector<double> w)
        : fanin(fanin_), size(size_), weights(std::move(w)) {
        if (weights.size() != fanin * size * size)
            throw ShapeError("Kernel: weights length " + std::to_string(weights.size()) +
                             " != fanin*size^2 = " + std::to_string(fanin * size * size));
    }

    [[nodiscard]] double at(std::size_t i, std::size_t u, std::size_t v) const {
        return weights[(i * size + u) * size + v];
    }

    friend bool operator==(const Kernel&, const Kernel&) = default;
};

namespace detail {

inline void check_selection(const Tensor3& input, const Kernel& kernel,
                            std::span<const std::size_t> selection) {
    if (selection.size() != kernel.fanin)
        throw ShapeError("conv2d_valid: channel selection has " + std::to_string(selection.size()) +
                         " entries but kernel fanin is " + std::to_string(kernel.fanin));
    for (std::size_t ch : selection)
        if (ch >= input.channels())
            throw ShapeError("conv2d_valid: channel index " + std::to_string(ch) +
                             " out of range for input with " + std::to_string(input.channels()) +
                             " channels");
    if (kernel.size == 0) throw ShapeError("conv2d_valid: kernel size is 0");
    if (kernel.size > input.height())
        throw ShapeError("conv2d_valid: kernel size " + std::to_string(kernel.size) +
                         " exceeds input height " + std::to_string(input.height()));
    if (kernel.size > input.width())
        throw ShapeError("conv2d_valid: kernel size " + std::to_string(kernel.size) +
                         " exceeds input width " + std::to_string(input.width()));
}

inline void check_window(const Tensor3& input, std::size_t window, std::size_t stride,
                         const char* op) {
    if (window == 0) throw ShapeError(std::string(op) + ": window must be >= 1");
    if (stride == 0) throw ShapeError(std::string(op) + ": stride must be >= 1");
    if (window > input.height())
        throw ShapeError(std::string(op) + ": window " + std::to_string(window) +
                         " exceeds input height " + std::to_string(input.height()));
    if (window > input.width())
        throw ShapeError(std::string(op) + ": window " + std::to_string(window) +
                         " exceeds input width " + std::to_string(input.width()));
}

}  // namespace detail

/// Writes the valid cross-correlation of the selected channels with `kernel`
/// into `out` (length (H-size+1)*(W-size+1)). Each output accumulates its
/// terms in (channel, kernel row, kernel col) order starting from zero.
inline void conv2d_valid_into(const Tensor3& input, const Kernel& kernel,
                              std::span<const std::size_t> selection, std::span<double> out) {
    detail::check_selection(input, kernel, selection);
    const std::size_t oh = input.height() - kernel.size + 1;
    const std::size_t ow = input.width() - kernel.size + 1;
    if (out.size() != oh * ow)
        throw ShapeError("conv2d_valid: output buffer length " + std::to_string(out.size()) +
                         " != " + std::to_string(oh * ow));
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t w = input.width();
    for (std::size_t i = 0; i < kernel.fanin; ++i) {
        const std::span<const double> src = input.channel(selection[i]);
        for (std::size_t u = 0; u < kernel.size; ++u) {
            for (std::size_t v = 0; v < kernel.size; ++v) {
                const double k = kernel.at(i, u, v);
                for (std::size_t r = 0; r < oh; ++r) {
                    const double* in_row = src.data() + (r + u) * w + v;
                    double* out_row = out.data() + r * ow;
                    for (std::size_t c = 0; c < ow; ++c) out_row[c] += k * in_row[c];
                }
            }
        }
    }
}

/// Valid-mode cross-correlation (no kernel flip); returns a single-channel map.
inline Tensor3 conv2d_valid(const Tensor3& input, const Kernel& kernel,
                            std::span<const std::size_t> selection) {
    detail::check_selection(input, kernel, selection);
    Tensor3 out(1, input.height() - kernel.size + 1, input.width() - kernel.size + 1);
    conv2d_valid_into(input, kernel, selection, out.data());
    return out;
}

inline std::size_t pooled_extent(std::size_t dim, std::size_t window, std::size_t stride) {
    return (dim - window) / stride + 1;
}

/// Per-channel max over window x window patches; partial windows are dropped.
inline Tensor3 maxpool2d(const Tensor3& input, std::size_t window, std::size_t stride) {
    detail::check_window(input, window, stride, "maxpool2d");
    const std::size_t oh = pooled_extent(input.height(), window, stride);
    const std::size_t ow = pooled_extent(input.width(), window, stride);
    Tensor3 out(input.channels(), oh, ow);
    for (std::size_t ch = 0; ch < input.channels(); ++ch) {
        for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t c = 0; c < ow; ++c) {
                double m = input(ch, r * stride, c * stride);
                for (std::size_t u = 0; u < window; ++u)
                    for (std::size_t v = 0; v < window; ++v)
                        m = std::max(m, input(ch, r * stride + u, c * stride + v));
                out(ch, r, c) = m;
            }
        }
    }
    return out;
}

inline Tensor3 threshold(const Tensor3& input, double theta) {
    std::vector<double> v(input.values());
    for (double& x : v) x = std::max(x, theta);
    return Tensor3(input.shape(), std::move(v));
}

/// Per-channel arithmetic mean over window x window patches (row-major sum,
/// then one division).
inline Tensor3 subsample(const Tensor3& input, std::size_t window, std::size_t stride) {
    detail::check_window(input, window, stride, "subsample");
    const std::size_t oh = pooled_extent(input.height(), window, stride);
    const std::size_t ow = pooled_extent(input.width(), window, stride);
    const double count = static_cast<double>(window * window);
    Tensor3 out(input.channels(), oh, ow);
    for (std::size_t ch = 0; ch < input.channels(); ++ch) {
        for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t c = 0; c < ow; ++c) {
                double s = 0.0;
                for (std::size_t u = 0; u < window; ++u)
                    for (std::size_t v = 0; v < window; ++v)
                        s += input(ch, r * stride + u, c * stride + v);
                out(ch, r, c) = s / count;
            }
        }
    }
    return out;
}

}  // namespace rfcl
