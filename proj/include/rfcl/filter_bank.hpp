#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rfcl/binary_io.hpp"
#include "rfcl/error.hpp"
#include "rfcl/tensor.hpp"

namespace rfcl {

/// A kernel together with the input channels it reads (its receptive field).
struct Filter {
    Kernel kernel;
    std::vector<std::size_t> channels;

    friend bool operator==(const Filter&, const Filter&) = default;
};

/// Filters sharing one fanin and kernel size.
struct FilterBank {
    std::size_t fanin = 0;
    std::size_t size = 0;
    std::vector<Filter> filters;

    [[nodiscard]] std::size_t count() const { return filters.size(); }

    void validate() const {
        for (std::size_t i = 0; i < filters.size(); ++i) {
            const auto& f = filters[i];
            if (f.kernel.fanin != fanin || f.kernel.size != size ||
                f.kernel.weights.size() != fanin * size * size)
                throw ShapeError("FilterBank: filter " + std::to_string(i) +
                                 " does not match bank fanin/size");
            if (f.channels.size() != fanin)
                throw ShapeError("FilterBank: filter " + std::to_string(i) + " selects " +
                                 std::to_string(f.channels.size()) + " channels, fanin is " +
                                 std::to_string(fanin));
        }
    }

    friend bool operator==(const FilterBank&, const FilterBank&) = default;
};

/// "RFCL-FB1", (num_kernels, fanin, size) u32 LE, then per kernel its channel
/// indices (u32 LE) and fanin*size^2 f64 LE weights.
inline void save_filter_bank(const FilterBank& fb, const std::string& path) {
    fb.validate();
    auto os = io::open_out(path);
    io::write_magic(os, "RFCL-FB1");
    io::write_u32(os, io::checked_u32(fb.count(), "kernel count"));
    io::write_u32(os, io::checked_u32(fb.fanin, "fanin"));
    io::write_u32(os, io::checked_u32(fb.size, "kernel size"));
    for (const auto& f : fb.filters) {
        for (std::size_t ch : f.channels) io::write_u32(os, io::checked_u32(ch, "channel index"));
        for (double w : f.kernel.weights) io::write_f64(os, w);
    }
    if (!os) throw FormatError("save_filter_bank: write failed for " + path);
}

struct FilterBankHeader {
    std::size_t count = 0;
    std::size_t fanin = 0;
    std::size_t size = 0;
};

inline FilterBankHeader read_filter_bank_header(std::istream& is, const std::string& what) {
    io::expect_magic(is, "RFCL-FB1", what);
    FilterBankHeader h;
    h.count = io::read_u32(is, what);
    h.fanin = io::read_u32(is, what);
    h.size = io::read_u32(is, what);
    return h;
}

inline FilterBank load_filter_bank(const std::string& path) {
    auto is = io::open_in(path);
    const auto h = read_filter_bank_header(is, path);
    FilterBank fb;
    fb.fanin = h.fanin;
    fb.size = h.size;
    fb.filters.reserve(h.count);
    for (std::size_t k = 0; k < h.count; ++k) {
        Filter f;
        f.channels.resize(h.fanin);
        for (auto& ch : f.channels) ch = io::read_u32(is, path);
        std::vector<double> w(h.fanin * h.size * h.size);
        for (double& x : w) x = io::read_f64(is, path);
        f.kernel = Kernel(h.fanin, h.size, std::move(w));
        fb.filters.push_back(std::move(f));
    }
    return fb;
}

}  // namespace rfcl
