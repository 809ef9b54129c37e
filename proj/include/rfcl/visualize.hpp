#pragma once

// Filter-bank tiling into a binary PGM for visual inspection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rfcl/binary_io.hpp"
#include "rfcl/filter_bank.hpp"

namespace rfcl {

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major

    [[nodiscard]] std::uint8_t at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
};

/// One cell per (kernel, input channel), each min-max scaled to [0,255]
/// (a constant cell is 128), on a near-square grid with 1-pixel black
/// separators between cells.
inline GrayImage tile_filters(const FilterBank& fb) {
    fb.validate();
    const std::size_t cells = fb.count() * fb.fanin;
    if (cells == 0 || fb.size == 0) return {};
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(cells))));
    const std::size_t rows = (cells + cols - 1) / cols;
    const std::size_t s = fb.size;
    GrayImage img;
    img.width = cols * s + (cols - 1);
    img.height = rows * s + (rows - 1);
    img.pixels.assign(img.width * img.height, 0);
    std::size_t cell = 0;
    for (const auto& f : fb.filters) {
        for (std::size_t ch = 0; ch < fb.fanin; ++ch, ++cell) {
            const auto first = f.kernel.weights.begin() + static_cast<std::ptrdiff_t>(ch * s * s);
            const auto [lo, hi] = std::minmax_element(first, first + static_cast<std::ptrdiff_t>(s * s));
            const double mn = *lo, mx = *hi;
            const std::size_t r0 = (cell / cols) * (s + 1);
            const std::size_t c0 = (cell % cols) * (s + 1);
            for (std::size_t u = 0; u < s; ++u) {
                for (std::size_t v = 0; v < s; ++v) {
                    const double w = f.kernel.at(ch, u, v);
                    const double g = mx > mn ? std::round((w - mn) / (mx - mn) * 255.0) : 128.0;
                    img.pixels[(r0 + u) * img.width + c0 + v] = static_cast<std::uint8_t>(g);
                }
            }
        }
    }
    return img;
}

inline void write_pgm(const GrayImage& img, const std::string& path) {
    auto os = io::open_out(path);
    os << "P5\n" << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!os) throw FormatError("write_pgm: write failed for " + path);
}

inline GrayImage read_pgm(const std::string& path) {
    auto is = io::open_in(path);
    std::string magic;
    std::size_t maxval = 0;
    GrayImage img;
    is >> magic >> img.width >> img.height >> maxval;
    if (!is || magic != "P5" || maxval != 255) throw FormatError(path + ": not an 8-bit binary PGM");
    is.get();
    img.pixels.resize(img.width * img.height);
    io::read_exact(is, reinterpret_cast<char*>(img.pixels.data()), img.pixels.size(), path);
    return img;
}

/// Reads a persisted filter bank and writes its tiling as PGM.
inline GrayImage export_filters(const std::string& filterbank_path, const std::string& pgm_path) {
    const GrayImage img = tile_filters(load_filter_bank(filterbank_path));
    write_pgm(img, pgm_path);
    return img;
}

}  // namespace rfcl
