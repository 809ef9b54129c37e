#pragma once

// Little-endian primitives shared by the artifact formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "rfcl/error.hpp"

namespace rfcl::io {

inline void write_magic(std::ostream& os, std::string_view magic) {
    os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFFu);
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFFu);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f64(std::ostream& os, double v) { write_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline void write_f32(std::ostream& os, float v) { write_u32(os, std::bit_cast<std::uint32_t>(v)); }

inline void read_exact(std::istream& is, char* dst, std::size_t n, const std::string& what) {
    is.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) throw FormatError("truncated " + what);
}

inline void expect_magic(std::istream& is, std::string_view magic, const std::string& what) {
    std::string got(magic.size(), '\0');
    is.read(got.data(), static_cast<std::streamsize>(magic.size()));
    if (static_cast<std::size_t>(is.gcount()) != magic.size() || got != magic)
        throw FormatError(what + ": bad magic, expected \"" + std::string(magic) + "\"");
}

inline std::uint32_t read_u32(std::istream& is, const std::string& what) {
    unsigned char b[4];
    read_exact(is, reinterpret_cast<char*>(b), 4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t read_u64(std::istream& is, const std::string& what) {
    unsigned char b[8];
    read_exact(is, reinterpret_cast<char*>(b), 8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline double read_f64(std::istream& is, const std::string& what) {
    return std::bit_cast<double>(read_u64(is, what));
}

inline float read_f32(std::istream& is, const std::string& what) {
    return std::bit_cast<float>(read_u32(is, what));
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open for writing: " + path);
    return os;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open for reading: " + path);
    return is;
}

inline std::uint32_t checked_u32(std::size_t v, const std::string& what) {
    if (v > 0xFFFFFFFFu) throw FormatError(what + " does not fit in 32 bits");
    return static_cast<std::uint32_t>(v);
}

}  // namespace rfcl::io
