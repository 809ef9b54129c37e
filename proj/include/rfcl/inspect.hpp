#pragma once

// Human-readable header summaries of persisted artifacts.

#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rfcl/binary_io.hpp"
#include "rfcl/data.hpp"
#include "rfcl/filter_bank.hpp"
#include "rfcl/receptive_fields.hpp"

namespace rfcl {

inline std::string inspect_artifact(const std::string& path) {
    if (!std::filesystem::exists(path)) throw FormatError(path + ": no such file");
    const auto bytes = std::filesystem::file_size(path);
    std::string head;
    {
        auto is = io::open_in(path);
        head.resize(16);
        is.read(head.data(), 16);
        head.resize(static_cast<std::size_t>(is.gcount()));
    }
    std::ostringstream os;
    auto is = io::open_in(path);
    if (head.starts_with("RFCL-ZCA1")) {
        is.ignore(9);
        const auto d = io::read_u32(is, path);
        os << "whitening transform: D=" << d << " (" << bytes << " bytes)";
    } else if (head.starts_with("RFCL-FB1")) {
        const auto h = read_filter_bank_header(is, path);
        os << "filter bank: kernels=" << h.count << " fanin=" << h.fanin << " size=" << h.size;
    } else if (head.starts_with("RFCL-FT1")) {
        is.ignore(8);
        const auto rows = io::read_u32(is, path);
        const auto cols = io::read_u32(is, path);
        os << "feature matrix: rows=" << rows << " cols=" << cols;
    } else if (head.starts_with("RFCL-MLP1")) {
        is.ignore(9);
        const auto d = io::read_u32(is, path);
        const auto h = io::read_u32(is, path);
        const auto c = io::read_u32(is, path);
        os << "mlp: input=" << d << " hidden=" << h << " classes=" << c;
    } else if (head.starts_with("strategy=")) {
        const ConnectionTable t = load_connection_table(path);
        os << "connection table: strategy=" << to_string(t.strategy) << " n1=" << t.n1
           << " groups=" << t.group_count() << " fanin=" << t.fanin();
    } else if (bytes > 0 && bytes % kRecordBytes == 0) {
        std::array<std::size_t, 256> hist{};
        std::vector<char> rec(kRecordBytes);
        const std::size_t n = bytes / kRecordBytes;
        for (std::size_t r = 0; r < n; ++r) {
            io::read_exact(is, rec.data(), kRecordBytes, path);
            ++hist[static_cast<unsigned char>(rec[0])];
        }
        os << "canonical dataset: records=" << n << " labels=[";
        for (std::size_t c = 0; c < kNumClasses; ++c) os << (c ? " " : "") << hist[c];
        os << "]";
    } else {
        throw FormatError(path + ": unrecognised artifact");
    }
    return os.str();
}

}  // namespace rfcl
