#pragma once

// Binary checkpoint container, all integers and reals little-endian:
//
//   char[4]  magic "PICI"
//   u32      format version
//   u64      config length, then that many bytes of key=value text
//   u32      array count
//   per array:
//     u32 name length, name bytes
//     u64 rows, u64 cols
//     rows*cols f64, row-major

#include "pici/core.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace pici {

inline constexpr std::uint32_t checkpoint_version = 1;

struct Checkpoint {
    std::string config_text;
    std::vector<std::pair<std::string, Mat>> arrays;

    const Mat* find(const std::string& name) const {
        for (const auto& [n, m] : arrays)
            if (n == name) return &m;
        return nullptr;
    }
};

namespace detail {

template <typename T>
void put_le(std::ostream& os, T value) {
    static_assert(std::is_integral_v<T>);
    unsigned char buf[sizeof(T)];
    auto u = static_cast<std::make_unsigned_t<T>>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf[i] = static_cast<unsigned char>(u & 0xFFu);
        u = static_cast<decltype(u)>(u >> 8);
    }
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
    unsigned char buf[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw CheckpointError("checkpoint truncated");
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = sizeof(T); i-- > 0;) u = static_cast<decltype(u)>((u << 8) | buf[i]);
    return static_cast<T>(u);
}

inline std::string get_bytes(std::istream& is, std::uint64_t n) {
    if (n > (1ULL << 32)) throw CheckpointError("checkpoint field too large");
    std::string s(static_cast<std::size_t>(n), '\0');
    if (n > 0 && !is.read(s.data(), static_cast<std::streamsize>(n))) throw CheckpointError("checkpoint truncated");
    return s;
}

}  // namespace detail

inline void write_checkpoint(const Checkpoint& ckpt, std::ostream& os) {
    os.write("PICI", 4);
    detail::put_le<std::uint32_t>(os, checkpoint_version);
    detail::put_le<std::uint64_t>(os, ckpt.config_text.size());
    os.write(ckpt.config_text.data(), static_cast<std::streamsize>(ckpt.config_text.size()));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.arrays.size()));
    for (const auto& [name, m] : ckpt.arrays) {
        detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
        detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.size(); ++i) detail::put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(m.data()[i]));
    }
}

inline Checkpoint read_checkpoint(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "PICI", 4) != 0) throw CheckpointError("not a PICI checkpoint");
    const auto version = detail::get_le<std::uint32_t>(is);
    if (version != checkpoint_version) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.config_text = detail::get_bytes(is, detail::get_le<std::uint64_t>(is));
    const auto count = detail::get_le<std::uint32_t>(is);
    for (std::uint32_t a = 0; a < count; ++a) {
        std::string name = detail::get_bytes(is, detail::get_le<std::uint32_t>(is));
        const auto rows = detail::get_le<std::uint64_t>(is);
        const auto cols = detail::get_le<std::uint64_t>(is);
        if (rows > (1ULL << 31) || cols > (1ULL << 31)) throw CheckpointError("implausible array shape for " + name);
        Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<double>(detail::get_le<std::uint64_t>(is));
        ckpt.arrays.emplace_back(std::move(name), std::move(m));
    }
    return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw CheckpointError("cannot open " + tmp.string() + " for writing");
        write_checkpoint(ckpt, os);
        if (!os) throw CheckpointError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
    return read_checkpoint(is);
}

}  // namespace pici
