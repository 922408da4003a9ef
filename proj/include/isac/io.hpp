// SPDX-License-Identifier: Apache-2.0
//
// Binary tensor files: a 16-byte header (magic, dim0, dim1, dim2 as
// little-endian uint32) followed by row-major interleaved little-endian
// float64 (re, im) pairs. Used for echo cubes (N_r, N_s, L), transmit tensors
// (N_t, N_s, L) and radar cubes (N_a, N_d, N_v).

#ifndef ISAC_IO_HPP
#define ISAC_IO_HPP

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "isac/core.hpp"

namespace isac::io {

inline constexpr std::uint32_t kTensorMagic = 0x43415349;  // "ISAC" on disk

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error("tensor file: truncated header");
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

}  // namespace detail

inline void write_tensor(std::ostream& os, const CTensor& t) {
    for (auto d : t.dims())
        if (d > std::numeric_limits<std::uint32_t>::max()) throw Error("tensor file: dimension too large");
    detail::put_u32(os, kTensorMagic);
    for (auto d : t.dims()) detail::put_u32(os, static_cast<std::uint32_t>(d));
    std::vector<unsigned char> buf;
    buf.reserve(1 << 16);
    auto flush = [&] {
        os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        buf.clear();
    };
    for (const auto& v : t.flat()) {
        for (double part : {v.real(), v.imag()}) {
            const auto bits = std::bit_cast<std::uint64_t>(part);
            for (int k = 0; k < 8; ++k) buf.push_back(static_cast<unsigned char>(bits >> (8 * k)));
        }
        if (buf.size() >= (1 << 16) - 16) flush();
    }
    flush();
    if (!os) throw Error("tensor file: write failed");
}

inline CTensor read_tensor(std::istream& is) {
    if (detail::get_u32(is) != kTensorMagic) throw Error("tensor file: bad magic");
    const std::size_t d0 = detail::get_u32(is), d1 = detail::get_u32(is), d2 = detail::get_u32(is);
    CTensor t(d0, d1, d2);
    std::vector<unsigned char> buf(16 * t.size());
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
        throw Error("tensor file: truncated payload");
    auto word = [&](std::size_t pos) {
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(buf[pos + k]) << (8 * k);
        return std::bit_cast<double>(bits);
    };
    for (std::size_t p = 0; p < t.size(); ++p) t.flat()[p] = {word(16 * p), word(16 * p + 8)};
    return t;
}

inline void save_tensor(const std::string& path, const CTensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path + " for writing");
    write_tensor(os, t);
}

inline CTensor load_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path);
    return read_tensor(is);
}

}  // namespace isac::io

#endif  // ISAC_IO_HPP
