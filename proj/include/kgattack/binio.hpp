#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "kgattack/linalg.hpp"
#include "kgattack/types.hpp"

namespace kgattack::binio {

inline void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_f64(std::ostream& out, std::span<const double> v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}
inline void write_mat(std::ostream& out, const Mat& m) {
    write_u64(out, static_cast<std::uint64_t>(m.rows));
    write_u64(out, static_cast<std::uint64_t>(m.cols));
    write_f64(out, m.a);
}

inline std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw Error("truncated binary file");
    return v;
}
inline std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw Error("truncated binary file");
    return v;
}
inline void read_f64(std::istream& in, std::span<double> v) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw Error("truncated binary file");
}
inline Mat read_mat(std::istream& in) {
    auto rows = read_u64(in);
    auto cols = read_u64(in);
    if (rows > (1u << 26) || cols > (1u << 26)) throw Error("corrupt matrix header");
    Mat m(static_cast<int>(rows), static_cast<int>(cols));
    read_f64(in, m.a);
    return m;
}

}  // namespace kgattack::binio
