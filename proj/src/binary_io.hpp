#pragma once

// Little-endian primitives shared by the model and dump formats.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "facerec/error.hpp"

namespace facerec::binary {

template <typename U>
void put_le(std::ostream& out, U value) {
    char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
    }
    out.write(bytes, sizeof(U));
}

template <typename U>
U get_le(std::istream& in, const char* what) {
    unsigned char bytes[sizeof(U)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
        throw ParseError(std::string("unexpected end of data reading ") + what);
    }
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
    return value;
}

inline void put_u8(std::ostream& out, std::uint8_t v) { put_le<std::uint8_t>(out, v); }
inline void put_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
inline void put_u64(std::ostream& out, std::uint64_t v) { put_le(out, v); }
inline void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint8_t get_u8(std::istream& in, const char* what) {
    return get_le<std::uint8_t>(in, what);
}
inline std::uint32_t get_u32(std::istream& in, const char* what) {
    return get_le<std::uint32_t>(in, what);
}
inline std::uint64_t get_u64(std::istream& in, const char* what) {
    return get_le<std::uint64_t>(in, what);
}
inline float get_f32(std::istream& in, const char* what) {
    return std::bit_cast<float>(get_le<std::uint32_t>(in, what));
}
inline double get_f64(std::istream& in, const char* what) {
    return std::bit_cast<double>(get_le<std::uint64_t>(in, what));
}

inline void put_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char (&magic)[5], const char* what) {
    char got[4] = {};
    if (!in.read(got, 4) || std::string(got, 4) != std::string(magic, 4)) {
        throw ParseError(std::string(what) + ": bad magic, expected '" + magic + "'");
    }
}

}  // namespace facerec::binary
