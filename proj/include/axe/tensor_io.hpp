#pragma once

// AXT tensor files:
//
//   "AXT1" | u32 rank | u64 dims[rank] | u8 dtype | row-major payload
//
// All integers little-endian. dtype codes: 1 = f32, 2 = f64, 3 = i32, 4 = i8.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "axe/error.hpp"
#include "axe/types.hpp"

namespace axe {

enum class DType : std::uint8_t { f32 = 1, f64 = 2, i32 = 3, i8 = 4 };

inline std::size_t dtype_size(DType t) {
    switch (t) {
        case DType::f32: return 4;
        case DType::f64: return 8;
        case DType::i32: return 4;
        case DType::i8: return 1;
    }
    return 0;
}

/// Dense row-major tensor; values are widened to double in memory.
struct Tensor {
    std::vector<std::uint64_t> shape;
    DType dtype = DType::f64;
    std::vector<double> values;

    std::uint64_t elements() const {
        std::uint64_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }
};

namespace detail {

constexpr std::array<char, 4> kAxtMagic{'A', 'X', 'T', '1'};
constexpr std::uint32_t kAxtMaxRank = 8;

template <typename T>
void put_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& is, const char* what) {
    std::array<unsigned char, sizeof(T)> bytes;
    if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
        throw FormatError(FormatError::Kind::truncated, std::string("AXT: truncated ") + what);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

}  // namespace detail

inline void write_axt(std::ostream& os, const Tensor& t) {
    if (t.shape.size() > detail::kAxtMaxRank) throw std::invalid_argument("AXT: rank above 8");
    if (t.values.size() != t.elements()) throw std::invalid_argument("AXT: value count does not match shape");
    os.write(detail::kAxtMagic.data(), 4);
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) detail::put_le<std::uint64_t>(os, d);
    detail::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.dtype));
    for (double v : t.values) {
        switch (t.dtype) {
            case DType::f32: detail::put_le<float>(os, static_cast<float>(v)); break;
            case DType::f64: detail::put_le<double>(os, v); break;
            case DType::i32: detail::put_le<std::int32_t>(os, static_cast<std::int32_t>(v)); break;
            case DType::i8: detail::put_le<std::int8_t>(os, static_cast<std::int8_t>(v)); break;
        }
    }
    if (!os) throw FormatError(FormatError::Kind::io, "AXT: write failed");
}

inline Tensor read_axt(std::istream& is) {
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), 4)) throw FormatError(FormatError::Kind::truncated, "AXT: truncated magic");
    if (magic != detail::kAxtMagic) throw FormatError(FormatError::Kind::bad_magic, "AXT: bad magic (expected \"AXT1\")");

    Tensor t;
    const auto rank = detail::get_le<std::uint32_t>(is, "rank");
    if (rank > detail::kAxtMaxRank)
        throw FormatError(FormatError::Kind::bad_rank, "AXT: rank " + std::to_string(rank) + " exceeds 8");
    t.shape.resize(rank);
    std::uint64_t count = 1;
    for (auto& d : t.shape) {
        d = detail::get_le<std::uint64_t>(is, "dims");
        if (d != 0 && count > (std::uint64_t{1} << 40) / d)
            throw FormatError(FormatError::Kind::bad_rank, "AXT: tensor too large");
        count *= d;
    }
    const auto code = detail::get_le<std::uint8_t>(is, "dtype");
    if (code < 1 || code > 4) throw FormatError(FormatError::Kind::bad_dtype, "AXT: unknown dtype code " + std::to_string(code));
    t.dtype = static_cast<DType>(code);

    t.values.resize(count);
    for (auto& v : t.values) {
        switch (t.dtype) {
            case DType::f32: v = detail::get_le<float>(is, "payload"); break;
            case DType::f64: v = detail::get_le<double>(is, "payload"); break;
            case DType::i32: v = detail::get_le<std::int32_t>(is, "payload"); break;
            case DType::i8: v = detail::get_le<std::int8_t>(is, "payload"); break;
        }
    }
    if (is.peek() != std::char_traits<char>::eof())
        throw FormatError(FormatError::Kind::trailing, "AXT: trailing bytes after payload");
    return t;
}

inline void write_axt(const std::string& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError(FormatError::Kind::io, "AXT: cannot open '" + path + "' for writing");
    write_axt(os, t);
}

inline Tensor read_axt(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError(FormatError::Kind::io, "AXT: cannot open '" + path + "'");
    try {
        return read_axt(is);
    } catch (const FormatError& e) {
        throw FormatError(e.kind(), path + ": " + e.what());
    }
}

inline Tensor to_tensor(const Eigen::Ref<const Eigen::MatrixXd>& m, DType dtype = DType::f64) {
    Tensor t;
    t.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    t.dtype = dtype;
    t.values.reserve(static_cast<std::size_t>(m.size()));
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) t.values.push_back(m(r, c));
    return t;
}

inline Tensor to_tensor(const Eigen::Ref<const CodeMatrix>& q) { return to_tensor(q.cast<double>(), DType::i32); }

/// Rank-2 tensors map directly; rank 1 becomes a column.
inline Eigen::MatrixXd to_matrix(const Tensor& t) {
    if (t.shape.empty() || t.shape.size() > 2)
        throw FormatError(FormatError::Kind::bad_rank, "expected a rank-1 or rank-2 tensor, got rank " +
                                                           std::to_string(t.shape.size()));
    const auto rows = static_cast<Index>(t.shape[0]);
    const auto cols = t.shape.size() == 2 ? static_cast<Index>(t.shape[1]) : Index{1};
    Eigen::MatrixXd m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) m(r, c) = t.values[static_cast<std::size_t>(r * cols + c)];
    return m;
}

inline CodeMatrix to_codes(const Tensor& t) {
    const Eigen::MatrixXd m = to_matrix(t);
    if (!(m.array() == m.array().round()).all()) throw std::invalid_argument("code tensor holds non-integer values");
    return m.cast<std::int32_t>();
}

}  // namespace axe
