#pragma once

#include <cstdint>

#include <boost/multiprecision/cpp_int.hpp>

namespace axe {

using BigInt = boost::multiprecision::cpp_int;

namespace detail {

inline BigInt pow2(unsigned e) { return BigInt(1) << e; }

/// Smallest c >= 0 with 2^c >= x, for x >= 1.
inline unsigned ceil_log2(const BigInt& x) {
    unsigned c = 0;
    while (pow2(c) < x) ++c;
    return c;
}

}  // namespace detail
}  // namespace axe
