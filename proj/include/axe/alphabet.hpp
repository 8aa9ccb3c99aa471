#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace axe {

/// Signed integer encoding used for codes and for accumulator registers.
enum class IntRepr {
    sign_magnitude,  ///< symmetric: [-(2^(b-1) - 1), 2^(b-1) - 1]
    twos_complement  ///< one extra negative value: [-2^(b-1), 2^(b-1) - 1]
};

inline const char* to_string(IntRepr r) {
    return r == IntRepr::sign_magnitude ? "sign-magnitude" : "twos-complement";
}

inline IntRepr int_repr_from_string(const std::string& s) {
    if (s == "sign-magnitude") return IntRepr::sign_magnitude;
    if (s == "twos-complement") return IntRepr::twos_complement;
    throw std::invalid_argument("unknown integer representation '" + s + "'");
}

/// A contiguous set of integer codes [lo, hi] representable at `bits` bits.
/// Zero is always a member.
struct Alphabet {
    int bits = 8;
    bool is_signed = false;
    std::int64_t lo = 0;
    std::int64_t hi = 255;

    static Alphabet make_signed(int bits, IntRepr repr = IntRepr::sign_magnitude) {
        check_bits(bits);
        const std::int64_t half = std::int64_t{1} << (bits - 1);
        return {bits, true, repr == IntRepr::sign_magnitude ? -(half - 1) : -half, half - 1};
    }

    static Alphabet make_unsigned(int bits) {
        check_bits(bits);
        return {bits, false, 0, (std::int64_t{1} << bits) - 1};
    }

    bool contains(std::int64_t code) const noexcept { return code >= lo && code <= hi; }

    /// Number of distinct codes minus one, i.e. hi - lo.
    std::int64_t span() const noexcept { return hi - lo; }

    friend bool operator==(const Alphabet&, const Alphabet&) = default;

private:
    static void check_bits(int bits) {
        if (bits < 1 || bits > 30)
            throw std::invalid_argument("alphabet bit width must lie in [1, 30], got " +
                                        std::to_string(bits));
    }
};

}  // namespace axe
