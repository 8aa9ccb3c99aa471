#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "axe/alphabet.hpp"
#include "axe/detail/bigint.hpp"
#include "axe/error.hpp"
#include "axe/quantizer.hpp"

namespace axe {

/// Data-type bound on the accumulator width for a K-deep dot product of
/// M-bit weights and N-bit activations:
///
///   P* = ceil(log2(2^(log2 K + N + M - 1 - signed) + 1) + 1)
///
/// 2^(log2 K + e) is K * 2^e, so the whole expression reduces to
/// ceil_log2(K * 2^e + 1) + 1 and is evaluated on exact integers.
inline int min_accumulator_bits(std::int64_t K, int M, int N, bool signed_acts) {
    if (K < 1 || M < 1 || N < 1)
        throw std::invalid_argument("min_accumulator_bits: K, M and N must be >= 1");
    const int e = N + M - 1 - (signed_acts ? 1 : 0);
    const BigInt inner = BigInt(K) * detail::pow2(static_cast<unsigned>(e)) + 1;
    return static_cast<int>(detail::ceil_log2(inner)) + 1;
}

/// l1 cap (2^P - 2) / (2^N - 1) on integer weight codes for a P-bit
/// accumulator, valid for zero-centered codes.
inline double l1_budget(int P, int N) {
    if (P < 2 || N < 1 || P > 62 || N > 30) throw std::invalid_argument("l1_budget: need 2 <= P <= 62, 1 <= N <= 30");
    return static_cast<double>((std::int64_t{1} << P) - 2) / static_cast<double>((std::int64_t{1} << N) - 1);
}

struct StrictLimits {
    double neg;  ///< A: lower cap on the running sum of negative codes
    double pos;  ///< B: upper cap on the running sum of positive codes
};

/// Greedy limits B = (2^(P-1) - 1) / (2^N - 1) - slack and A = -B.
///
/// A two's-complement register holds one more negative value, so A widens to
/// -(2^(P-1) / (2^N - 1) - slack).
inline StrictLimits strict_limits(int P, int N, double slack, IntRepr acc = IntRepr::sign_magnitude) {
    if (P < 2 || N < 1 || P > 62 || N > 30) throw std::invalid_argument("strict_limits: need 2 <= P <= 62, 1 <= N <= 30");
    if (slack < 0.0) throw std::invalid_argument("strict_limits: slack must be nonnegative");
    const double denom = static_cast<double>((std::int64_t{1} << N) - 1);
    const double half = static_cast<double>(std::int64_t{1} << (P - 1));
    const double pos = (half - 1.0) / denom - slack;
    if (pos <= 0.0)
        throw InfeasibleBudget("infeasible budget: P=" + std::to_string(P) + ", N=" + std::to_string(N) +
                               " leaves no room for a nonzero weight (B=" + std::to_string(pos) + ")");
    const double neg = acc == IntRepr::sign_magnitude ? -pos : -(half / denom - slack);
    return {neg, pos};
}

/// Outer accumulator width ceil(P_I + log2 K - log2 T) for K-deep dot
/// products split into T-wide tiles, each fitting a P_I-bit register.
inline int outer_accumulator_bits(int P_I, std::int64_t K, std::int64_t T) {
    if (T < 1 || T > K) throw std::invalid_argument("outer_accumulator_bits: need 1 <= T <= K");
    // ceil(log2(K / T)) is the smallest c with T * 2^c >= K.
    unsigned c = 0;
    while (BigInt(T) * detail::pow2(c) < BigInt(K)) ++c;
    return P_I + static_cast<int>(c);
}

/// Everything the accumulator-aware algorithms need to know about the target
/// register: its width, optional tiling, the accumulated activation codes and
/// the rounding slack.
struct AccumulatorBudget {
    int p_bits = 32;
    std::optional<std::int64_t> tile;
    Alphabet act_alphabet = Alphabet::make_unsigned(8);
    double slack = 0.5;
    double limit_neg = 0.0;
    double limit_pos = 0.0;
    double soft_budget = 0.0;
    IntRepr accumulator = IntRepr::sign_magnitude;

    /// Throws InfeasibleBudget when B <= 0.
    static AccumulatorBudget make(int p_bits, const Alphabet& act_alphabet, double slack,
                                  std::optional<std::int64_t> tile = std::nullopt,
                                  IntRepr accumulator = IntRepr::sign_magnitude) {
        if (tile && *tile < 1) throw std::invalid_argument("tile size must be >= 1");
        AccumulatorBudget b;
        b.p_bits = p_bits;
        b.tile = tile;
        b.act_alphabet = act_alphabet;
        b.slack = slack;
        b.accumulator = accumulator;
        const auto lim = strict_limits(p_bits, act_alphabet.bits, slack, accumulator);
        b.limit_neg = lim.neg;
        b.limit_pos = lim.pos;
        b.soft_budget = l1_budget(p_bits, act_alphabet.bits);
        return b;
    }

    static AccumulatorBudget make(int p_bits, const Alphabet& act_alphabet, RoundingMode rounding,
                                  std::optional<std::int64_t> tile = std::nullopt,
                                  IntRepr accumulator = IntRepr::sign_magnitude) {
        return make(p_bits, act_alphabet, rounding.slack(), tile, accumulator);
    }

    /// Register description only, for checking codes produced elsewhere.
    /// Limits are left at zero and feasibility is not required.
    static AccumulatorBudget register_only(int p_bits, const Alphabet& act_alphabet,
                                           std::optional<std::int64_t> tile = std::nullopt,
                                           IntRepr accumulator = IntRepr::sign_magnitude) {
        if (p_bits < 2 || p_bits > 62) throw std::invalid_argument("accumulator width must lie in [2, 62]");
        if (tile && *tile < 1) throw std::invalid_argument("tile size must be >= 1");
        AccumulatorBudget b;
        b.p_bits = p_bits;
        b.tile = tile;
        b.act_alphabet = act_alphabet;
        b.slack = 0.0;
        b.accumulator = accumulator;
        b.soft_budget = l1_budget(p_bits, act_alphabet.bits);
        return b;
    }

    /// Length of the accumulation unit: the tile, or the whole dot product.
    std::int64_t unit_length(std::int64_t K) const { return tile ? std::min(*tile, K) : K; }

    /// Largest l1 radius that keeps both the positive and the negative code
    /// sums within the register without any zero-centering: (2^(P-1) - 1) / (2^N - 1).
    double projection_radius() const {
        return static_cast<double>((std::int64_t{1} << (p_bits - 1)) - 1) /
               static_cast<double>((std::int64_t{1} << act_alphabet.bits) - 1);
    }
};

}  // namespace axe
