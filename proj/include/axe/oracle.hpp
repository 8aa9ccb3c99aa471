#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "axe/alphabet.hpp"
#include "axe/bounds.hpp"
#include "axe/detail/bigint.hpp"
#include "axe/projection.hpp"
#include "axe/types.hpp"

namespace axe {

/// Activation codes driving x^T q to its maximum (u) and minimum (v).
/// u_i = hi where q_i >= 0 and lo otherwise; v is the mirror image.
struct ExtremeInputs {
    std::vector<std::int64_t> u;
    std::vector<std::int64_t> v;
};

inline ExtremeInputs extreme_inputs(const Eigen::Ref<const CodeVector>& q, const Alphabet& act) {
    ExtremeInputs e;
    e.u.resize(static_cast<std::size_t>(q.size()));
    e.v.resize(static_cast<std::size_t>(q.size()));
    for (Index i = 0; i < q.size(); ++i) {
        const bool nonneg = q[i] >= 0;
        e.u[static_cast<std::size_t>(i)] = nonneg ? act.hi : act.lo;
        e.v[static_cast<std::size_t>(i)] = nonneg ? act.lo : act.hi;
    }
    return e;
}

struct DotRange {
    BigInt max;
    BigInt min;
};

/// Exact extremes of x^T q over the activation box, for the given positions
/// of q (all when `positions` is empty).
inline DotRange extreme_dots(const Eigen::Ref<const CodeVector>& q, const Alphabet& act,
                             std::span<const Index> positions = {}) {
    DotRange r{0, 0};
    auto add = [&](Index i) {
        const BigInt qi = q[i];
        const BigInt a = qi * act.lo;
        const BigInt b = qi * act.hi;
        r.max += std::max(a, b);
        r.min += std::min(a, b);
    };
    if (positions.empty())
        for (Index i = 0; i < q.size(); ++i) add(i);
    else
        for (Index i : positions) add(i);
    return r;
}

/// Largest positive and most negative value of a P-bit signed register.
inline BigInt register_max(int P) { return detail::pow2(static_cast<unsigned>(P - 1)) - 1; }
inline BigInt register_min(int P, IntRepr repr) {
    return repr == IntRepr::sign_magnitude ? -register_max(P) : -detail::pow2(static_cast<unsigned>(P - 1));
}

inline bool fits(const BigInt& value, int P, IntRepr repr) {
    return value <= register_max(P) && value >= register_min(P, repr);
}

/// Smallest P >= 2 whose register holds both extremes.
inline int required_bits(const DotRange& r, IntRepr repr = IntRepr::sign_magnitude) {
    int P = 2;
    while (!(fits(r.max, P, repr) && fits(r.min, P, repr))) ++P;
    return P;
}

/// Minimal signed sign-magnitude width holding x^T q for every x in the
/// activation box. Exact, because the extremes of a linear form over a box
/// sit at its corners.
inline int brute_force_min_bits(const Eigen::Ref<const CodeVector>& q, const Alphabet& act) {
    return required_bits(extreme_dots(q, act));
}

struct CertificateUnit {
    Index channel = 0;
    Index tile = 0;
    BigInt max_dot = 0;
    BigInt min_dot = 0;
    int required_bits = 2;
    bool pass = false;
};

/// Per-channel (and per-tile) proof that extreme dot products fit the budget.
/// When tiled, `outer` checks each whole channel against the outer width.
struct OverflowCertificate {
    std::vector<CertificateUnit> per_unit;
    AccumulatorBudget budget;
    std::optional<Permutation> perm;
    std::optional<int> outer_bits;
    std::vector<CertificateUnit> outer;

    bool pass() const {
        auto ok = [](const CertificateUnit& u) { return u.pass; };
        return std::all_of(per_unit.begin(), per_unit.end(), ok) && std::all_of(outer.begin(), outer.end(), ok);
    }

    std::size_t failures() const {
        auto bad = [](const CertificateUnit& u) { return !u.pass; };
        return static_cast<std::size_t>(std::count_if(per_unit.begin(), per_unit.end(), bad) +
                                        std::count_if(outer.begin(), outer.end(), bad));
    }
};

/// Check every channel of Q (K x C) against the budget using exact integer
/// arithmetic. Tiles are contiguous runs of `perm` (natural order when absent).
inline OverflowCertificate verify(const Eigen::Ref<const CodeMatrix>& Q, const AccumulatorBudget& budget,
                                  const std::optional<Permutation>& perm = std::nullopt) {
    const Index K = Q.rows();
    OverflowCertificate cert;
    cert.budget = budget;
    cert.perm = perm;
    const Permutation order = perm ? *perm : identity_permutation(K);
    if (static_cast<Index>(order.size()) != K) throw std::invalid_argument("verify: permutation length mismatch");

    const TileLayout tiles(K, budget.tile);
    const bool tiled = budget.tile.has_value() && tiles.count() > 0;
    if (tiled) cert.outer_bits = outer_accumulator_bits(budget.p_bits, K, tiles.tile);

    for (Index c = 0; c < Q.cols(); ++c) {
        const CodeVector q = Q.col(c);
        for (Index t = 0; t < tiles.count(); ++t) {
            const std::span<const Index> pos(order.data() + tiles.begin(t),
                                             static_cast<std::size_t>(tiles.end(t) - tiles.begin(t)));
            const DotRange r = extreme_dots(q, budget.act_alphabet, pos);
            cert.per_unit.push_back({c, t, r.max, r.min, required_bits(r, budget.accumulator),
                                     fits(r.max, budget.p_bits, budget.accumulator) &&
                                         fits(r.min, budget.p_bits, budget.accumulator)});
        }
        if (tiled) {
            const DotRange r = extreme_dots(q, budget.act_alphabet);
            cert.outer.push_back({c, 0, r.max, r.min, required_bits(r, budget.accumulator),
                                  fits(r.max, *cert.outer_bits, budget.accumulator) &&
                                      fits(r.min, *cert.outer_bits, budget.accumulator)});
        }
    }
    return cert;
}

enum class OverflowSemantics { wraparound, saturate, exact };

struct AccumulateResult {
    BigInt value;
    bool overflow = false;  ///< some prefix sum left the register range
};

/// Sequential multiply-accumulate into a simulated P-bit register.
///
/// wraparound: two's-complement modular arithmetic. saturate: clamp each
/// prefix to the register range. exact: unbounded value plus the flag.
inline AccumulateResult simulate_accumulate(const Eigen::Ref<const CodeVector>& q,
                                            std::span<const std::int64_t> x, int P, OverflowSemantics semantics,
                                            IntRepr repr = IntRepr::sign_magnitude) {
    if (static_cast<std::size_t>(q.size()) != x.size()) throw std::invalid_argument("simulate_accumulate: length mismatch");
    if (P < 2) throw std::invalid_argument("simulate_accumulate: P must be >= 2");
    const BigInt hi = register_max(P);
    const BigInt lo = semantics == OverflowSemantics::wraparound ? register_min(P, IntRepr::twos_complement)
                                                                 : register_min(P, repr);
    const BigInt modulus = detail::pow2(static_cast<unsigned>(P));
    AccumulateResult r{0, false};
    for (Index i = 0; i < q.size(); ++i) {
        r.value += BigInt(q[i]) * x[static_cast<std::size_t>(i)];
        if (r.value > hi || r.value < lo) {
            r.overflow = true;
            switch (semantics) {
                case OverflowSemantics::wraparound:
                    r.value = ((r.value - lo) % modulus + modulus) % modulus + lo;
                    break;
                case OverflowSemantics::saturate:
                    r.value = r.value > hi ? hi : lo;
                    break;
                case OverflowSemantics::exact:
                    break;
            }
        }
    }
    return r;
}

}  // namespace axe
