#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "axe/bounds.hpp"
#include "axe/quantizer.hpp"
#include "axe/types.hpp"

namespace axe {

/// Soft threshold sign(x) * max(|x| - lambda, 0).
inline double soft_threshold(double x, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("soft_threshold: lambda must be nonnegative");
    const double m = std::abs(x) - lambda;
    return m > 0.0 ? std::copysign(m, x) : 0.0;
}

/// clip(x; a, b).
inline double range_clip(double x, double a, double b) {
    if (a > b) throw std::invalid_argument("range_clip: empty range (a > b)");
    return std::min(std::max(x, a), b);
}

struct ProjectionResult {
    Eigen::VectorXd projected;
    double lambda = 0.0;
    Index support = 0;          ///< number of nonzero entries in `projected`
    Eigen::VectorXd sorted_mags; ///< |w| sorted descending (stable in index)
};

/// Euclidean projection of w onto the l1 ball of radius Z.
///
/// Sort-based: with mu = |w| sorted descending, rho is the largest j such that
/// mu_j - (sum_{i<=j} mu_i - Z) / j > 0 and lambda = (sum_{i<=rho} mu_i - Z) / rho.
/// Z = 0 collapses everything and reports lambda = max|w|.
inline ProjectionResult l1_project(const Eigen::Ref<const Eigen::VectorXd>& w, double Z) {
    if (Z < 0.0) throw std::invalid_argument("l1_project: radius must be nonnegative");
    if (!w.allFinite()) throw std::domain_error("l1_project: non-finite input");

    const Index n = w.size();
    ProjectionResult r;
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(w[a]) > std::abs(w[b]); });
    r.sorted_mags.resize(n);
    for (Index i = 0; i < n; ++i) r.sorted_mags[i] = std::abs(w[order[static_cast<std::size_t>(i)]]);

    const double l1 = r.sorted_mags.sum();
    if (l1 <= Z) {
        r.projected = w;
        r.lambda = 0.0;
        r.support = (w.array() != 0.0).count();
        return r;
    }
    if (Z == 0.0) {
        r.projected = Eigen::VectorXd::Zero(n);
        r.lambda = n > 0 ? r.sorted_mags[0] : 0.0;
        r.support = 0;
        return r;
    }

    double cumsum = 0.0;
    double best_cumsum = 0.0;
    Index rho = 0;
    for (Index j = 0; j < n; ++j) {
        cumsum += r.sorted_mags[j];
        if (r.sorted_mags[j] - (cumsum - Z) / static_cast<double>(j + 1) > 0.0) {
            rho = j + 1;
            best_cumsum = cumsum;
        }
    }
    r.lambda = std::max(0.0, (best_cumsum - Z) / static_cast<double>(rho));
    r.projected = w.unaryExpr([&](double x) { return soft_threshold(x, r.lambda); });
    r.support = (r.projected.array() != 0.0).count();
    return r;
}

/// Contiguous runs of the processing order that share one accumulator.
struct TileLayout {
    Index length = 0;  ///< K
    Index tile = 0;    ///< T (== K when untiled)

    TileLayout(Index K, const std::optional<std::int64_t>& T)
        : length(K), tile(T ? std::min<Index>(static_cast<Index>(*T), std::max<Index>(K, 1)) : std::max<Index>(K, 1)) {}

    Index count() const { return length == 0 ? 0 : (length + tile - 1) / tile; }
    Index begin(Index t) const { return t * tile; }
    Index end(Index t) const { return std::min(length, (t + 1) * tile); }
    Index of(Index position) const { return position / tile; }
};

/// Euclidean-projection initialization: per channel (and per tile), project
/// the code-unit weights w / s onto the l1 ball of radius
/// budget.projection_radius(), then round toward zero. The returned codes
/// satisfy sum|q| <= (2^(P-1) - 1) / (2^N - 1) for every accumulation unit.
///
/// `order` lists input indices in accumulation order (natural when empty);
/// tiles are contiguous runs of that order.
inline CodeMatrix ep_init(const Eigen::Ref<const Eigen::MatrixXd>& W, std::span<const AffineQuantizer> quantizers,
                          const AccumulatorBudget& budget, const Permutation& order = {}) {
    const Index K = W.rows();
    const Index C = W.cols();
    if (static_cast<Index>(quantizers.size()) != C)
        throw std::invalid_argument("ep_init: need one quantizer per output channel");
    const Permutation perm = order.empty() ? identity_permutation(K) : order;
    if (static_cast<Index>(perm.size()) != K) throw std::invalid_argument("ep_init: order length mismatch");

    const TileLayout tiles(K, budget.tile);
    const double radius = budget.projection_radius();
    CodeMatrix Q = CodeMatrix::Zero(K, C);
    for (Index c = 0; c < C; ++c) {
        const AffineQuantizer& wq = quantizers[static_cast<std::size_t>(c)];
        if (wq.zero_point() != 0) throw std::invalid_argument("ep_init: weight quantizers must be symmetric");
        const AffineQuantizer rtz(wq.scale(), 0, wq.alphabet(), RoundingMode::to_zero());
        for (Index t = 0; t < tiles.count(); ++t) {
            const Index b = tiles.begin(t);
            const Index len = tiles.end(t) - b;
            Eigen::VectorXd v(len);
            for (Index j = 0; j < len; ++j) v[j] = W(perm[static_cast<std::size_t>(b + j)], c) / wq.scale();
            const Eigen::VectorXd p = l1_project(v, radius).projected;
            for (Index j = 0; j < len; ++j)
                Q(perm[static_cast<std::size_t>(b + j)], c) = static_cast<std::int32_t>(rtz.round_to_code(p[j]));
        }
    }
    return Q;
}

}  // namespace axe
