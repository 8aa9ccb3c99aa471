#pragma once

// Test-only helpers: synthetic layers and independent reference oracles.
// Nothing here calls into the algorithm under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "axe/axe.hpp"

namespace axe::test {

using Rng = std::mt19937_64;

inline Eigen::MatrixXd gaussian(Rng& rng, Index rows, Index cols, double sigma = 1.0) {
    std::normal_distribution<double> n(0.0, sigma);
    Eigen::MatrixXd m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = n(rng);
    return m;
}

/// K x D activations whose input neurons follow an AR(1) chain with
/// correlation rho, shifted and passed through a ReLU when `relu`.
inline Eigen::MatrixXd correlated_activations(Rng& rng, Index K, Index D, double rho = 0.6, bool relu = false) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd X(K, D);
    const double innov = std::sqrt(1.0 - rho * rho);
    for (Index d = 0; d < D; ++d) {
        double prev = n(rng);
        for (Index k = 0; k < K; ++k) {
            prev = k == 0 ? prev : rho * prev + innov * n(rng);
            X(k, d) = relu ? std::max(0.0, prev + 0.3) : prev;
        }
    }
    return X;
}

struct SyntheticLayer {
    Eigen::MatrixXd W;   // K x C
    Eigen::MatrixXd X;   // K x D
    Eigen::MatrixXd Xq;  // K x D, dequantized activations
    AffineQuantizer act;
    std::vector<AffineQuantizer> wq;
};

inline SyntheticLayer make_layer(Rng& rng, Index K, Index C, Index D, int M, int N,
                                 RoundingMode rounding = RoundingMode::nearest(), double rho = 0.6) {
    SyntheticLayer L;
    L.W = gaussian(rng, K, C, 1.0 / std::sqrt(static_cast<double>(K)));
    L.X = correlated_activations(rng, K, D, rho);
    L.act = calibrate_activations(L.X, N, 100.0).quantizer;
    L.Xq = fake_quantize_matrix(L.act, L.X);
    for (Index c = 0; c < C; ++c)
        L.wq.emplace_back(compute_scale(L.W.col(c), Alphabet::make_signed(M)).scale, 0, Alphabet::make_signed(M),
                          rounding);
    return L;
}

// ---------------------------------------------------------------- oracles

/// l1 projection by golden-section search over lambda in [0, max|w|]
/// minimizing | |soft(w, lambda)|_1 - Z |.
inline Eigen::VectorXd projection_by_lambda_search(const Eigen::VectorXd& w, double Z, double* lambda_out = nullptr) {
    auto shrink = [&](double lam) {
        Eigen::VectorXd v(w.size());
        for (Index i = 0; i < w.size(); ++i) {
            const double m = std::abs(w[i]) - lam;
            v[i] = m > 0 ? (w[i] > 0 ? m : -m) : 0.0;
        }
        return v;
    };
    if (w.cwiseAbs().sum() <= Z) {
        if (lambda_out) *lambda_out = 0.0;
        return w;
    }
    auto gap = [&](double lam) { return std::abs(shrink(lam).cwiseAbs().sum() - Z); };
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 0.0, hi = w.cwiseAbs().maxCoeff();
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = gap(x1), f2 = gap(x2);
    for (int it = 0; it < 400 && hi - lo > 1e-16; ++it) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = gap(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = gap(x2);
        }
    }
    const double lam = 0.5 * (lo + hi);
    if (lambda_out) *lambda_out = lam;
    return shrink(lam);
}

/// Min and max of x^T q over every x in [lo, hi]^K by enumeration.
inline std::pair<std::int64_t, std::int64_t> enumerate_dot_range(const std::vector<std::int64_t>& q, std::int64_t lo,
                                                                 std::int64_t hi) {
    const std::size_t K = q.size();
    std::vector<std::int64_t> x(K, lo);
    std::int64_t mn = std::numeric_limits<std::int64_t>::max(), mx = std::numeric_limits<std::int64_t>::min();
    while (true) {
        std::int64_t dot = 0;
        for (std::size_t i = 0; i < K; ++i) dot += x[i] * q[i];
        mn = std::min(mn, dot);
        mx = std::max(mx, dot);
        std::size_t i = 0;
        while (i < K && x[i] == hi) x[i++] = lo;
        if (i == K) break;
        ++x[i];
    }
    return {mn, mx};
}

/// Smallest sign-magnitude width holding both values, floor 2.
inline int sign_magnitude_bits(std::int64_t mn, std::int64_t mx) {
    const std::int64_t m = std::max(std::abs(mn), std::abs(mx));
    int P = 2;
    while (m > (std::int64_t{1} << (P - 1)) - 1) ++P;
    return P;
}

/// GPFQ in its argmin form: q_i minimizes |sum_{j<=i} w_j X_j - sum_{j<i} q_j Xq_j - p Xq_i|
/// over the alphabet, with s p as the dequantized value. No budget.
inline std::vector<std::int64_t> gpfq_by_argmin(const Eigen::VectorXd& w, const Eigen::MatrixXd& X,
                                                const Eigen::MatrixXd& Xq, double s, const Alphabet& alpha) {
    const Index K = w.size();
    std::vector<std::int64_t> q(static_cast<std::size_t>(K), 0);
    for (Index i = 0; i < K; ++i) {
        Eigen::VectorXd target = Eigen::VectorXd::Zero(X.cols());
        for (Index j = 0; j <= i; ++j) target += w[j] * X.row(j).transpose();
        for (Index j = 0; j < i; ++j) target -= s * static_cast<double>(q[static_cast<std::size_t>(j)]) * Xq.row(j).transpose();
        double best = std::numeric_limits<double>::infinity();
        for (std::int64_t p = alpha.lo; p <= alpha.hi; ++p) {
            const double d = (target - s * static_cast<double>(p) * Xq.row(i).transpose()).squaredNorm();
            if (d < best) {
                best = d;
                q[static_cast<std::size_t>(i)] = p;
            }
        }
    }
    return q;
}

/// OPTQ via explicit inverse-Hessian downdates (Schur complements) instead
/// of a Cholesky factor. Processes inputs in `order`. The optional budget
/// soft-thresholds by lambda and clips to the running limits [A + alpha, B - beta].
inline std::vector<std::int64_t> optq_by_schur(const Eigen::VectorXd& w, const Eigen::MatrixXd& Xq, double s,
                                               const Alphabet& alpha, const std::vector<Index>& order,
                                               double A = -std::numeric_limits<double>::infinity(),
                                               double B = std::numeric_limits<double>::infinity(),
                                               double lambda = 0.0) {
    const Index K = w.size();
    Eigen::MatrixXd H = 2.0 * Xq * Xq.transpose();
    const double eta = 0.01 * H.diagonal().mean();
    H.diagonal().array() += eta;
    Eigen::MatrixXd Hinv = H.inverse();
    Eigen::VectorXd work = w / s;
    std::vector<std::int64_t> q(static_cast<std::size_t>(K), 0);
    std::vector<bool> done(static_cast<std::size_t>(K), false);
    double neg = 0.0, pos = 0.0;
    for (Index idx : order) {
        double v = std::copysign(std::max(std::abs(work[idx]) - lambda, 0.0), work[idx]);
        v = std::clamp(v, std::min(A + neg, 0.0), std::max(B - pos, 0.0));
        const double r = std::round(v);
        const auto code = static_cast<std::int64_t>(std::clamp<double>(r, static_cast<double>(alpha.lo), static_cast<double>(alpha.hi)));
        q[static_cast<std::size_t>(idx)] = code;
        if (code > 0) pos += static_cast<double>(code);
        else neg -= static_cast<double>(code);
        done[static_cast<std::size_t>(idx)] = true;
        const double e = (work[idx] - static_cast<double>(code)) / Hinv(idx, idx);
        for (Index j = 0; j < K; ++j)
            if (!done[static_cast<std::size_t>(j)]) work[j] -= e * Hinv(j, idx);
        const Eigen::VectorXd col = Hinv.col(idx);
        Hinv -= col * col.transpose() / col[idx];
    }
    return q;
}

/// Sum of positive codes and magnitude of the sum of negative codes of q
/// over the given positions.
inline std::pair<std::int64_t, std::int64_t> signed_sums(const CodeVector& q, const std::vector<Index>& positions) {
    std::int64_t pos = 0, neg = 0;
    for (Index i : positions) {
        if (q[i] > 0) pos += q[i];
        else neg -= q[i];
    }
    return {pos, neg};
}

}  // namespace axe::test
