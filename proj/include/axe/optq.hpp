#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "axe/bounds.hpp"
#include "axe/constraint.hpp"
#include "axe/detail/parallel.hpp"
#include "axe/error.hpp"
#include "axe/quantizer.hpp"
#include "axe/types.hpp"

namespace axe {

/// Upper-triangular U with A = U^T U. Throws NumericalError naming the
/// first non-positive pivot.
inline Eigen::MatrixXd cholesky_upper(const Eigen::Ref<const Eigen::MatrixXd>& A) {
    const Index n = A.rows();
    if (A.cols() != n) throw std::invalid_argument("cholesky_upper: matrix must be square");
    Eigen::MatrixXd U = Eigen::MatrixXd::Zero(n, n);
    for (Index j = 0; j < n; ++j) {
        const double d = A(j, j) - U.col(j).head(j).squaredNorm();
        if (!(d > 0.0) || !std::isfinite(d))
            throw NumericalError("Cholesky factorization failed: non-positive pivot " + std::to_string(d) +
                                     " at index " + std::to_string(j),
                                 static_cast<long>(j));
        const double r = std::sqrt(d);
        U(j, j) = r;
        for (Index k = j + 1; k < n; ++k) U(j, k) = (A(j, k) - U.col(j).head(j).dot(U.col(k).head(j))) / r;
    }
    return U;
}

/// Inverse-Hessian factor for OPTQ, expressed in processing order.
struct HessianFactor {
    Eigen::MatrixXd hinv_chol;  ///< upper Cholesky factor of (2 Xq Xq^T + eta I)^-1, permuted
    Permutation perm;           ///< position -> input index, descending proxy diagonal
    double eta = 0.0;           ///< dampening, 1% of the mean proxy diagonal
};

/// Build 2 Xq Xq^T, order inputs by descending diagonal (stable), damp,
/// invert and factor. Xq is K x D.
inline HessianFactor optq_prepare(const Eigen::Ref<const Eigen::MatrixXd>& Xq, double damp_fraction = 0.01) {
    const Index K = Xq.rows();
    if (K < 1) throw std::invalid_argument("optq_prepare: need at least one input");
    const Eigen::MatrixXd proxy = 2.0 * Xq * Xq.transpose();

    HessianFactor f;
    f.eta = damp_fraction * proxy.diagonal().mean();
    f.perm = identity_permutation(K);
    std::stable_sort(f.perm.begin(), f.perm.end(),
                     [&](Index a, Index b) { return proxy(a, a) > proxy(b, b); });

    Eigen::MatrixXd damped(K, K);
    for (Index i = 0; i < K; ++i)
        for (Index j = 0; j < K; ++j)
            damped(i, j) = proxy(f.perm[static_cast<std::size_t>(i)], f.perm[static_cast<std::size_t>(j)]);
    damped.diagonal().array() += f.eta;

    Eigen::MatrixXd U;
    try {
        U = cholesky_upper(damped);
    } catch (const NumericalError& e) {
        const auto input = f.perm[static_cast<std::size_t>(e.pivot())];
        throw NumericalError(std::string("damped Hessian proxy is singular (input ") + std::to_string(input) +
                                 "): " + e.what(),
                             static_cast<long>(input));
    }
    const Eigen::MatrixXd Uinv = U.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(K, K));
    Eigen::MatrixXd inverse = Uinv * Uinv.transpose();
    inverse = 0.5 * (inverse + inverse.transpose());
    f.hinv_chol = cholesky_upper(inverse);
    return f;
}

struct OptqTrace {
    std::vector<double> argument;       ///< adjusted code-unit weight when it was quantized
    std::vector<double> final_weights;  ///< working weights after the sweep
};

namespace detail {

inline CodeVector optq_sweep(const Eigen::Ref<const Eigen::VectorXd>& w, const HessianFactor& f,
                             const AffineQuantizer& quantizer, const AccumulatorBudget* budget, bool soft,
                             OptqTrace* trace) {
    const Index K = w.size();
    const Eigen::MatrixXd& U = f.hinv_chol;
    Eigen::VectorXd work(K);
    for (Index i = 0; i < K; ++i) work[i] = w[f.perm[static_cast<std::size_t>(i)]] / quantizer.scale();

    GreedyConstraint constraint(budget, soft, K);
    constraint.derive_thresholds(work);

    CodeVector q = CodeVector::Zero(K);
    if (trace) trace->argument.assign(static_cast<std::size_t>(K), 0.0);
    for (Index i = 0; i < K; ++i) {
        constraint.enter(i);
        const std::int64_t code = quantizer.round_to_code(constraint.constrain(work[i]));
        constraint.consume(code);
        q[f.perm[static_cast<std::size_t>(i)]] = static_cast<std::int32_t>(code);
        if (trace) trace->argument[static_cast<std::size_t>(i)] = work[i];
        // Error against the unprojected weight, spread over the remaining inputs.
        const double err = (work[i] - static_cast<double>(code)) / U(i, i);
        work.tail(K - i - 1).noalias() -= err * U.row(i).tail(K - i - 1).transpose();
    }
    if (trace) trace->final_weights.assign(work.data(), work.data() + K);
    return q;
}

}  // namespace detail

/// OPTQ over every column of W (K x C), optionally accumulator-aware.
/// Budgets and thresholds follow the factor's processing order; tiles are
/// contiguous runs of that order. Codes are returned in input order.
inline CodeMatrix optq_quantize_layer(const Eigen::Ref<const Eigen::MatrixXd>& W, const HessianFactor& factor,
                                      std::span<const AffineQuantizer> quantizers,
                                      const AccumulatorBudget* budget = nullptr, bool soft = false, int workers = 1) {
    const Index K = W.rows();
    if (factor.hinv_chol.rows() != K || static_cast<Index>(factor.perm.size()) != K)
        throw std::invalid_argument("optq_quantize_layer: factor does not match weight rows");
    if (static_cast<Index>(quantizers.size()) != W.cols())
        throw std::invalid_argument("optq_quantize_layer: need one quantizer per output channel");
    CodeMatrix Q(K, W.cols());
    detail::parallel_for(W.cols(), workers, [&](Index c) {
        Q.col(c) = detail::optq_sweep(W.col(c), factor, quantizers[static_cast<std::size_t>(c)], budget, soft, nullptr);
    });
    return Q;
}

/// Single-channel entry point, mainly for tests.
inline CodeVector optq_channel(const Eigen::Ref<const Eigen::VectorXd>& w, const HessianFactor& factor,
                               const AffineQuantizer& quantizer, const AccumulatorBudget* budget = nullptr,
                               bool soft = false, OptqTrace* trace = nullptr) {
    if (w.size() != factor.hinv_chol.rows()) throw std::invalid_argument("optq_channel: size mismatch");
    return detail::optq_sweep(w, factor, quantizer, budget, soft, trace);
}

}  // namespace axe
