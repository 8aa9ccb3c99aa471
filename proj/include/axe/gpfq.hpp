#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "axe/bounds.hpp"
#include "axe/constraint.hpp"
#include "axe/detail/parallel.hpp"
#include "axe/quantizer.hpp"
#include "axe/types.hpp"

namespace axe {

/// Float and quantized calibration samples for one layer, laid out for the
/// greedy sweep: column i of `x` and `xq` holds the D samples of input
/// neuron i.
class GpfqOperands {
public:
    GpfqOperands(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::MatrixXd>& Xq)
        : x_(X.transpose()), xq_(Xq.transpose()) {
        if (X.rows() != Xq.rows() || X.cols() != Xq.cols())
            throw std::invalid_argument("gpfq: X and Xq must have the same shape");
        norm2_ = xq_.colwise().squaredNorm().transpose();
        cross_ = (xq_.cwiseProduct(x_)).colwise().sum().transpose();
        const double top = norm2_.size() ? norm2_.maxCoeff() : 0.0;
        zero_tol_ = top * 1e-12;
    }

    Index inputs() const { return x_.cols(); }
    Index samples() const { return x_.rows(); }

    /// Rows of Xq with (numerically) zero norm carry no information.
    bool dead(Index i) const { return norm2_[i] <= zero_tol_; }

    const Eigen::MatrixXd& x() const { return x_; }
    const Eigen::MatrixXd& xq() const { return xq_; }
    double norm2(Index i) const { return norm2_[i]; }
    double cross(Index i) const { return cross_[i]; }

private:
    Eigen::MatrixXd x_;
    Eigen::MatrixXd xq_;
    Eigen::VectorXd norm2_;
    Eigen::VectorXd cross_;
    double zero_tol_ = 0.0;
};

/// Per-step record of a greedy sweep, for audits and tests.
struct GpfqTrace {
    std::vector<double> argument;  ///< code-unit quantizer argument after projection and clipping
    std::vector<double> raw;       ///< code-unit argument before projection and clipping
};

namespace detail {

inline CodeVector gpfq_sweep(const GpfqOperands& ops, const Eigen::Ref<const Eigen::VectorXd>& w,
                             const AffineQuantizer& quantizer, const AccumulatorBudget* budget, bool soft,
                             GpfqTrace* trace) {
    const Index K = ops.inputs();
    if (w.size() != K) throw std::invalid_argument("gpfq: weight length does not match calibration rows");
    const double s = quantizer.scale();

    GreedyConstraint constraint(budget, soft, K);
    constraint.derive_thresholds(w / s);

    CodeVector q = CodeVector::Zero(K);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(ops.samples());
    if (trace) {
        trace->argument.assign(static_cast<std::size_t>(K), 0.0);
        trace->raw.assign(static_cast<std::size_t>(K), 0.0);
    }
    for (Index i = 0; i < K; ++i) {
        constraint.enter(i);
        if (ops.dead(i)) {
            u.noalias() += w[i] * ops.x().col(i);
            continue;
        }
        const double raw = (w[i] * ops.cross(i) + ops.xq().col(i).dot(u)) / ops.norm2(i) / s;
        const double arg = constraint.constrain(raw);
        const std::int64_t code = quantizer.round_to_code(arg);
        constraint.consume(code);
        q[i] = static_cast<std::int32_t>(code);
        u.noalias() += w[i] * ops.x().col(i) - (s * static_cast<double>(code)) * ops.xq().col(i);
        if (trace) {
            trace->raw[static_cast<std::size_t>(i)] = raw;
            trace->argument[static_cast<std::size_t>(i)] = arg;
        }
    }
    return q;
}

}  // namespace detail

/// Standard GPFQ for one output channel. X and Xq are K x D.
///
/// For i = 1..K: q_i = Q(<Xq_i, u + w_i X_i> / |Xq_i|^2) and
/// u += w_i X_i - s q_i Xq_i. A dead input (|Xq_i| = 0) gets code 0.
inline CodeVector gpfq_channel(const Eigen::Ref<const Eigen::VectorXd>& w, const Eigen::Ref<const Eigen::MatrixXd>& X,
                               const Eigen::Ref<const Eigen::MatrixXd>& Xq, const AffineQuantizer& quantizer,
                               GpfqTrace* trace = nullptr) {
    return detail::gpfq_sweep(GpfqOperands(X, Xq), w, quantizer, nullptr, false, trace);
}

/// Accumulator-aware GPFQ for one output channel: the quantizer argument is
/// soft-thresholded (when `soft`) and clipped to the remaining budget
/// [a, b] before rounding. Xq must hold quantized activations.
inline CodeVector gpfq_axe_channel(const Eigen::Ref<const Eigen::VectorXd>& w,
                                   const Eigen::Ref<const Eigen::MatrixXd>& X,
                                   const Eigen::Ref<const Eigen::MatrixXd>& Xq, const AffineQuantizer& quantizer,
                                   const AccumulatorBudget& budget, bool soft, GpfqTrace* trace = nullptr) {
    return detail::gpfq_sweep(GpfqOperands(X, Xq), w, quantizer, &budget, soft, trace);
}

/// GPFQ over every column of W (K x C). Channels are independent, so
/// `workers` only changes wall time, never the result.
inline CodeMatrix gpfq_layer(const Eigen::Ref<const Eigen::MatrixXd>& W, const GpfqOperands& ops,
                             std::span<const AffineQuantizer> quantizers, const AccumulatorBudget* budget = nullptr,
                             bool soft = false, int workers = 1) {
    if (static_cast<Index>(quantizers.size()) != W.cols())
        throw std::invalid_argument("gpfq_layer: need one quantizer per output channel");
    CodeMatrix Q(W.rows(), W.cols());
    detail::parallel_for(W.cols(), workers, [&](Index c) {
        Q.col(c) = detail::gpfq_sweep(ops, W.col(c), quantizers[static_cast<std::size_t>(c)], budget, soft, nullptr);
    });
    return Q;
}

/// Square operands for GPFQ: H = (Xq Xq^T)^(1/2) and G H^+ with G = X Xq^T.
/// Running GPFQ on (G H^+, H) yields the same codes as on (X, Xq) while
/// storing O(K^2) values instead of O(D (2K + C)).
struct MemoryEfficientOperands {
    Eigen::MatrixXd H;
    Eigen::MatrixXd GHinv;
    Index null_dim = 0;  ///< eigenvalues of Xq Xq^T treated as zero
};

/// Accumulates Xq Xq^T and X Xq^T one block of samples at a time.
class GramAccumulator {
public:
    explicit GramAccumulator(Index K) : xqxq_(Eigen::MatrixXd::Zero(K, K)), xxq_(Eigen::MatrixXd::Zero(K, K)) {}

    /// X and Xq are K x d blocks of d samples.
    void add(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::MatrixXd>& Xq) {
        if (X.rows() != xqxq_.rows() || Xq.rows() != xqxq_.rows() || X.cols() != Xq.cols())
            throw std::invalid_argument("GramAccumulator::add: shape mismatch");
        xqxq_.noalias() += Xq * Xq.transpose();
        xxq_.noalias() += X * Xq.transpose();
        samples_ += X.cols();
    }

    Index samples() const { return samples_; }

    /// Symmetric square root via eigendecomposition; eigenvalues below
    /// rel_tol * max are treated as zero and inverted as zero.
    MemoryEfficientOperands finish(double rel_tol = 1e-12) const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(xqxq_);
        if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of Xq Xq^T failed", -1);
        const Eigen::VectorXd& ev = eig.eigenvalues();
        const double top = ev.size() ? std::max(ev.maxCoeff(), 0.0) : 0.0;
        Eigen::VectorXd root(ev.size()), inv_root(ev.size());
        MemoryEfficientOperands out;
        for (Index i = 0; i < ev.size(); ++i) {
            if (ev[i] > rel_tol * top && ev[i] > 0.0) {
                root[i] = std::sqrt(ev[i]);
                inv_root[i] = 1.0 / root[i];
            } else {
                root[i] = 0.0;
                inv_root[i] = 0.0;
                ++out.null_dim;
            }
        }
        const Eigen::MatrixXd& V = eig.eigenvectors();
        out.H = V * root.asDiagonal() * V.transpose();
        out.H = 0.5 * (out.H + out.H.transpose());
        out.GHinv = xxq_ * (V * inv_root.asDiagonal() * V.transpose());
        return out;
    }

private:
    Eigen::MatrixXd xqxq_;
    Eigen::MatrixXd xxq_;
    Index samples_ = 0;
};

inline MemoryEfficientOperands gpfq_memory_efficient_precompute(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                                                const Eigen::Ref<const Eigen::MatrixXd>& Xq) {
    if (X.rows() != Xq.rows() || X.cols() != Xq.cols())
        throw std::invalid_argument("gpfq_memory_efficient_precompute: X and Xq must have the same shape");
    GramAccumulator acc(X.rows());
    acc.add(X, Xq);
    return acc.finish();
}

inline GpfqOperands to_operands(const MemoryEfficientOperands& me) { return GpfqOperands(me.GHinv, me.H); }

/// Reals held by the standard sweep: X, Xq and the per-sample error U.
constexpr std::int64_t gpfq_standard_footprint(std::int64_t K, std::int64_t D, std::int64_t C) {
    return D * (2 * K + C);
}

/// Reals held by the memory-efficient sweep: G H^+, H and a K-long error per channel.
constexpr std::int64_t gpfq_memory_efficient_footprint(std::int64_t K, std::int64_t C) {
    return 2 * K * K + K * C;
}

}  // namespace axe
