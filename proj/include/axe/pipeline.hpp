#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "axe/bounds.hpp"
#include "axe/gpfq.hpp"
#include "axe/optq.hpp"
#include "axe/oracle.hpp"
#include "axe/projection.hpp"
#include "axe/quantizer.hpp"
#include "axe/types.hpp"

namespace axe {

enum class Algorithm { gpfq, optq };
enum class Variant { base, ep_init, axe };

inline const char* to_string(Algorithm a) { return a == Algorithm::gpfq ? "gpfq" : "optq"; }
inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::base: return "base";
        case Variant::ep_init: return "ep-init";
        case Variant::axe: return "axe";
    }
    return "?";
}

inline Algorithm algorithm_from_string(const std::string& s) {
    if (s == "gpfq") return Algorithm::gpfq;
    if (s == "optq") return Algorithm::optq;
    throw std::invalid_argument("unknown algorithm '" + s + "'");
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "base") return Variant::base;
    if (s == "ep-init") return Variant::ep_init;
    if (s == "axe") return Variant::axe;
    throw std::invalid_argument("unknown variant '" + s + "'");
}

struct QuantConfig {
    int weight_bits = 4;
    int act_bits = 8;
    std::optional<int> acc_bits;  ///< absent: unconstrained
    std::optional<std::int64_t> tile;
    Algorithm algorithm = Algorithm::gpfq;
    Variant variant = Variant::axe;
    RoundingKind rounding = RoundingKind::nearest;
    bool soft_constraint = true;
    double percentile = 99.0;
    IntRepr accumulator = IntRepr::sign_magnitude;
    bool memory_efficient = false;  ///< GPFQ on the square (G H^+, H) operands
    int workers = 1;                ///< channel-level threads; never changes results

    void validate(bool sweep_mode = false) const {
        auto fail = [](const std::string& m) { throw std::invalid_argument("invalid config: " + m); };
        if (weight_bits < 2 || weight_bits > 16) fail("weight_bits must lie in [2, 16]");
        if (act_bits < 1 || act_bits > 16) fail("act_bits must lie in [1, 16]");
        if (sweep_mode && (weight_bits < 3 || weight_bits > 8 || act_bits < weight_bits || act_bits > 8))
            fail("sweep cells need 3 <= M <= N <= 8");
        if (acc_bits && (*acc_bits < 2 || *acc_bits > 62)) fail("acc_bits must lie in [2, 62]");
        if (tile && *tile < 1) fail("tile must be >= 1");
        if (variant != Variant::base && !acc_bits) fail("variant '" + std::string(to_string(variant)) + "' needs acc_bits");
        if (!(percentile > 0.0 && percentile <= 100.0)) fail("percentile must lie in (0, 100]");
        if (workers < 1) fail("workers must be >= 1");
        if (memory_efficient && algorithm != Algorithm::gpfq) fail("memory_efficient applies to gpfq only");
    }
};

struct LayerJob {
    Eigen::MatrixXd weights;      ///< K x C
    Eigen::MatrixXd calib_float;  ///< K x D
    QuantConfig config;
};

struct LayerReport {
    double recon_error = 0.0;
    double sparsity = 0.0;
    std::optional<OverflowCertificate> certificate;
    QuantConfig config;
    std::vector<Index> degenerate_channels;
    std::vector<std::string> notes;

    /// False only when a certificate exists and fails.
    bool pass() const { return !certificate || certificate->pass(); }
};

struct LayerResult {
    CodeMatrix codes;
    Eigen::VectorXd scales;
    AffineQuantizer act_quantizer;
    LayerReport report;
};

/// 1/2 |X^T W - Xq^T (Q diag(s))|_F^2, i.e. the per-channel reconstruction
/// objective summed over channels.
inline double reconstruction_error(const Eigen::Ref<const Eigen::MatrixXd>& W, const Eigen::Ref<const Eigen::MatrixXd>& X,
                                   const Eigen::Ref<const Eigen::MatrixXd>& Xq, const Eigen::Ref<const CodeMatrix>& codes,
                                   const Eigen::Ref<const Eigen::VectorXd>& scales) {
    if (W.rows() != X.rows() || X.rows() != Xq.rows() || X.cols() != Xq.cols() || codes.rows() != W.rows() ||
        codes.cols() != W.cols() || scales.size() != W.cols())
        throw std::invalid_argument("reconstruction_error: shape mismatch");
    const Eigen::MatrixXd deq = codes.cast<double>() * scales.asDiagonal();
    return 0.5 * (X.transpose() * W - Xq.transpose() * deq).squaredNorm();
}

inline double sparsity(const Eigen::Ref<const CodeMatrix>& codes) {
    if (codes.size() == 0) return 0.0;
    return static_cast<double>((codes.array() == 0).count()) / static_cast<double>(codes.size());
}

/// Quantize one layer end to end: calibrate and quantize activations,
/// calibrate per-channel weight scales, run the configured algorithm and
/// variant, certify accumulator safety, and report.
inline LayerResult quantize_layer(const LayerJob& job) {
    const QuantConfig& cfg = job.config;
    cfg.validate();
    const Eigen::MatrixXd& W = job.weights;
    const Eigen::MatrixXd& X = job.calib_float;
    const Index K = W.rows();
    const Index C = W.cols();
    if (K < 1 || C < 1) throw std::invalid_argument("quantize_layer: empty weight matrix");
    if (X.rows() != K) throw std::invalid_argument("quantize_layer: calibration rows must match weight rows");
    if (X.cols() < 1) throw std::invalid_argument("quantize_layer: need at least one calibration sample");
    if (cfg.tile && *cfg.tile > K) throw std::invalid_argument("quantize_layer: tile exceeds dot-product length");

    LayerResult out;
    out.report.config = cfg;
    out.report.notes.push_back(
        "no batch-norm merging, graph equalization or bias correction applied; layer quantized in isolation");

    const auto act = calibrate_activations(X, cfg.act_bits, cfg.percentile);
    out.act_quantizer = act.quantizer;
    if (act.degenerate) out.report.notes.push_back("constant calibration data; activation scale forced to 1");
    const Eigen::MatrixXd Xq = fake_quantize_matrix(act.quantizer, X);

    const Alphabet walpha = Alphabet::make_signed(cfg.weight_bits);
    const RoundingMode rounding{cfg.rounding};
    std::vector<AffineQuantizer> quantizers;
    quantizers.reserve(static_cast<std::size_t>(C));
    out.scales.resize(C);
    for (Index c = 0; c < C; ++c) {
        const auto sc = compute_scale(W.col(c), walpha);
        if (sc.degenerate) out.report.degenerate_channels.push_back(c);
        out.scales[c] = sc.scale;
        quantizers.emplace_back(sc.scale, 0, walpha, rounding);
    }

    std::optional<AccumulatorBudget> budget;
    if (cfg.variant != Variant::base)
        budget = AccumulatorBudget::make(*cfg.acc_bits, act.quantizer.alphabet(), rounding, cfg.tile, cfg.accumulator);
    const AccumulatorBudget* axe_budget = cfg.variant == Variant::axe ? &*budget : nullptr;

    std::optional<Permutation> order;
    if (cfg.algorithm == Algorithm::gpfq) {
        if (cfg.memory_efficient) {
            const auto me = gpfq_memory_efficient_precompute(X, Xq);
            if (me.null_dim > 0)
                out.report.notes.push_back("Xq Xq^T is rank deficient; null-space dimension " + std::to_string(me.null_dim));
            out.codes = gpfq_layer(W, to_operands(me), quantizers, axe_budget, cfg.soft_constraint, cfg.workers);
        } else {
            out.codes = gpfq_layer(W, GpfqOperands(X, Xq), quantizers, axe_budget, cfg.soft_constraint, cfg.workers);
        }
    } else {
        const HessianFactor factor = optq_prepare(Xq);
        order = factor.perm;
        out.codes = optq_quantize_layer(W, factor, quantizers, axe_budget, cfg.soft_constraint, cfg.workers);
    }

    if (cfg.variant == Variant::ep_init) {
        const Eigen::MatrixXd deq = out.codes.cast<double>() * out.scales.asDiagonal();
        out.codes = ep_init(deq, quantizers, *budget, order.value_or(Permutation{}));
    }
    if (budget) out.report.certificate = verify(out.codes, *budget, order);

    out.report.recon_error = reconstruction_error(W, X, Xq, out.codes, out.scales);
    out.report.sparsity = sparsity(out.codes);
    return out;
}

/// One weights/calibration pair taking part in a sweep.
struct CalibPair {
    Eigen::MatrixXd weights;
    Eigen::MatrixXd calib;
};

struct SweepGrid {
    std::vector<int> weight_bits;
    std::vector<int> act_bits;
    std::vector<int> acc_bits;
    QuantConfig base;  ///< everything except M, N and P
};

struct SweepRow {
    int P = 0;
    int M = 0;
    int N = 0;
    double recon_error = std::numeric_limits<double>::quiet_NaN();
    double sparsity = std::numeric_limits<double>::quiet_NaN();
    bool pass = false;
    std::string status = "ok";  ///< ok | infeasible | error: <message>
    bool pareto = false;
};

/// Mark rows not dominated by any other passing row with P' <= P and
/// error' <= error (strictly better in at least one).
inline void mark_pareto(std::vector<SweepRow>& rows) {
    auto eligible = [](const SweepRow& r) { return r.status == "ok" && r.pass; };
    for (auto& r : rows) {
        r.pareto = false;
        if (!eligible(r)) continue;
        r.pareto = std::none_of(rows.begin(), rows.end(), [&](const SweepRow& o) {
            return eligible(o) && o.P <= r.P && o.recon_error <= r.recon_error &&
                   (o.P < r.P || o.recon_error < r.recon_error);
        });
    }
}

/// Run every (P, M, N) cell with N >= M over all layers. Errors are recorded
/// per row and never abort the sweep. recon_error is summed over layers,
/// sparsity is taken over all codes, and pass requires every layer to fit P.
inline std::vector<SweepRow> sweep(std::span<const CalibPair> layers, const SweepGrid& grid) {
    std::vector<SweepRow> rows;
    for (int P : grid.acc_bits)
        for (int M : grid.weight_bits)
            for (int N : grid.act_bits) {
                if (N < M) continue;
                SweepRow row;
                row.P = P;
                row.M = M;
                row.N = N;
                try {
                    QuantConfig cfg = grid.base;
                    cfg.weight_bits = M;
                    cfg.act_bits = N;
                    cfg.acc_bits = P;
                    cfg.validate(true);
                    double err = 0.0;
                    Index zeros = 0, total = 0;
                    bool pass = true;
                    for (const auto& layer : layers) {
                        auto res = quantize_layer({layer.weights, layer.calib, cfg});
                        err += res.report.recon_error;
                        zeros += (res.codes.array() == 0).count();
                        total += res.codes.size();
                        if (res.report.certificate) {
                            pass = pass && res.report.certificate->pass();
                        } else {
                            const auto budget = AccumulatorBudget::register_only(
                                P, res.act_quantizer.alphabet(), cfg.tile, cfg.accumulator);
                            pass = pass && verify(res.codes, budget).pass();
                        }
                    }
                    row.recon_error = err;
                    row.sparsity = total ? static_cast<double>(zeros) / static_cast<double>(total) : 0.0;
                    row.pass = pass;
                } catch (const InfeasibleBudget&) {
                    row.status = "infeasible";
                } catch (const std::exception& e) {
                    row.status = std::string("error: ") + e.what();
                }
                rows.push_back(std::move(row));
            }
    mark_pareto(rows);
    return rows;
}

inline void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
    os << "P,M,N,recon_error,sparsity,pass,pareto,status\n";
    const auto old_precision = os.precision(17);
    for (const auto& r : rows) {
        std::string status = r.status;
        std::replace(status.begin(), status.end(), ',', ';');
        std::replace(status.begin(), status.end(), '\n', ' ');
        os << r.P << ',' << r.M << ',' << r.N << ',';
        if (r.status == "ok") os << r.recon_error << ',' << r.sparsity << ',';
        else os << ",,";
        os << (r.pass ? 1 : 0) << ',' << (r.pareto ? 1 : 0) << ',' << status << '\n';
    }
    os.precision(old_precision);
}

}  // namespace axe
