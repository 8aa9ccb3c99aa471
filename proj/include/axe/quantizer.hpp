#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "axe/alphabet.hpp"

namespace axe {

enum class RoundingKind { nearest, to_zero };

inline const char* to_string(RoundingKind k) {
    return k == RoundingKind::nearest ? "nearest" : "to-zero";
}

inline RoundingKind rounding_from_string(const std::string& s) {
    if (s == "nearest") return RoundingKind::nearest;
    if (s == "to-zero") return RoundingKind::to_zero;
    throw std::invalid_argument("unknown rounding mode '" + s + "'");
}

/// Rounding function plus its worst-case magnitude growth in code units.
///
/// Nearest rounding breaks ties away from zero, so |round(x)| - |x| <= 0.5.
/// Round-to-zero never grows a magnitude, so its slack is 0.
struct RoundingMode {
    RoundingKind kind = RoundingKind::nearest;

    static constexpr RoundingMode nearest() { return {RoundingKind::nearest}; }
    static constexpr RoundingMode to_zero() { return {RoundingKind::to_zero}; }

    constexpr double slack() const { return kind == RoundingKind::nearest ? 0.5 : 0.0; }

    double apply(double x) const { return kind == RoundingKind::nearest ? std::round(x) : std::trunc(x); }

    friend bool operator==(const RoundingMode&, const RoundingMode&) = default;
};

/// Uniform affine quantizer: code = clip(round(w / s) + z; lo, hi) - z.
class AffineQuantizer {
public:
    AffineQuantizer() = default;

    AffineQuantizer(double scale, std::int64_t zero_point, Alphabet alphabet,
                    RoundingMode rounding = RoundingMode::nearest())
        : scale_(scale), zero_point_(zero_point), alphabet_(alphabet), rounding_(rounding) {
        if (!(scale > 0.0) || !std::isfinite(scale))
            throw std::invalid_argument("quantizer scale must be finite and strictly positive");
        if (!alphabet.contains(zero_point))
            throw std::invalid_argument("zero point " + std::to_string(zero_point) +
                                        " outside alphabet");
    }

    double scale() const noexcept { return scale_; }
    std::int64_t zero_point() const noexcept { return zero_point_; }
    const Alphabet& alphabet() const noexcept { return alphabet_; }
    RoundingMode rounding() const noexcept { return rounding_; }

    /// Smallest and largest value `quantize` can return.
    std::int64_t code_min() const noexcept { return alphabet_.lo - zero_point_; }
    std::int64_t code_max() const noexcept { return alphabet_.hi - zero_point_; }

    /// Stored (register) code in [lo, hi].
    std::int64_t encode(double w) const { return quantize(w) + zero_point_; }

    /// Zero-point-shifted code in [lo - z, hi - z]; the dequantized value is scale * code.
    std::int64_t quantize(double w) const {
        if (!std::isfinite(w))
            throw std::domain_error("cannot quantize non-finite value " + std::to_string(w));
        const double x = w / scale_;
        std::int64_t code = round_to_code(x);
        // Round-to-zero picks the largest-magnitude code with |s * code| <= |w|.
        // w / s can land an ulp on either side of an integer, so settle it in
        // the dequantized domain; this also makes re-quantization idempotent.
        if (rounding_.kind == RoundingKind::to_zero && w != 0.0) {
            const std::int64_t dir = w > 0 ? 1 : -1;
            while (code != 0 && std::abs(static_cast<double>(code) * scale_) > std::abs(w)) code -= dir;
            while (alphabet_.contains(code + dir + zero_point_) &&
                   std::abs(static_cast<double>(code + dir) * scale_) <= std::abs(w))
                code += dir;
        }
        return code;
    }

    /// Quantize a value already expressed in code units (w / s).
    std::int64_t round_to_code(double x) const {
        const double shifted = rounding_.apply(x) + static_cast<double>(zero_point_);
        const double clipped = std::clamp(shifted, static_cast<double>(alphabet_.lo),
                                          static_cast<double>(alphabet_.hi));
        return static_cast<std::int64_t>(clipped) - zero_point_;
    }

    double dequantize(std::int64_t code) const { return scale_ * static_cast<double>(code); }

    double fake_quantize(double w) const { return dequantize(quantize(w)); }

private:
    double scale_ = 1.0;
    std::int64_t zero_point_ = 0;
    Alphabet alphabet_ = Alphabet::make_signed(8);
    RoundingMode rounding_;
};

struct ScaleResult {
    double scale = 1.0;
    bool degenerate = false;  ///< all-zero input; scale forced to 1
};

/// Per-channel weight scale max|w| / (2^(b-1) - 1).
inline ScaleResult compute_scale(const Eigen::Ref<const Eigen::VectorXd>& w_row, const Alphabet& alphabet) {
    if (w_row.size() == 0) throw std::invalid_argument("compute_scale: empty weight row");
    if (!alphabet.is_signed) throw std::invalid_argument("compute_scale: weight alphabet must be signed");
    const std::int64_t top = (std::int64_t{1} << (alphabet.bits - 1)) - 1;
    if (top <= 0) throw std::invalid_argument("compute_scale: alphabet has no nonzero positive code");
    if (!w_row.allFinite()) throw std::domain_error("compute_scale: non-finite weight");
    const double mx = w_row.cwiseAbs().maxCoeff();
    if (mx == 0.0) return {1.0, true};
    return {mx / static_cast<double>(top), false};
}

/// Linear-interpolated quantile of `values` at fraction q in [0, 1].
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of empty set");
    q = std::clamp(q, 0.0, 1.0);
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto below = static_cast<std::size_t>(std::floor(pos));
    const std::size_t above = std::min(below + 1, values.size() - 1);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(below), values.end());
    const double lo = values[below];
    if (above == below) return lo;
    const double hi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(below) + 1, values.end());
    return lo + (pos - static_cast<double>(below)) * (hi - lo);
}

struct ActivationCalibration {
    AffineQuantizer quantizer;
    bool degenerate = false;  ///< constant input; scale forced to 1
};

/// Per-tensor asymmetric unsigned quantizer for activations.
///
/// The range is [quantile(100 - p), quantile(p)] widened to include zero; the
/// zero point maps the low end of that range to code 0.
inline ActivationCalibration calibrate_activations(const Eigen::Ref<const Eigen::MatrixXd>& X, int bits,
                                                   double percentile) {
    if (X.size() == 0) throw std::invalid_argument("calibrate_activations: empty calibration matrix");
    if (!(percentile > 0.0 && percentile <= 100.0))
        throw std::invalid_argument("calibrate_activations: percentile must lie in (0, 100]");
    if (!X.allFinite()) throw std::domain_error("calibrate_activations: non-finite activation");

    const Alphabet alphabet = Alphabet::make_unsigned(bits);
    std::vector<double> values(X.data(), X.data() + X.size());
    double lo = percentile == 100.0 ? *std::min_element(values.begin(), values.end())
                                    : quantile(values, (100.0 - percentile) / 100.0);
    double hi = percentile == 100.0 ? *std::max_element(values.begin(), values.end())
                                    : quantile(std::move(values), percentile / 100.0);
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
    if (hi - lo == 0.0) return {AffineQuantizer(1.0, 0, alphabet), true};

    const double scale = (hi - lo) / static_cast<double>(alphabet.hi);
    const auto zero_point =
        std::clamp(static_cast<std::int64_t>(std::round(-lo / scale)), alphabet.lo, alphabet.hi);
    return {AffineQuantizer(scale, zero_point, alphabet), false};
}

/// Stored activation codes in [lo, hi], as they enter the accumulator.
inline Eigen::MatrixXd encode_matrix(const AffineQuantizer& q, const Eigen::Ref<const Eigen::MatrixXd>& X) {
    return X.unaryExpr([&](double x) { return static_cast<double>(q.encode(x)); });
}

/// Dequantized counterpart of X under `q`.
inline Eigen::MatrixXd fake_quantize_matrix(const AffineQuantizer& q, const Eigen::Ref<const Eigen::MatrixXd>& X) {
    return X.unaryExpr([&](double x) { return q.fake_quantize(x); });
}

}  // namespace axe
