#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "axe/bounds.hpp"
#include "axe/projection.hpp"
#include "axe/types.hpp"

namespace axe {

/// Running accumulator-aware state for one output channel, all in code units.
///
/// The quantizer argument goes through the soft threshold (when enabled)
/// and then through clip(.; a, b). a = A - alpha tracks the negative codes
/// emitted so far in the current tile, b = B - beta the positive ones. Both
/// limits and the threshold reset at each tile boundary. Without a budget
/// every step is the identity.
class GreedyConstraint {
public:
    GreedyConstraint(const AccumulatorBudget* budget, bool soft, Index K)
        : budget_(budget), soft_(soft && budget != nullptr), tiles_(K, budget ? budget->tile : std::nullopt) {
        if (budget_) {
            a_ = budget_->limit_neg;
            b_ = budget_->limit_pos;
        }
        lambda_.assign(static_cast<std::size_t>(std::max<Index>(tiles_.count(), 1)), 0.0);
    }

    /// Per-tile thresholds from the projection of the code-unit weights (in
    /// processing order) onto the soft l1 budget.
    void derive_thresholds(const Eigen::Ref<const Eigen::VectorXd>& codes_in_order) {
        if (!soft_) return;
        for (Index t = 0; t < tiles_.count(); ++t) {
            const Index b = tiles_.begin(t);
            lambda_[static_cast<std::size_t>(t)] =
                l1_project(codes_in_order.segment(b, tiles_.end(t) - b), budget_->soft_budget).lambda;
        }
    }

    /// Call before processing the weight at `position` of the order.
    void enter(Index position) {
        tile_ = tiles_.of(position);
        if (budget_ && position == tiles_.begin(tile_)) {
            a_ = budget_->limit_neg;
            b_ = budget_->limit_pos;
        }
    }

    double constrain(double x) const {
        if (!budget_) return x;
        if (soft_) x = soft_threshold(x, lambda_[static_cast<std::size_t>(tile_)]);
        // Once a side of the budget is spent its limit may overshoot zero by
        // the rounding slack; the range then collapses onto zero.
        return range_clip(x, std::min(a_, 0.0), std::max(b_, 0.0));
    }

    void consume(std::int64_t code) {
        if (!budget_) return;
        if (code < 0) a_ -= static_cast<double>(code);
        else if (code > 0) b_ -= static_cast<double>(code);
    }

    double lower() const { return a_; }
    double upper() const { return b_; }
    double lambda() const { return lambda_[static_cast<std::size_t>(tile_)]; }

private:
    const AccumulatorBudget* budget_;
    bool soft_;
    TileLayout tiles_;
    std::vector<double> lambda_;
    Index tile_ = 0;
    double a_ = 0.0;
    double b_ = 0.0;
};

}  // namespace axe
