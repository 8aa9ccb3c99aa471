#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace axe {

using Index = Eigen::Index;

/// Integer weight codes, one column per output channel (K x C).
using CodeMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic>;
using CodeVector = Eigen::Matrix<std::int32_t, Eigen::Dynamic, 1>;

/// Processing order over input neurons: position -> original index.
using Permutation = std::vector<Index>;

inline Permutation identity_permutation(Index n) {
    Permutation p(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    return p;
}

}  // namespace axe
