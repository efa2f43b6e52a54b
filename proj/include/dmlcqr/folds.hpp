#pragma once
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace dmlcqr {

/// Balanced random K-fold partition. Fold labels are 0-based.
struct FoldPartition {
    std::vector<int> assignments;
    int K = 0;
    std::uint64_t seed = 0;

    std::vector<Eigen::Index> fold(int k) const;
    /// All rows not in fold k (the auxiliary sample).
    std::vector<Eigen::Index> complement(int k) const;
    std::vector<std::size_t> sizes() const;
};

/// Throws ParameterError unless 2 <= K <= n.
FoldPartition make_folds(Eigen::Index n, int K, std::uint64_t seed);

}  // namespace dmlcqr
