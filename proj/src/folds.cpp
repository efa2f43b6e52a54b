#include "dmlcqr/folds.hpp"

#include <numeric>
#include <random>

#include <fmt/format.h>

#include "dmlcqr/errors.hpp"

namespace dmlcqr {

std::vector<Eigen::Index> FoldPartition::fold(int k) const {
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] == k) out.push_back(static_cast<Eigen::Index>(i));
    }
    return out;
}

std::vector<Eigen::Index> FoldPartition::complement(int k) const {
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] != k) out.push_back(static_cast<Eigen::Index>(i));
    }
    return out;
}

std::vector<std::size_t> FoldPartition::sizes() const {
    std::vector<std::size_t> out(static_cast<std::size_t>(K), 0);
    for (int a : assignments) ++out[static_cast<std::size_t>(a)];
    return out;
}

FoldPartition make_folds(Eigen::Index n, int K, std::uint64_t seed) {
    if (K < 2) throw ParameterError(fmt::format("cross-fitting needs K >= 2, got {}", K));
    if (K > n) throw ParameterError(fmt::format("K = {} exceeds sample size {}", K, n));

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    // Explicit Fisher-Yates so the permutation does not depend on the
    // standard library's distribution implementations.
    std::mt19937_64 rng(seed);
    for (std::size_t i = perm.size() - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(perm[i], perm[j]);
    }
    FoldPartition out;
    out.K = K;
    out.seed = seed;
    out.assignments.assign(static_cast<std::size_t>(n), 0);
    for (std::size_t pos = 0; pos < perm.size(); ++pos) {
        out.assignments[static_cast<std::size_t>(perm[pos])] = static_cast<int>(pos % static_cast<std::size_t>(K));
    }
    return out;
}

}  // namespace dmlcqr
