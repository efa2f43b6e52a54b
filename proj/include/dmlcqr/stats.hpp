#pragma once
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dmlcqr {

/// Standard normal CDF.
double normal_cdf(double x);
/// Standard normal density.
double normal_pdf(double x);
/// Inverse standard normal CDF. Throws ParameterError unless 0 < p < 1.
double normal_quantile(double p);

/// Empirical quantile as the order statistic x_(ceil(q*n)) (1-indexed),
/// i.e. the left-continuous inverse of the empirical CDF.
double empirical_quantile(std::span<const double> values, double q);

/// Interquartile range using empirical_quantile.
double iqr(std::span<const double> values);

double mean(std::span<const double> values);

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

/// SplitMix64 finalizer; used to derive independent per-stream seeds.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace dmlcqr
