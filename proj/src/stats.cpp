#include "dmlcqr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "dmlcqr/errors.hpp"

namespace dmlcqr {

namespace {
const boost::math::normal_distribution<double> kStdNormal{0.0, 1.0};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_pdf(double x) {
    constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw ParameterError("normal_quantile: probability must lie in (0,1), got " +
                             std::to_string(p));
    }
    return boost::math::quantile(kStdNormal, p);
}

double empirical_quantile(std::span<const double> values, double q) {
    if (values.empty()) throw ParameterError("empirical_quantile: empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw ParameterError("empirical_quantile: q outside [0,1]");
    std::vector<double> v(values.begin(), values.end());
    const auto n = v.size();
    auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-12));
    k = std::clamp<std::size_t>(k, 1, n);
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end());
    return v[k - 1];
}

double iqr(std::span<const double> values) {
    return empirical_quantile(values, 0.75) - empirical_quantile(values, 0.25);
}

double mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace dmlcqr
