#pragma once
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dmlcqr/dataset.hpp"
#include "dmlcqr/design.hpp"
#include "dmlcqr/dml.hpp"

namespace dmlcqr {

enum class ErrorDist { Normal, StudentT };

struct DgpConfig {
    Eigen::Index n = 500;
    /// Columns of x = (1, z), intercept included.
    Eigen::Index p = 300;
    double tau = 0.5;
    double theta_true = 1.0;
    double rho = 0.5;
    /// Patterns over x (entry 0 is the intercept). Empty = paper defaults.
    Eigen::VectorXd nu_y;
    Eigen::VectorXd nu_d;
    std::optional<double> c_y, c_d;
    std::optional<double> r2_y, r2_d;
    double censor_quantile = 0.3;
    ErrorDist error = ErrorDist::Normal;
    double error_df = 5.0;
    std::uint64_t seed = 0;

    void validate() const;
    Eigen::VectorXd pattern_y() const;
    Eigen::VectorXd pattern_d() const;
    /// (c_y, c_d), derived from the R^2 targets when those are given.
    std::pair<double, double> scales() const;
    /// Columns of x with a nonzero entry in nu_y or nu_d (intercept first).
    std::vector<Eigen::Index> relevant() const;
};

/// nu_y = (1, 1/2, 1/3, 1/4, 1/5, 0 x5, 1, 1/2, 1/3, 1/4, 1/5, 0, ...).
Eigen::VectorXd default_nu_y(Eigen::Index p);
/// nu_d = (1, 1/2, ..., 1/10, 0, ...).
Eigen::VectorXd default_nu_d(Eigen::Index p);

/// nu' Sigma nu over the non-intercept entries, Sigma_ij = rho^|i-j|.
double pattern_quadratic_form(const Eigen::VectorXd& nu, double rho);

/// sqrt(r2 / ((1 - r2) S)).
double r2_to_coef(double r2, const Eigen::VectorXd& nu, double rho);

/// One draw from the censored design. Controls are named z1..z{p-1} and the
/// censoring point is stored per row.
Dataset generate_replication(const DgpConfig& cfg, std::uint64_t rep_seed);

/// Linear standardized design with intercept, as used by the estimators.
DesignMatrix simulation_design(const Dataset& data);

struct PointEstimate {
    double theta = 0.0;
    double se = 0.0;
};

struct EstimatorRules {
    NuisanceConfig nuisance;
    DmlConfig dml;
};

/// Full-sample Logit Post-Lasso pi, Lasso + Post-Lasso rotated QR; se from
/// a Powell kernel sandwich on the refit columns.
PointEstimate estimator_naive_ps(const Dataset& data, const DesignMatrix& design, const EstimatorRules& rules,
                                 std::uint64_t seed);

/// Unpenalized three-step estimator on all columns.
PointEstimate estimator_hdcqr(const Dataset& data, const DesignMatrix& design, const EstimatorRules& rules);

/// Unpenalized three-step estimator on the intercept plus `relevant`.
PointEstimate estimator_oracle(const Dataset& data, const DesignMatrix& design, const EstimatorRules& rules,
                               const std::vector<Eigen::Index>& relevant);

PointEstimate estimator_dmlcqr(const Dataset& data, const DesignMatrix& design, const EstimatorRules& rules,
                               std::uint64_t seed);

/// Valid names: naive_ps, hdcqr, dmlcqr, oracle.
const std::vector<std::string>& estimator_names();
void validate_estimators(const std::vector<std::string>& names);

struct EstimatorMetrics {
    std::string name;
    double bias = 0.0;
    double sd = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
    double rejection_rate = 0.0;
    int successes = 0;
    int failures = 0;
    bool single_rep = false;
};

struct ReplicationRecord {
    int rep = 0;
    std::uint64_t seed = 0;
    std::string estimator;
    bool ok = false;
    double theta = 0.0;
    double se = 0.0;
    std::string error;
};

struct McReport {
    std::string design_id;
    int reps = 0;
    double theta_true = 1.0;
    std::vector<EstimatorMetrics> metrics;
    std::vector<ReplicationRecord> records;

    const EstimatorMetrics& metric(const std::string& name) const;
};

/// Metrics for one estimator from (theta, se) pairs. Population SD.
EstimatorMetrics summarize(const std::string& name, const std::vector<PointEstimate>& ok, int failures,
                           double theta_true, double z);

struct McOptions {
    EstimatorRules rules;
    int threads = 1;
    std::string design_id = "custom";
};

McReport run_mc(const DgpConfig& cfg, const std::vector<std::string>& estimators, int reps, std::uint64_t base_seed,
                const McOptions& opts);

struct CoverageCell {
    double r2_d = 0.0;
    double r2_y = 0.0;
    McReport report;
};

std::vector<CoverageCell> coverage_grid(const std::vector<std::pair<double, double>>& r2_pairs,
                                        const DgpConfig& templ, int reps, const std::vector<std::string>& estimators,
                                        std::uint64_t base_seed, const McOptions& opts);

}  // namespace dmlcqr
