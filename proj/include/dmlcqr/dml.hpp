#pragma once
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dmlcqr/dataset.hpp"
#include "dmlcqr/design.hpp"
#include "dmlcqr/nuisance.hpp"

namespace dmlcqr {

enum class DmlMode { DML1, DML2 };

std::string to_string(DmlMode mode);
/// Accepts "dml1" / "dml2" in any case.
DmlMode parse_mode(const std::string& name);

/// One observation with its nuisance values, as entering the scores.
struct ScoreInputs {
    double y = 0.0;
    double d = 0.0;
    double t = 0.0;
    /// x'beta (pilot index).
    double index = 0.0;
    double pi = 1.0;
    double h = 0.0;
    /// d - x'mu.
    double v = 0.0;
};

/// Orthogonal score
///   I(h>0) (t {h - I(y - d theta - x'b <= 0)} + (t - pi)(1 - tau)/pi) v.
double score_psi(const ScoreInputs& o, double theta, double tau);

/// Non-orthogonal score t I(h>0) (h - I(y - d theta - x'b <= 0)) d.
double naive_score(const ScoreInputs& o, double theta);

/// Held-out fold data paired with its cross-fitted nuisances.
struct FoldScores {
    Eigen::VectorXd y, d, t, index, pi, h, v, f;
    double tau = 0.5;

    static FoldScores from(const Sample& target, const NuisanceFit& nui);
    Eigen::Index n() const { return y.size(); }
    ScoreInputs row(Eigen::Index i) const { return {y[i], d[i], t[i], index[i], pi[i], h[i], v[i]}; }

    /// Scores at theta for every row.
    Eigen::VectorXd psi(double theta) const;
    /// True when psi vanishes for every theta (no kept row with v != 0).
    bool degenerate() const;
    /// E_n[t I(h>0) f d v].
    double jacobian() const;
};

struct ObjectiveValue {
    double value = 0.0;
    /// Set when both moments vanish and the 0/0 convention was applied.
    bool zero_over_zero = false;
};

/// (E_n psi)^2 / E_n psi^2, with 0/0 read as 0.
ObjectiveValue fold_objective(const FoldScores& fold, double theta);

struct SearchOptions {
    int grid_points = 401;
    /// Absolute tolerance; non-positive means 1e-5 times the interval width.
    double tolerance = -1.0;
};

struct SearchResult {
    double theta = 0.0;
    double value = 0.0;
    bool multiple_plateaus = false;
    bool at_boundary = false;
    int evaluations = 0;
};

/// Grid scan then golden-section refinement of a possibly discontinuous
/// objective; returns the midpoint of the minimizing plateau.
SearchResult solve_theta(const std::function<double(double)>& objective, double lo, double hi,
                         const SearchOptions& opts = {});

struct DmlConfig {
    NuisanceConfig nuisance;
    int K = 4;
    DmlMode mode = DmlMode::DML2;
    /// 1 - level of the confidence interval.
    double xi = 0.05;
    SearchOptions search;
    /// Search half-width is max(half_width_floor, 10 * se proxy) with the
    /// proxy 1 / (sqrt(E_n[d^2]) log n).
    double half_width_floor = 0.0;
    int max_widen = 3;
    int min_rows_per_fold = 40;
    /// Folds fitted concurrently; 0 or 1 runs them serially.
    int threads = 1;
};

struct FoldDiagnostics {
    int fold = 0;
    Eigen::Index size = 0;
    double theta_pilot = 0.0;
    double score_mean = 0.0;
    double jacobian = 0.0;
    bool zero_over_zero = false;
    NuisanceFit::Diagnostics nuisance;
};

struct DmlEstimate {
    double theta = 0.0;
    double sigma2 = 0.0;
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double level = 0.95;
    std::vector<double> per_fold_theta;
    DmlMode mode = DmlMode::DML2;
    int K = 0;
    double tau = 0.5;
    Eigen::Index n = 0;
    Eigen::Index p = 0;
    std::uint64_t seed = 0;
    double search_lo = 0.0;
    double search_hi = 0.0;
    std::vector<FoldDiagnostics> diagnostics;
    std::vector<std::string> warnings;
};

/// Cross-fitted DML1/DML2 estimate with sandwich standard error.
DmlEstimate estimate_dml(const Dataset& data, const DesignMatrix& design, const DmlConfig& cfg, std::uint64_t seed);

/// Same, from already fitted folds (exposed for testing and reuse).
/// `se_proxy` <= 0 falls back to the spread of the fold pilots.
DmlEstimate estimate_from_folds(const std::vector<FoldScores>& folds, const std::vector<double>& pilots,
                                const DmlConfig& cfg, double se_proxy = -1.0);

struct VarianceResult {
    double sigma2 = 0.0;
    double jacobian = 0.0;
    double meat = 0.0;
    std::vector<double> fold_jacobians;
};

/// J^{-1} mean_k E_{n,k}[psi^2] J^{-1} with J = mean_k E_{n,k}[t I(h>0) f d v].
VarianceResult variance_estimate(const std::vector<FoldScores>& folds, double theta);

/// meat / jacobian^2; throws SingularJacobianError when |jacobian| < 1e-8.
double sandwich_variance(double jacobian, double meat);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// theta -+ Phi^{-1}(1 - xi/2) sqrt(sigma2 / N).
Interval confidence_interval(double theta, double sigma2, Eigen::Index N, double xi);

enum class Direction { Pi, Beta, Mu };

/// Population quantities for the orthogonality diagnostic.
struct TruthAtPopulation {
    Eigen::VectorXd y, d, t;
    Eigen::MatrixXd x;
    double tau = 0.5;
    double theta = 0.0;
    Eigen::VectorXd pi;
    Eigen::VectorXd beta;
    Eigen::VectorXd mu;
};

struct SlopeEstimate {
    double orthogonal = 0.0;
    double orthogonal_se = 0.0;
    double naive = 0.0;
    double naive_se = 0.0;
};

/// Least-squares slope in eps of the mean scores at eta0 + eps * delta.
/// `delta` has the length of pi (per observation) or of beta / mu.
SlopeEstimate orthogonality_check(const TruthAtPopulation& pop, Direction dir, const Eigen::VectorXd& delta,
                                  const std::vector<double>& epsilons, double pi_clip = 1e-4);

}  // namespace dmlcqr
