#pragma once
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace dmlcqr {

/// Result of any L1-penalized (or unpenalized) fit.
struct LassoFit {
    Eigen::VectorXd coefficients;
    std::vector<Eigen::Index> support;
    double lambda = 0.0;
    Eigen::VectorXd loadings;
    int iterations = 0;
    double objective = 0.0;
    bool converged = false;
    /// Largest violation of the first-order (KKT / subgradient) condition.
    double kkt_residual = 0.0;
    /// Columns removed before an unpenalized refit because they were collinear.
    std::vector<Eigen::Index> dropped_collinear;

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const { return x * coefficients; }
};

struct PenaltyRule {
    double c = 1.1;
    /// Tail probability. Non-positive means "use 0.1 / ln(n)".
    double gamma = -1.0;
    double alpha = 0.1;
    int ndraws = 500;
    std::uint64_t seed = 0;
    int loading_rounds = 2;

    void validate() const;
    double gamma_for(std::ptrdiff_t n) const;
};

struct SolverOptions {
    int max_iterations = 10000;
    double ls_tolerance = 1e-8;
    double logit_tolerance = 1e-7;
    double qr_tolerance = 1e-6;
};

/// (h - I(u <= 0)) u. Throws ParameterError unless 0 < h < 1.
double check_loss(double u, double h);

/// Support of a coefficient vector.
std::vector<Eigen::Index> support_of(const Eigen::VectorXd& beta);

/// Minimizes E_n[w (y - x'b)^2] + (lambda/n) ||Gamma b||_1 by cyclic
/// coordinate descent. Columns with loading 0 are unpenalized.
LassoFit lasso_ls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                  double lambda, const Eigen::VectorXd& loadings, const SolverOptions& opts = {});

/// Minimizes the mean logistic deviance plus (lambda/n) ||Gamma a||_1 with
/// accelerated proximal gradient and backtracking.
LassoFit lasso_logit(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, double lambda,
                     const Eigen::VectorXd& loadings, const SolverOptions& opts = {});

/// Weighted and rotated L1 quantile regression:
///   E_n[keep_i rho_{level_i}(y_i - x_i'b)] + (lambda/n) ||Gamma b||_1.
/// Solved exactly as a linear program (primal-dual interior point followed
/// by a basis crossover) and certified through the dual of that basis.
LassoFit lasso_qr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& keep,
                  const Eigen::VectorXd& levels, double lambda, const Eigen::VectorXd& loadings,
                  const SolverOptions& opts = {});

struct LsProblem {
    const Eigen::MatrixXd& x;
    const Eigen::VectorXd& y;
    const Eigen::VectorXd& weights;
};
struct LogitProblem {
    const Eigen::MatrixXd& x;
    const Eigen::VectorXd& t;
};
struct QrProblem {
    const Eigen::MatrixXd& x;
    const Eigen::VectorXd& y;
    const Eigen::VectorXd& keep;
    const Eigen::VectorXd& levels;
};
using Problem = std::variant<LsProblem, LogitProblem, QrProblem>;

/// Unpenalized refit on support(fit) united with `forced`. Coefficients
/// outside that set are exactly zero; collinear columns inside it are dropped
/// and listed in `dropped_collinear`.
LassoFit post_lasso(const LassoFit& fit, const Problem& problem, const std::vector<Eigen::Index>& forced,
                    const SolverOptions& opts = {});

/// Unpenalized fit restricted to `columns` (no selection step).
LassoFit refit_on(const Problem& problem, std::vector<Eigen::Index> columns, const SolverOptions& opts = {});

/// c sqrt(n) Phi^{-1}(1 - gamma / (2 (p+1) n)).
double penalty_logit_level(std::ptrdiff_t n, std::ptrdiff_t p, const PenaltyRule& rule);
/// c sqrt(n) 2 Phi^{-1}(1 - gamma / (2 p)).
double penalty_ls_level(std::ptrdiff_t n, std::ptrdiff_t p, const PenaltyRule& rule);

/// Root mean square of each column, E_n[x_j^2]^{1/2}.
Eigen::VectorXd column_rms(const Eigen::MatrixXd& x);

/// Simulated penalty level for lasso_qr. Every column of `x` enters the
/// sup-norm with loading E_n[x_j^2]^{1/2}; pass only the penalized columns.
double penalty_qr_level(const Eigen::MatrixXd& x, const Eigen::VectorXd& keep, const Eigen::VectorXd& levels,
                        const PenaltyRule& rule);

/// Iterated penalty loadings for the logit or least-squares problems.
/// `unpenalized` columns keep loading 0. Each round fits the Lasso with the
/// current loadings, refits Post-Lasso, and recomputes the loadings from the
/// per-observation score at the refit.
Eigen::VectorXd penalty_loadings(const Problem& problem, double lambda, const Eigen::VectorXd& initial,
                                 int rounds, const std::vector<Eigen::Index>& unpenalized,
                                 const SolverOptions& opts = {});

/// Loadings at the null (intercept-only) model for logit / ls.
Eigen::VectorXd initial_loadings(const Problem& problem, const std::vector<Eigen::Index>& unpenalized);

/// Penalized objective value of `beta` for a problem (lambda/loadings given).
double penalized_objective(const Problem& problem, const Eigen::VectorXd& beta, double lambda,
                           const Eigen::VectorXd& loadings);

double logistic(double u);

}  // namespace dmlcqr
