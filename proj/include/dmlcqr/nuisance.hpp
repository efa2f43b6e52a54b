#pragma once
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dmlcqr/dataset.hpp"
#include "dmlcqr/design.hpp"
#include "dmlcqr/lasso.hpp"

namespace dmlcqr {

/// Row-aligned slice of a Dataset together with its (standardized) design.
struct Sample {
    Eigen::VectorXd y;
    Eigen::VectorXd d;
    Eigen::VectorXd t;
    Eigen::MatrixXd x;
    Eigen::Index intercept_col = 0;

    Eigen::Index n() const { return y.size(); }
    /// [d, x]: treatment first, as used by the logit and quantile fits.
    Eigen::MatrixXd with_treatment() const;
};

Sample make_sample(const Dataset& data, const DesignMatrix& design);
Sample make_sample(const Dataset& data, const DesignMatrix& design, const std::vector<Eigen::Index>& rows);

struct NuisanceConfig {
    double tau = 0.5;
    PenaltyRule rule;
    SolverOptions solver;
    /// Minimum number of rows with t = 1 and h > 0 in the auxiliary sample.
    int kept_floor = 20;
    /// Density bandwidth; non-positive selects default_bandwidth.
    double bandwidth = -1.0;
    /// Spacing floor for the density estimate, as a multiple of IQR(y | t = 1).
    double density_floor = 0.1;
    /// Share of kept rows allowed to have crossing quantile fits.
    double max_crossing_share = 0.10;
    /// Density from the Lasso quantile fits (true) or from Post-Lasso refits
    /// on the union of the selected supports (false).
    bool density_from_lasso = true;
    /// Penalize the treatment coefficient in the pilot quantile Lasso.
    bool penalize_treatment = true;
    /// Refit the projection on its own support plus the controls selected
    /// by the pilot quantile Lasso.
    bool projection_union = false;
    double pi_clip = 1e-4;
    /// Multiplies every penalty level; 0 gives unpenalized refits.
    double lambda_scale = 1.0;
};

struct CensoringFit {
    Eigen::VectorXd pi_aux;
    Eigen::VectorXd pi_target;
    /// Coefficients on [d, x].
    Eigen::VectorXd alpha;
    std::size_t support_size = 0;
    std::vector<std::string> warnings;
};

/// Logit Lasso + Post-Lasso of t on (d, x) fitted on `aux`, evaluated on
/// both samples and clipped to [clip, 1 - clip].
CensoringFit fit_censoring_prob(const Sample& aux, const Sample& target, const NuisanceConfig& cfg);

struct LevelFit {
    Eigen::VectorXd h;
    /// I(h > 0).
    Eigen::VectorXd keep;
};

/// h = (pi - (1 - tau)) / pi, keep = I(h > 0).
LevelFit compute_h(const Eigen::VectorXd& pi, double tau);

struct QuantileFit {
    double theta = 0.0;
    /// Coefficients on x (treatment excluded).
    Eigen::VectorXd beta;
    double lambda = 0.0;
    std::size_t lasso_support = 0;
    std::size_t post_support = 0;
    /// Selected Lasso columns of [d, x].
    std::vector<Eigen::Index> selected;
    /// Penalized (Lasso) treatment and control coefficients.
    double lasso_theta = 0.0;
    Eigen::VectorXd lasso_beta;
};

/// Lasso weighted/rotated quantile regression of y on (d, x) with
/// row weights keep (= t * I(h > 0)) and levels h, followed by a Post-Lasso
/// refit that always keeps the treatment and the intercept.
QuantileFit fit_pilot_qr(const Sample& aux, const Eigen::VectorXd& keep, const Eigen::VectorXd& h,
                         const NuisanceConfig& cfg, std::uint64_t seed);

/// Unpenalized weighted/rotated QR of y on the given columns of [d, x].
QuantileFit refit_qr(const Sample& aux, const Eigen::VectorXd& keep, const Eigen::VectorXd& h,
                     const std::vector<Eigen::Index>& columns, const NuisanceConfig& cfg);

/// min(n^{-1/6}, min(tau, 1 - tau) / 2).
double default_bandwidth(Eigen::Index n, double tau);

struct DensityFit {
    Eigen::VectorXd f_aux;
    Eigen::VectorXd f_target;
    double bandwidth = 0.0;
    int capped = 0;
    int crossings = 0;
    QuantileFit upper;
    QuantileFit lower;
};

/// Quantile-spacing estimate 2h / (Q(tau + h) - Q(tau - h)) where both
/// quantile fits reuse the censoring probabilities of the tau fit. The
/// Lasso runs at tau + h and tau - h separately. With density_from_lasso off,
/// both are refit on the union of their supports and `base_support`.
DensityFit estimate_density(const Sample& aux, const Sample& target, const Eigen::VectorXd& pi_aux,
                            double bandwidth, const NuisanceConfig& cfg, std::uint64_t seed,
                            const std::vector<Eigen::Index>& base_support = {});

struct ProjectionFit {
    Eigen::VectorXd mu;
    Eigen::VectorXd v_aux;
    Eigen::VectorXd v_target;
    double lambda = 0.0;
    std::size_t support_size = 0;
};

/// Weighted Lasso + Post-Lasso projection of d on x with weights
/// t * keep * f on the auxiliary sample.
/// `extra` lists columns of x kept in the Post-Lasso refit regardless of selection.
ProjectionFit fit_projection(const Sample& aux, const Sample& target, const Eigen::VectorXd& weights,
                             const NuisanceConfig& cfg, const std::vector<Eigen::Index>& extra = {});

/// Cross-fitted nuisance values on the target fold.
struct NuisanceFit {
    Eigen::VectorXd pi_hat;
    Eigen::VectorXd h_hat;
    Eigen::VectorXd keep;
    double theta_pilot = 0.0;
    Eigen::VectorXd beta_pilot;
    Eigen::VectorXd f_hat;
    Eigen::VectorXd mu_hat;
    Eigen::VectorXd v_hat;
    /// x'beta_pilot on the target rows.
    Eigen::VectorXd index_hat;
    double tau = 0.5;
    double bandwidth = 0.0;

    struct Diagnostics {
        std::size_t logit_support = 0;
        std::size_t qr_lasso_support = 0;
        std::size_t qr_post_support = 0;
        std::size_t projection_support = 0;
        int density_caps = 0;
        int density_crossings = 0;
        double pi_min = 0.0;
        double pi_max = 0.0;
        Eigen::Index kept_aux = 0;
        double lambda_qr = 0.0;
        std::vector<std::string> warnings;
    } diagnostics;

    /// Throws QualityError if any field is non-finite or the h identity fails.
    void validate() const;
};

/// Steps (a)-(d) of the cross-fitting algorithm for one fold.
NuisanceFit fit_nuisance(const Sample& aux, const Sample& target, const NuisanceConfig& cfg, std::uint64_t seed);

}  // namespace dmlcqr
