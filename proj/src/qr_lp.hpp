#pragma once
#include <Eigen/Dense>

namespace dmlcqr::detail {

// min_b sum_r weight_r * rho_{level_r}(y_r - a_r' b), weight_r > 0, level_r in (0,1).
struct WeightedQrResult {
    Eigen::VectorXd beta;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    bool vertex = false;
    // Largest violation of the dual box at the final basis (objective units).
    double certificate = 0.0;
};

WeightedQrResult solve_weighted_qr(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& weight, const Eigen::VectorXd& level,
                                   int max_iterations);

double weighted_check_objective(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& weight, const Eigen::VectorXd& level,
                                const Eigen::VectorXd& beta);

}  // namespace dmlcqr::detail
