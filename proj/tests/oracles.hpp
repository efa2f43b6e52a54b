#pragma once
// Test-only reference implementations. Nothing here calls into the library's
// solvers, so agreement is an independent check.
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

struct LpSolution {
    Eigen::VectorXd beta;
    double objective = 0.0;
    bool ok = false;
};

// Dense tableau simplex (Bland's rule) for
//   min sum_i w_i (q_i u_i + (1 - q_i) v_i)
//   s.t. X (b+ - b-) + u - v = y,  b+, b-, u, v >= 0.
inline LpSolution quantile_lp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                              const Eigen::VectorXd& q) {
    const auto m = x.rows();
    const auto p = x.cols();
    const auto ncol = 2 * p + 2 * m;
    Eigen::MatrixXd tab = Eigen::MatrixXd::Zero(m, ncol + 1);
    Eigen::VectorXd cost = Eigen::VectorXd::Zero(ncol);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double sgn = y[i] >= 0.0 ? 1.0 : -1.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            tab(i, j) = sgn * x(i, j);
            tab(i, p + j) = -sgn * x(i, j);
        }
        tab(i, 2 * p + i) = sgn;
        tab(i, 2 * p + m + i) = -sgn;
        tab(i, ncol) = sgn * y[i];
        cost[2 * p + i] = w[i] * q[i];
        cost[2 * p + m + i] = w[i] * (1.0 - q[i]);
    }
    std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = y[i] >= 0.0 ? 2 * p + i : 2 * p + m + i;

    LpSolution sol;
    for (int iter = 0; iter < 100000; ++iter) {
        // Reduced costs.
        Eigen::VectorXd cb(m);
        for (Eigen::Index i = 0; i < m; ++i) cb[i] = cost[basis[static_cast<std::size_t>(i)]];
        Eigen::Index enter = -1;
        for (Eigen::Index j = 0; j < ncol; ++j) {
            const double rc = cost[j] - cb.dot(tab.col(j));
            if (rc < -1e-11) {
                enter = j;
                break;
            }
        }
        if (enter < 0) {
            sol.ok = true;
            break;
        }
        Eigen::Index leave = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < m; ++i) {
            if (tab(i, enter) > 1e-12) {
                const double ratio = tab(i, ncol) / tab(i, enter);
                if (ratio < best - 1e-14 ||
                    (std::abs(ratio - best) <= 1e-14 && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
                    best = ratio;
                    leave = i;
                }
            }
        }
        if (leave < 0) return sol;  // unbounded
        tab.row(leave) /= tab(leave, enter);
        for (Eigen::Index i = 0; i < m; ++i) {
            if (i != leave && tab(i, enter) != 0.0) tab.row(i) -= tab(i, enter) * tab.row(leave);
        }
        basis[static_cast<std::size_t>(leave)] = enter;
    }
    Eigen::VectorXd vars = Eigen::VectorXd::Zero(ncol);
    for (Eigen::Index i = 0; i < m; ++i) vars[basis[static_cast<std::size_t>(i)]] = tab(i, ncol);
    sol.beta = vars.head(p) - vars.segment(p, p);
    sol.objective = cost.dot(vars);
    return sol;
}

// Damped Newton logistic MLE (Armijo backtracking on the mean deviance).
inline Eigen::VectorXd logit_mle(const Eigen::MatrixXd& x, const Eigen::VectorXd& t) {
    const auto n = static_cast<double>(x.rows());
    auto loss = [&](const Eigen::VectorXd& a) {
        const Eigen::VectorXd e = x * a;
        double s = 0.0;
        for (Eigen::Index i = 0; i < e.size(); ++i) s += std::log1p(std::exp(-std::abs(e[i]))) + std::max(e[i], 0.0) - t[i] * e[i];
        return s / n;
    };
    Eigen::VectorXd a = Eigen::VectorXd::Zero(x.cols());
    for (int it = 0; it < 100; ++it) {
        const Eigen::VectorXd e = x * a;
        const Eigen::VectorXd pr = (1.0 + (-e).array().exp()).inverse().matrix();
        const Eigen::VectorXd g = x.transpose() * (pr - t) / n;
        const Eigen::VectorXd wt = pr.array() * (1.0 - pr.array());
        const Eigen::MatrixXd h = x.transpose() * wt.asDiagonal() * x / n;
        const Eigen::VectorXd step = h.llt().solve(g);
        double s = 1.0;
        const double f0 = loss(a);
        while (loss(a - s * step) > f0 - 1e-4 * s * g.dot(step) && s > 1e-8) s *= 0.5;
        a -= s * step;
        if (g.norm() < 1e-13) break;
    }
    return a;
}

// Weighted least squares via normal equations.
inline Eigen::VectorXd wls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
    const Eigen::MatrixXd xtwx = x.transpose() * w.asDiagonal() * x;
    return xtwx.llt().solve(x.transpose() * w.cwiseProduct(y));
}

inline Eigen::MatrixXd gaussian_matrix(Eigen::Index n, Eigen::Index p, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd m(n, p);
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index i = 0; i < n; ++i) m(i, j) = nd(rng);
    return m;
}

}  // namespace oracle
