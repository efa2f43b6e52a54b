#include "qr_lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace dmlcqr::detail {

double weighted_check_objective(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& weight, const Eigen::VectorXd& level,
                                const Eigen::VectorXd& beta) {
    const Eigen::VectorXd r = y - a * beta;
    double total = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const double u = r[i];
        total += weight[i] * (u > 0.0 ? level[i] * u : (level[i] - 1.0) * u);
    }
    return total;
}

namespace {

// Longest step in [0, 1] keeping v + step * dv >= 0, damped.
double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double step = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv[i] < 0.0) step = std::min(step, -v[i] / dv[i]);
    }
    return std::min(1.0, 0.99995 * step);
}

struct Basis {
    std::vector<Eigen::Index> rows;
    bool complete = false;
};

// Greedy selection of linearly independent rows ordered by |residual|.
Basis pick_basis(const Eigen::MatrixXd& a, const Eigen::VectorXd& resid) {
    const auto m = a.rows();
    const auto p = a.cols();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Eigen::VectorXd dist(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double nrm = a.row(i).norm();
        dist[i] = nrm > 0.0 ? std::abs(resid[i]) / nrm : std::numeric_limits<double>::infinity();
    }
    std::stable_sort(order.begin(), order.end(), [&](auto l, auto r) { return dist[l] < dist[r]; });

    Basis basis;
    Eigen::MatrixXd q(p, p);
    Eigen::Index k = 0;
    for (const auto i : order) {
        if (k == p) break;
        Eigen::VectorXd v = a.row(i).transpose();
        const double n0 = v.norm();
        if (n0 == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index j = 0; j < k; ++j) v -= q.col(j).dot(v) * q.col(j);
        }
        const double nv = v.norm();
        if (nv > 1e-9 * n0) {
            q.col(k) = v / nv;
            basis.rows.push_back(i);
            ++k;
        }
    }
    basis.complete = (k == p);
    return basis;
}

// Dual multipliers for the basis rows; returns the largest box violation.
double basis_certificate(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const Eigen::VectorXd& weight,
                         const Eigen::VectorXd& level, const Eigen::VectorXd& beta,
                         const std::vector<Eigen::Index>& rows) {
    const auto p = a.cols();
    std::vector<char> in_basis(static_cast<std::size_t>(a.rows()), 0);
    for (auto i : rows) in_basis[static_cast<std::size_t>(i)] = 1;
    const Eigen::VectorXd r = y - a * beta;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        if (in_basis[static_cast<std::size_t>(i)]) continue;
        const double d = r[i] > 0.0 ? weight[i] * level[i] : weight[i] * (level[i] - 1.0);
        g += d * a.row(i).transpose();
    }
    Eigen::MatrixXd ab(p, p);
    for (Eigen::Index k = 0; k < p; ++k) ab.col(k) = a.row(rows[static_cast<std::size_t>(k)]).transpose();
    const Eigen::VectorXd db = ab.partialPivLu().solve(-g);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < p; ++k) {
        const auto i = rows[static_cast<std::size_t>(k)];
        const double lo = weight[i] * (level[i] - 1.0);
        const double hi = weight[i] * level[i];
        worst = std::max({worst, lo - db[k], db[k] - hi});
    }
    return worst;
}

// Solves ab * beta = yb. Rows with a single nonzero entry pin their
// coefficient exactly (penalty rows give exact zeros); the rest is solved by LU.
Eigen::VectorXd solve_basis(const Eigen::MatrixXd& ab, const Eigen::VectorXd& yb) {
    const auto p = ab.cols();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    std::vector<char> pinned(static_cast<std::size_t>(p), 0);
    std::vector<char> used(static_cast<std::size_t>(p), 0);
    for (Eigen::Index k = 0; k < p; ++k) {
        Eigen::Index nz = 0, col = -1;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (ab(k, j) != 0.0) {
                ++nz;
                col = j;
            }
        }
        if (nz == 1 && !pinned[static_cast<std::size_t>(col)]) {
            beta[col] = yb[k] / ab(k, col);
            pinned[static_cast<std::size_t>(col)] = 1;
            used[static_cast<std::size_t>(k)] = 1;
        }
    }
    std::vector<Eigen::Index> free_cols, free_rows;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!pinned[static_cast<std::size_t>(j)]) free_cols.push_back(j);
        if (!used[static_cast<std::size_t>(j)]) free_rows.push_back(j);
    }
    const auto f = static_cast<Eigen::Index>(free_cols.size());
    if (f == 0) return beta;
    Eigen::MatrixXd sub(f, f);
    Eigen::VectorXd rhs(f);
    for (Eigen::Index r = 0; r < f; ++r) {
        const auto k = free_rows[static_cast<std::size_t>(r)];
        rhs[r] = yb[k] - ab.row(k).dot(beta);
        for (Eigen::Index c = 0; c < f; ++c) sub(r, c) = ab(k, free_cols[static_cast<std::size_t>(c)]);
    }
    const Eigen::VectorXd sol = sub.partialPivLu().solve(rhs);
    for (Eigen::Index c = 0; c < f; ++c) beta[free_cols[static_cast<std::size_t>(c)]] = sol[c];
    return beta;
}

}  // namespace

WeightedQrResult solve_weighted_qr(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& weight, const Eigen::VectorXd& level,
                                   int max_iterations) {
    const auto m = a.rows();
    const auto p = a.cols();
    WeightedQrResult res;

    // Dual LP: max (w.y)'s  s.t. At' s = At'(1 - level), 0 <= s <= 1,
    // with At = diag(w) a. The coefficients are minus its multipliers.
    const Eigen::MatrixXd at = weight.asDiagonal() * a;
    const Eigen::VectorXd c = -weight.cwiseProduct(y);
    const Eigen::VectorXd b = at.transpose() * (Eigen::VectorXd::Ones(m) - level);

    Eigen::VectorXd x = Eigen::VectorXd::Ones(m) - level;
    Eigen::VectorXd sl = level;

    const double ridge_base = 1e-13;
    Eigen::MatrixXd h = at.transpose() * at;
    const double tr = std::max(h.trace() / static_cast<double>(std::max<Eigen::Index>(p, 1)), 1e-300);
    h.diagonal().array() += ridge_base * tr;
    Eigen::VectorXd dual = h.ldlt().solve(at.transpose() * c);
    Eigen::VectorXd r = c - at * dual;
    const double shift = std::max(0.1 * r.cwiseAbs().mean(), 1e-8);
    Eigen::VectorXd z = r.cwiseMax(0.0).array() + shift;
    Eigen::VectorXd w = (-r).cwiseMax(0.0).array() + shift;

    const double scale = 1.0 + std::abs(c.dot(x));
    int it = 0;
    double gap = x.dot(z) + sl.dot(w);
    for (; it < max_iterations; ++it) {
        gap = x.dot(z) + sl.dot(w);
        if (gap <= 1e-12 * scale) {
            res.converged = true;
            break;
        }
        const double mu = gap / static_cast<double>(2 * m);
        const Eigen::VectorXd q = (z.cwiseQuotient(x) + w.cwiseQuotient(sl)).cwiseInverse();
        const Eigen::MatrixXd aq = q.cwiseSqrt().asDiagonal() * at;
        Eigen::MatrixXd hq = Eigen::MatrixXd::Zero(p, p);
        hq.selfadjointView<Eigen::Lower>().rankUpdate(aq.transpose());
        hq.diagonal().array() += ridge_base * std::max(hq.trace() / static_cast<double>(p), 1e-300);
        const Eigen::LDLT<Eigen::MatrixXd, Eigen::Lower> fact(hq);
        const Eigen::VectorXd rp = b - at.transpose() * x;
        const Eigen::VectorXd rd = c - at * dual - z + w;

        auto direction = [&](const Eigen::VectorXd& rxz, const Eigen::VectorXd& rsw, Eigen::VectorXd& dx,
                             Eigen::VectorXd& dy, Eigen::VectorXd& dz, Eigen::VectorXd& dw) {
            const Eigen::VectorXd tmp = rxz.cwiseQuotient(x) - rsw.cwiseQuotient(sl) - rd;
            dy = fact.solve(rp - at.transpose() * q.cwiseProduct(tmp));
            dx = q.cwiseProduct(at * dy + tmp);
            dz = (rxz - z.cwiseProduct(dx)).cwiseQuotient(x);
            dw = (rsw + w.cwiseProduct(dx)).cwiseQuotient(sl);
        };

        Eigen::VectorXd dx, dy, dz, dw;
        direction(-x.cwiseProduct(z), -sl.cwiseProduct(w), dx, dy, dz, dw);
        double ap = std::min(max_step(x, dx), max_step(sl, -dx));
        double ad = std::min(max_step(z, dz), max_step(w, dw));
        const double mu_aff = ((x + ap * dx).dot(z + ad * dz) + (sl - ap * dx).dot(w + ad * dw)) /
                              static_cast<double>(2 * m);
        const double sigma = std::pow(mu_aff / mu, 3.0);
        const Eigen::VectorXd rxz = -x.cwiseProduct(z) - dx.cwiseProduct(dz) + Eigen::VectorXd::Constant(m, sigma * mu);
        const Eigen::VectorXd rsw = -sl.cwiseProduct(w) + dx.cwiseProduct(dw) + Eigen::VectorXd::Constant(m, sigma * mu);
        direction(rxz, rsw, dx, dy, dz, dw);
        ap = std::min(max_step(x, dx), max_step(sl, -dx));
        ad = std::min(max_step(z, dz), max_step(w, dw));
        x += ap * dx;
        sl -= ap * dx;
        dual += ad * dy;
        z += ad * dz;
        w += ad * dw;
    }
    res.iterations = it;

    Eigen::VectorXd beta = -dual;
    double obj = weighted_check_objective(a, y, weight, level, beta);

    // Crossover to a vertex of the optimal face.
    const Basis basis = pick_basis(a, y - a * beta);
    if (basis.complete) {
        Eigen::MatrixXd ab(p, p);
        Eigen::VectorXd yb(p);
        for (Eigen::Index k = 0; k < p; ++k) {
            ab.row(k) = a.row(basis.rows[static_cast<std::size_t>(k)]);
            yb[k] = y[basis.rows[static_cast<std::size_t>(k)]];
        }
        const Eigen::VectorXd vb = solve_basis(ab, yb);
        const double vobj = weighted_check_objective(a, y, weight, level, vb);
        if (vb.allFinite() && vobj <= obj + 1e-11 * (1.0 + std::abs(obj))) {
            beta = vb;
            obj = vobj;
            res.vertex = true;
            res.certificate = basis_certificate(a, y, weight, level, beta, basis.rows);
            // Tied residuals make the basis duals non-unique; a converged
            // interior run still bounds the vertex suboptimality by its gap.
            if (res.converged) res.certificate = std::min(res.certificate, gap);
        }
    }
    if (!res.vertex) {
        // Interior iterate: the duality gap bounds the suboptimality.
        res.certificate = gap;
    }
    res.beta = std::move(beta);
    res.objective = obj;
    return res;
}

}  // namespace dmlcqr::detail
