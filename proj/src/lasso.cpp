#include "dmlcqr/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <fmt/format.h>

#include "dmlcqr/design.hpp"
#include "dmlcqr/errors.hpp"
#include "dmlcqr/stats.hpp"
#include "qr_lp.hpp"

namespace dmlcqr {

void PenaltyRule::validate() const {
    if (!(c > 1.0)) throw ParameterError(fmt::format("penalty constant c must exceed 1, got {}", c));
    if (gamma > 0.0 && !(gamma < 1.0)) throw ParameterError("penalty gamma must lie in (0,1)");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("penalty alpha must lie in (0,1)");
    if (ndraws < 100) throw ParameterError("penalty ndraws must be at least 100");
    if (loading_rounds < 1) throw ParameterError("loading_rounds must be at least 1");
}

double PenaltyRule::gamma_for(std::ptrdiff_t n) const {
    if (gamma > 0.0) return gamma;
    return 0.1 / std::log(static_cast<double>(std::max<std::ptrdiff_t>(n, 3)));
}

double check_loss(double u, double h) {
    if (!(h > 0.0 && h < 1.0)) throw ParameterError(fmt::format("quantile level {} outside (0,1)", h));
    return (h - (u <= 0.0 ? 1.0 : 0.0)) * u;
}

double logistic(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

std::vector<Eigen::Index> support_of(const Eigen::VectorXd& beta) {
    std::vector<Eigen::Index> s;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        if (beta[j] != 0.0) s.push_back(j);
    }
    return s;
}

Eigen::VectorXd column_rms(const Eigen::MatrixXd& x) {
    return (x.colwise().squaredNorm().transpose() / static_cast<double>(x.rows())).cwiseSqrt();
}

namespace {

double soft_threshold(double g, double k) {
    if (g > k) return g - k;
    if (g < -k) return g + k;
    return 0.0;
}

void check_dims(const Eigen::MatrixXd& x, Eigen::Index len, const Eigen::VectorXd& loadings, const char* who) {
    if (x.rows() != len) throw ParameterError(fmt::format("{}: {} rows but response has {}", who, x.rows(), len));
    if (loadings.size() != x.cols()) {
        throw ParameterError(fmt::format("{}: {} loadings for {} columns", who, loadings.size(), x.cols()));
    }
    if ((loadings.array() < 0.0).any()) throw ParameterError(fmt::format("{}: negative loading", who));
}

double l1_penalty(const Eigen::VectorXd& beta, double lambda, const Eigen::VectorXd& loadings, double n) {
    return lambda / n * loadings.cwiseProduct(beta).cwiseAbs().sum();
}

double logit_loss(const Eigen::VectorXd& eta, const Eigen::VectorXd& t) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double e = eta[i];
        // log(1 + exp(e)) computed stably.
        const double softplus = e > 0.0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        total += softplus - t[i] * e;
    }
    return total / static_cast<double>(eta.size());
}

// Largest first-order violation given gradient g of the smooth part.
double kkt_violation(const Eigen::VectorXd& g, const Eigen::VectorXd& beta, const Eigen::VectorXd& kappa) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < g.size(); ++j) {
        double v;
        if (beta[j] != 0.0) {
            v = std::abs(g[j] + kappa[j] * (beta[j] > 0.0 ? 1.0 : -1.0));
        } else {
            v = std::max(0.0, std::abs(g[j]) - kappa[j]);
        }
        worst = std::max(worst, v);
    }
    return worst;
}

LassoFit finish(Eigen::VectorXd beta, double lambda, const Eigen::VectorXd& loadings, int iterations,
                double objective, bool converged, double kkt) {
    LassoFit fit;
    fit.support = support_of(beta);
    fit.coefficients = std::move(beta);
    fit.lambda = lambda;
    fit.loadings = loadings;
    fit.iterations = iterations;
    fit.objective = objective;
    fit.converged = converged;
    fit.kkt_residual = kkt;
    return fit;
}

}  // namespace

LassoFit lasso_ls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                  double lambda, const Eigen::VectorXd& loadings, const SolverOptions& opts) {
    check_dims(x, y.size(), loadings, "lasso_ls");
    if (weights.size() != y.size()) throw ParameterError("lasso_ls: weights length mismatch");
    if ((weights.array() < 0.0).any()) throw ParameterError("lasso_ls: negative weight");
    if (!(lambda >= 0.0)) throw ParameterError("lasso_ls: negative lambda");
    const auto n = static_cast<double>(x.rows());
    const auto p = x.cols();
    const Eigen::Index positive = (weights.array() > 0.0).count();
    const Eigen::Index p_free = (loadings.array() == 0.0).count();
    if (positive < p_free) {
        throw DegenerateDataError(
            fmt::format("lasso_ls: {} positive weights for {} unpenalized columns", positive, p_free));
    }

    const Eigen::VectorXd kappa = loadings * (lambda / n);
    const Eigen::MatrixXd wx = weights.asDiagonal() * x;
    const Eigen::VectorXd curv = (wx.cwiseProduct(x)).colwise().sum().transpose() / n;
    const double yscale = std::sqrt(weights.dot(y.cwiseProduct(y)) / n);
    const double tol = opts.ls_tolerance * std::max(1.0, yscale * std::sqrt(curv.maxCoeff()));

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd r = y;
    auto gradient = [&]() -> Eigen::VectorXd { return -2.0 * (wx.transpose() * r) / n; };
    auto update = [&](Eigen::Index j) {
        if (curv[j] <= 0.0) return 0.0;
        const double g = wx.col(j).dot(r) / n + curv[j] * beta[j];
        const double nb = soft_threshold(g, 0.5 * kappa[j]) / curv[j];
        const double delta = nb - beta[j];
        if (delta != 0.0) {
            r -= delta * x.col(j);
            beta[j] = nb;
        }
        return std::abs(delta) * std::sqrt(curv[j]);
    };

    int it = 0;
    double kkt = std::numeric_limits<double>::infinity();
    for (; it < opts.max_iterations; ++it) {
        for (Eigen::Index j = 0; j < p; ++j) update(j);
        // Sweep the active set until it settles, then re-check everything.
        for (int inner = 0; inner < 1000; ++inner) {
            double change = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) {
                if (beta[j] != 0.0 || kappa[j] == 0.0) change = std::max(change, update(j));
            }
            if (change < 0.1 * tol) break;
        }
        r = y - x * beta;
        kkt = kkt_violation(gradient(), beta, kappa);
        if (kkt <= tol) break;
    }
    if (!(kkt <= tol)) {
        throw FitError(fmt::format("lasso_ls did not converge in {} iterations (kkt {:.3g})", it, kkt), beta);
    }
    const double obj = weights.dot(r.cwiseProduct(r)) / n + l1_penalty(beta, lambda, loadings, n);
    return finish(std::move(beta), lambda, loadings, it + 1, obj, true, kkt);
}

LassoFit lasso_logit(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, double lambda,
                     const Eigen::VectorXd& loadings, const SolverOptions& opts) {
    check_dims(x, t.size(), loadings, "lasso_logit");
    if (!(lambda >= 0.0)) throw ParameterError("lasso_logit: negative lambda");
    const double ones = t.sum();
    if (ones < 1.0 || ones > static_cast<double>(t.size()) - 1.0) {
        throw DegenerateDataError("lasso_logit: outcome has a single class");
    }
    const auto n = static_cast<double>(x.rows());
    const auto p = x.cols();
    const Eigen::VectorXd kappa = loadings * (lambda / n);

    auto smooth = [&](const Eigen::VectorXd& a) { return logit_loss(x * a, t); };
    auto grad = [&](const Eigen::VectorXd& a) -> Eigen::VectorXd {
        Eigen::VectorXd eta = x * a;
        for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = logistic(eta[i]) - t[i];
        return x.transpose() * eta / n;
    };
    auto total = [&](const Eigen::VectorXd& a) { return smooth(a) + kappa.cwiseProduct(a).cwiseAbs().sum(); };

    // Start at the intercept-only MLE when an all-ones column exists.
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        if ((x.col(j).array() == 1.0).all()) {
            const double m = ones / n;
            alpha[j] = std::log(m / (1.0 - m));
            break;
        }
    }

    // Lipschitz estimate: 0.25 * largest eigenvalue of X'X/n by power iteration.
    Eigen::VectorXd v = Eigen::VectorXd::Ones(p) / std::sqrt(static_cast<double>(p));
    double eig = 1.0;
    for (int k = 0; k < 50; ++k) {
        Eigen::VectorXd w = x.transpose() * (x * v) / n;
        eig = w.norm();
        if (eig == 0.0) break;
        v = w / eig;
    }
    double step = 1.0 / std::max(0.25 * eig * 1.05, 1e-12);

    Eigen::VectorXd prev = alpha;
    Eigen::VectorXd yk = alpha;
    double tk = 1.0;
    double fprev = total(alpha);
    double kkt = std::numeric_limits<double>::infinity();
    const double tol = opts.logit_tolerance;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        const Eigen::VectorXd g = grad(yk);
        const double fy = smooth(yk);
        Eigen::VectorXd next(p);
        while (true) {
            for (Eigen::Index j = 0; j < p; ++j) next[j] = soft_threshold(yk[j] - step * g[j], step * kappa[j]);
            const Eigen::VectorXd diff = next - yk;
            if (smooth(next) <= fy + g.dot(diff) + 0.5 / step * diff.squaredNorm() + 1e-15) break;
            step *= 0.5;
        }
        const double fnext = total(next);
        if (fnext > fprev) {
            // Adaptive restart: drop momentum.
            tk = 1.0;
            yk = alpha;
            continue;
        }
        prev = alpha;
        alpha = next;
        fprev = fnext;
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
        yk = alpha + ((tk - 1.0) / tn) * (alpha - prev);
        tk = tn;
        if (alpha.cwiseAbs().maxCoeff() > 1e6) {
            throw FitError("lasso_logit: coefficient norm diverged (perfect separation?)", alpha);
        }
        if (it % 5 == 0) {
            kkt = kkt_violation(grad(alpha), alpha, kappa);
            if (kkt <= tol) break;
        }
    }
    if (!(kkt <= tol)) {
        kkt = kkt_violation(grad(alpha), alpha, kappa);
        if (!(kkt <= tol)) {
            throw FitError(fmt::format("lasso_logit did not converge in {} iterations (kkt {:.3g}); "
                                       "the classes may be separable",
                                       it, kkt),
                           alpha);
        }
    }
    return finish(alpha, lambda, loadings, it + 1, total(alpha), true, kkt);
}

LassoFit lasso_qr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& keep,
                  const Eigen::VectorXd& levels, double lambda, const Eigen::VectorXd& loadings,
                  const SolverOptions& opts) {
    check_dims(x, y.size(), loadings, "lasso_qr");
    if (keep.size() != y.size() || levels.size() != y.size()) throw ParameterError("lasso_qr: length mismatch");
    if (!(lambda >= 0.0)) throw ParameterError("lasso_qr: negative lambda");
    const auto n = static_cast<double>(x.rows());
    const auto p = x.cols();

    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (keep[i] < 0.0) throw ParameterError("lasso_qr: negative keep weight");
        if (keep[i] > 0.0) {
            if (!(levels[i] > 0.0 && levels[i] < 1.0)) {
                throw ParameterError(fmt::format("lasso_qr: level {} at kept row {} outside (0,1)", levels[i], i));
            }
            rows.push_back(i);
        }
    }
    const auto p_free = (loadings.array() == 0.0).count();
    if (static_cast<Eigen::Index>(rows.size()) < p_free + 2) {
        throw DegenerateDataError(
            fmt::format("lasso_qr: {} kept observations for {} unpenalized columns", rows.size(), p_free));
    }

    // Columns that vanish on the kept rows carry no information.
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < p; ++j) {
        bool any = false;
        for (auto i : rows) {
            if (x(i, j) != 0.0) {
                any = true;
                break;
            }
        }
        if (any) cols.push_back(j);
    }
    std::vector<Eigen::Index> pen;
    for (auto j : cols) {
        if (loadings[j] > 0.0 && lambda > 0.0) pen.push_back(j);
    }
    const auto m = static_cast<Eigen::Index>(rows.size() + pen.size());
    const auto q = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, q);
    Eigen::VectorXd yy = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd w(m), lev(m);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto i = rows[r];
        const auto rr = static_cast<Eigen::Index>(r);
        for (Eigen::Index c = 0; c < q; ++c) a(rr, c) = x(i, cols[static_cast<std::size_t>(c)]);
        yy[rr] = y[i];
        w[rr] = keep[i];
        lev[rr] = levels[i];
    }
    for (std::size_t k = 0; k < pen.size(); ++k) {
        const auto rr = static_cast<Eigen::Index>(rows.size() + k);
        const auto c = std::find(cols.begin(), cols.end(), pen[k]) - cols.begin();
        a(rr, c) = 1.0;
        w[rr] = 2.0 * lambda * loadings[pen[k]];
        lev[rr] = 0.5;
    }

    const auto res = detail::solve_weighted_qr(a, yy, w, lev, 200);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    for (Eigen::Index c = 0; c < q; ++c) beta[cols[static_cast<std::size_t>(c)]] = res.beta[c];
    const double kkt = res.certificate / n;
    const bool ok = res.beta.allFinite() && kkt <= opts.qr_tolerance;
    if (!ok) {
        throw FitError(fmt::format("lasso_qr: subgradient certificate {:.3g} exceeds tolerance after {} iterations",
                                   kkt, res.iterations),
                       beta);
    }
    return finish(std::move(beta), lambda, loadings, res.iterations, res.objective / n, true, kkt);
}

double penalized_objective(const Problem& problem, const Eigen::VectorXd& beta, double lambda,
                           const Eigen::VectorXd& loadings) {
    return std::visit(
        [&](const auto& pr) -> double {
            using P = std::decay_t<decltype(pr)>;
            const auto n = static_cast<double>(pr.x.rows());
            double data = 0.0;
            if constexpr (std::is_same_v<P, LsProblem>) {
                const Eigen::VectorXd r = pr.y - pr.x * beta;
                data = pr.weights.dot(r.cwiseProduct(r)) / n;
            } else if constexpr (std::is_same_v<P, LogitProblem>) {
                data = logit_loss(pr.x * beta, pr.t);
            } else {
                const Eigen::VectorXd r = pr.y - pr.x * beta;
                for (Eigen::Index i = 0; i < r.size(); ++i) {
                    if (pr.keep[i] > 0.0) data += pr.keep[i] * check_loss(r[i], pr.levels[i]);
                }
                data /= n;
            }
            return data + l1_penalty(beta, lambda, loadings, n);
        },
        problem);
}

namespace {

std::vector<Eigen::Index> active_rows(const Problem& problem) {
    std::vector<Eigen::Index> rows;
    std::visit(
        [&](const auto& pr) {
            using P = std::decay_t<decltype(pr)>;
            for (Eigen::Index i = 0; i < pr.x.rows(); ++i) {
                if constexpr (std::is_same_v<P, LsProblem>) {
                    if (pr.weights[i] > 0.0) rows.push_back(i);
                } else if constexpr (std::is_same_v<P, QrProblem>) {
                    if (pr.keep[i] > 0.0) rows.push_back(i);
                } else {
                    rows.push_back(i);
                }
            }
        },
        problem);
    return rows;
}

// Damped Newton for the unpenalized logistic MLE.
Eigen::VectorXd logit_newton(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, int max_it, int& iterations) {
    const auto n = static_cast<double>(x.rows());
    Eigen::VectorXd a = Eigen::VectorXd::Zero(x.cols());
    double f = logit_loss(x * a, t);
    for (iterations = 0; iterations < max_it; ++iterations) {
        Eigen::VectorXd eta = x * a;
        Eigen::VectorXd pr(eta.size()), wt(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            pr[i] = logistic(eta[i]);
            wt[i] = pr[i] * (1.0 - pr[i]);
        }
        const Eigen::VectorXd g = x.transpose() * (pr - t) / n;
        Eigen::MatrixXd h = x.transpose() * wt.asDiagonal() * x / n;
        h.diagonal().array() += 1e-14 * std::max(h.trace(), 1e-300);
        const Eigen::VectorXd dir = h.ldlt().solve(g);
        // Under separation the gradient vanishes while the Newton step does not.
        if (dir.cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + a.cwiseAbs().maxCoeff())) return a;
        double s = 1.0;
        Eigen::VectorXd next = a - dir;
        double fn = logit_loss(x * next, t);
        while (fn > f - 1e-4 * s * g.dot(dir) && s > 1e-10) {
            s *= 0.5;
            next = a - s * dir;
            fn = logit_loss(x * next, t);
        }
        if (fn > f) {
            // No descent left at working precision.
            if (g.cwiseAbs().maxCoeff() <= 1e-8) return a;
            break;
        }
        a = next;
        f = fn;
        if (a.cwiseAbs().maxCoeff() > 1e6) {
            throw FitError("logistic refit diverged (perfect separation)", a);
        }
    }
    throw FitError("logistic refit did not converge (coefficients drifting, likely separation)", a);
}

}  // namespace

LassoFit refit_on(const Problem& problem, std::vector<Eigen::Index> columns, const SolverOptions& opts) {
    std::sort(columns.begin(), columns.end());
    columns.erase(std::unique(columns.begin(), columns.end()), columns.end());
    return std::visit(
        [&](const auto& pr) -> LassoFit {
            using P = std::decay_t<decltype(pr)>;
            const auto p = pr.x.cols();
            const auto rows = active_rows(problem);
            // Rank scan over the rows that carry weight.
            Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(columns.size()));
            for (std::size_t c = 0; c < columns.size(); ++c) {
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    sub(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = pr.x(rows[r], columns[c]);
                }
            }
            const auto indep = independent_columns(sub);
            std::vector<Eigen::Index> use;
            std::vector<Eigen::Index> dropped;
            {
                std::size_t k = 0;
                for (std::size_t c = 0; c < columns.size(); ++c) {
                    if (k < indep.size() && indep[k] == static_cast<Eigen::Index>(c)) {
                        use.push_back(columns[c]);
                        ++k;
                    } else {
                        dropped.push_back(columns[c]);
                    }
                }
            }
            Eigen::MatrixXd xs(pr.x.rows(), static_cast<Eigen::Index>(use.size()));
            for (std::size_t c = 0; c < use.size(); ++c) xs.col(static_cast<Eigen::Index>(c)) = pr.x.col(use[c]);
            const Eigen::VectorXd zero_load = Eigen::VectorXd::Zero(xs.cols());

            Eigen::VectorXd coef;
            int iterations = 1;
            double kkt = 0.0;
            if (use.empty()) {
                coef.resize(0);
            } else if constexpr (std::is_same_v<P, LsProblem>) {
                const Eigen::VectorXd sw = pr.weights.cwiseSqrt();
                const Eigen::MatrixXd a = sw.asDiagonal() * xs;
                coef = a.colPivHouseholderQr().solve(sw.cwiseProduct(pr.y));
                const Eigen::VectorXd r = pr.y - xs * coef;
                kkt = (2.0 * xs.transpose() * pr.weights.cwiseProduct(r) / static_cast<double>(xs.rows()))
                          .cwiseAbs()
                          .maxCoeff();
            } else if constexpr (std::is_same_v<P, LogitProblem>) {
                coef = logit_newton(xs, pr.t, 200, iterations);
            } else {
                const auto fit = lasso_qr(xs, pr.y, pr.keep, pr.levels, 0.0, zero_load, opts);
                coef = fit.coefficients;
                iterations = fit.iterations;
                kkt = fit.kkt_residual;
            }
            Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
            for (std::size_t c = 0; c < use.size(); ++c) beta[use[c]] = coef[static_cast<Eigen::Index>(c)];
            const Eigen::VectorXd zl = Eigen::VectorXd::Zero(p);
            const double obj = penalized_objective(problem, beta, 0.0, zl);
            auto fit = finish(std::move(beta), 0.0, zl, iterations, obj, true, kkt);
            fit.dropped_collinear = std::move(dropped);
            return fit;
        },
        problem);
}

LassoFit post_lasso(const LassoFit& fit, const Problem& problem, const std::vector<Eigen::Index>& forced,
                    const SolverOptions& opts) {
    std::vector<Eigen::Index> cols = forced;
    cols.insert(cols.end(), fit.support.begin(), fit.support.end());
    if (cols.empty()) throw ParameterError("post_lasso: empty support and no forced columns");
    // Forced columns come first so a collinear selected column is the one dropped.
    std::vector<Eigen::Index> ordered;
    std::set<Eigen::Index> seen;
    for (auto j : cols) {
        if (seen.insert(j).second) ordered.push_back(j);
    }
    std::vector<Eigen::Index> sorted = ordered;
    std::sort(sorted.begin(), sorted.end());
    if (sorted == ordered) return refit_on(problem, ordered, opts);

    // Permute columns so forced ones are scanned first, then map back.
    return std::visit(
        [&](const auto& pr) -> LassoFit {
            using P = std::decay_t<decltype(pr)>;
            const auto p = pr.x.cols();
            Eigen::MatrixXd xp(pr.x.rows(), p);
            std::vector<Eigen::Index> perm;  // new position -> original column
            perm.insert(perm.end(), ordered.begin(), ordered.end());
            for (Eigen::Index j = 0; j < p; ++j) {
                if (!seen.count(j)) perm.push_back(j);
            }
            for (Eigen::Index k = 0; k < p; ++k) xp.col(k) = pr.x.col(perm[static_cast<std::size_t>(k)]);
            std::vector<Eigen::Index> head(ordered.size());
            for (std::size_t k = 0; k < ordered.size(); ++k) head[k] = static_cast<Eigen::Index>(k);
            LassoFit out;
            if constexpr (std::is_same_v<P, LsProblem>) {
                out = refit_on(LsProblem{xp, pr.y, pr.weights}, head, opts);
            } else if constexpr (std::is_same_v<P, LogitProblem>) {
                out = refit_on(LogitProblem{xp, pr.t}, head, opts);
            } else {
                out = refit_on(QrProblem{xp, pr.y, pr.keep, pr.levels}, head, opts);
            }
            Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
            for (Eigen::Index k = 0; k < p; ++k) beta[perm[static_cast<std::size_t>(k)]] = out.coefficients[k];
            for (auto& d : out.dropped_collinear) d = perm[static_cast<std::size_t>(d)];
            out.support = support_of(beta);
            out.coefficients = std::move(beta);
            return out;
        },
        problem);
}

double penalty_logit_level(std::ptrdiff_t n, std::ptrdiff_t p, const PenaltyRule& rule) {
    if (n < 2 || p < 1) throw ParameterError("penalty_logit_level: need n >= 2 and p >= 1");
    const double g = rule.gamma_for(n);
    const double arg = 1.0 - g / (2.0 * static_cast<double>(p + 1) * static_cast<double>(n));
    return rule.c * std::sqrt(static_cast<double>(n)) * normal_quantile(arg);
}

double penalty_ls_level(std::ptrdiff_t n, std::ptrdiff_t p, const PenaltyRule& rule) {
    if (n < 2 || p < 1) throw ParameterError("penalty_ls_level: need n >= 2 and p >= 1");
    const double g = rule.gamma_for(n);
    const double arg = 1.0 - g / (2.0 * static_cast<double>(p));
    return rule.c * std::sqrt(static_cast<double>(n)) * 2.0 * normal_quantile(arg);
}

double penalty_qr_level(const Eigen::MatrixXd& x, const Eigen::VectorXd& keep, const Eigen::VectorXd& levels,
                        const PenaltyRule& rule) {
    rule.validate();
    const auto n = x.rows();
    if (keep.size() != n || levels.size() != n) throw ParameterError("penalty_qr_level: length mismatch");
    if (!(keep.array() > 0.0).any()) throw DegenerateDataError("penalty_qr_level: no kept observations");
    const Eigen::VectorXd gam = column_rms(x);
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (gam[j] > 0.0) cols.push_back(j);
    }
    if (cols.empty()) return 0.0;

    std::mt19937_64 rng(rule.seed);
    const auto draws = static_cast<Eigen::Index>(rule.ndraws);
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, draws);
    for (Eigen::Index b = 0; b < draws; ++b) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            if (keep[i] > 0.0) e(i, b) = keep[i] * (levels[i] - (u <= levels[i] ? 1.0 : 0.0));
        }
    }
    const Eigen::MatrixXd g = x.transpose() * e / static_cast<double>(n);
    std::vector<double> stats(static_cast<std::size_t>(draws));
    for (Eigen::Index b = 0; b < draws; ++b) {
        double mx = 0.0;
        for (auto j : cols) mx = std::max(mx, std::abs(g(j, b)) / gam[j]);
        stats[static_cast<std::size_t>(b)] = mx;
    }
    return rule.c * static_cast<double>(n) * empirical_quantile(stats, 1.0 - rule.alpha);
}

Eigen::VectorXd initial_loadings(const Problem& problem, const std::vector<Eigen::Index>& unpenalized) {
    return std::visit(
        [&](const auto& pr) -> Eigen::VectorXd {
            using P = std::decay_t<decltype(pr)>;
            const auto n = static_cast<double>(pr.x.rows());
            Eigen::VectorXd score;
            if constexpr (std::is_same_v<P, LsProblem>) {
                const double wsum = pr.weights.sum();
                const double ybar = wsum > 0.0 ? pr.weights.dot(pr.y) / wsum : 0.0;
                score = pr.weights.cwiseProduct((pr.y.array() - ybar).matrix());
            } else if constexpr (std::is_same_v<P, LogitProblem>) {
                score = (pr.t.array() - pr.t.mean()).matrix();
            } else {
                throw ParameterError("initial_loadings: only logit and ls problems have iterated loadings");
            }
            Eigen::VectorXd g =
                (pr.x.array().colwise() * score.array()).square().colwise().sum().transpose().sqrt() / std::sqrt(n);
            for (auto j : unpenalized) g[j] = 0.0;
            return g;
        },
        problem);
}

Eigen::VectorXd penalty_loadings(const Problem& problem, double lambda, const Eigen::VectorXd& initial, int rounds,
                                 const std::vector<Eigen::Index>& unpenalized, const SolverOptions& opts) {
    if (rounds < 1) throw ParameterError("penalty_loadings: rounds must be >= 1");
    if (std::holds_alternative<QrProblem>(problem)) {
        throw ParameterError("penalty_loadings: quantile regression uses fixed loadings");
    }
    Eigen::VectorXd gam = initial;
    for (int r = 0; r < rounds; ++r) {
        LassoFit fit;
        Eigen::VectorXd score;
        if (const auto* ls = std::get_if<LsProblem>(&problem)) {
            fit = lasso_ls(ls->x, ls->y, ls->weights, lambda, gam, opts);
            const auto refit = post_lasso(fit, problem, unpenalized, opts);
            score = ls->weights.cwiseProduct(ls->y - ls->x * refit.coefficients);
        } else {
            const auto& lg = std::get<LogitProblem>(problem);
            fit = lasso_logit(lg.x, lg.t, lambda, gam, opts);
            Eigen::VectorXd coef = fit.coefficients;
            try {
                coef = post_lasso(fit, problem, unpenalized, opts).coefficients;
            } catch (const FitError&) {
                // Separated refit: the penalized fit still gives usable scores.
            }
            Eigen::VectorXd eta = lg.x * coef;
            score.resize(eta.size());
            for (Eigen::Index i = 0; i < eta.size(); ++i) score[i] = lg.t[i] - logistic(eta[i]);
        }
        const auto& x = std::visit([](const auto& pr) -> const Eigen::MatrixXd& { return pr.x; }, problem);
        const auto n = static_cast<double>(x.rows());
        Eigen::VectorXd next =
            (x.array().colwise() * score.array()).square().colwise().sum().transpose().sqrt() / std::sqrt(n);
        double pos_mean = 0.0;
        int cnt = 0;
        for (Eigen::Index j = 0; j < next.size(); ++j) {
            if (next[j] > 0.0) {
                pos_mean += next[j];
                ++cnt;
            }
        }
        pos_mean = cnt > 0 ? pos_mean / cnt : 1.0;
        next = next.cwiseMax(1e-6 * pos_mean);
        for (auto j : unpenalized) next[j] = 0.0;
        gam = next;
    }
    return gam;
}

}  // namespace dmlcqr
