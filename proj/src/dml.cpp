#include "dmlcqr/dml.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <future>
#include <limits>

#include <fmt/format.h>

#include "dmlcqr/errors.hpp"
#include "dmlcqr/folds.hpp"
#include "dmlcqr/stats.hpp"

namespace dmlcqr {

std::string to_string(DmlMode mode) { return mode == DmlMode::DML1 ? "DML1" : "DML2"; }

DmlMode parse_mode(const std::string& name) {
    std::string s;
    for (char c : name) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (s == "dml1") return DmlMode::DML1;
    if (s == "dml2") return DmlMode::DML2;
    throw ParameterError(fmt::format("unknown mode '{}' (expected DML1 or DML2)", name));
}

double score_psi(const ScoreInputs& o, double theta, double tau) {
    if (!(o.h > 0.0)) return 0.0;
    const double ind = (o.y - o.d * theta - o.index <= 0.0) ? 1.0 : 0.0;
    return (o.t * (o.h - ind) + (o.t - o.pi) * (1.0 - tau) / o.pi) * o.v;
}

double naive_score(const ScoreInputs& o, double theta) {
    if (!(o.h > 0.0) || !(o.t > 0.0)) return 0.0;
    const double ind = (o.y - o.d * theta - o.index <= 0.0) ? 1.0 : 0.0;
    return o.t * (o.h - ind) * o.d;
}

FoldScores FoldScores::from(const Sample& target, const NuisanceFit& nui) {
    FoldScores f;
    f.y = target.y;
    f.d = target.d;
    f.t = target.t;
    f.index = nui.index_hat;
    f.pi = nui.pi_hat;
    f.h = nui.h_hat;
    f.v = nui.v_hat;
    f.f = nui.f_hat;
    f.tau = nui.tau;
    return f;
}

Eigen::VectorXd FoldScores::psi(double theta) const {
    Eigen::VectorXd out(n());
    for (Eigen::Index i = 0; i < n(); ++i) out[i] = score_psi(row(i), theta, tau);
    return out;
}

bool FoldScores::degenerate() const {
    for (Eigen::Index i = 0; i < n(); ++i) {
        if (h[i] > 0.0 && v[i] != 0.0) return false;
    }
    return true;
}

double FoldScores::jacobian() const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n(); ++i) {
        if (h[i] > 0.0 && t[i] > 0.0) s += f[i] * d[i] * v[i];
    }
    return s / static_cast<double>(n());
}

ObjectiveValue fold_objective(const FoldScores& fold, double theta) {
    if (fold.n() == 0) throw ParameterError("fold_objective: empty fold");
    double m1 = 0.0, m2 = 0.0;
    for (Eigen::Index i = 0; i < fold.n(); ++i) {
        const double s = score_psi(fold.row(i), theta, fold.tau);
        m1 += s;
        m2 += s * s;
    }
    if (m2 == 0.0) return {0.0, true};
    const auto n = static_cast<double>(fold.n());
    m1 /= n;
    m2 /= n;
    return {m1 * m1 / m2, false};
}

SearchResult solve_theta(const std::function<double(double)>& objective, double lo, double hi,
                         const SearchOptions& opts) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw ParameterError(fmt::format("solve_theta: invalid interval [{}, {}]", lo, hi));
    }
    if (opts.grid_points < 2) throw ParameterError("solve_theta: need at least 2 grid points");
    const double tol = opts.tolerance > 0.0 ? opts.tolerance : 1e-5 * (hi - lo);
    SearchResult res;
    auto f = [&](double th) {
        ++res.evaluations;
        const double v = objective(th);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    const int G = opts.grid_points;
    const double step = (hi - lo) / (G - 1);
    std::vector<double> grid(G), val(G);
    for (int i = 0; i < G; ++i) {
        grid[i] = i == G - 1 ? hi : lo + step * i;
        val[i] = f(grid[i]);
    }
    const double m = *std::min_element(val.begin(), val.end());
    if (!std::isfinite(m)) throw SearchError("solve_theta: no finite objective value on the grid");
    auto ties = [&](double v) { return v <= m + 1e-12 * std::abs(m); };

    int a = -1, b = -1, runs = 0;
    for (int i = 0; i < G; ++i) {
        if (ties(val[i]) && (i == 0 || !ties(val[i - 1]))) {
            ++runs;
            if (a < 0) {
                a = i;
                b = i;
                while (b + 1 < G && ties(val[b + 1])) ++b;
            }
        }
    }
    res.multiple_plateaus = runs > 1;
    if (a == 0 && b == G - 1) {
        // Flat objective: nothing distinguishes the grid points.
        res.theta = lo;
        res.value = val[0];
        res.multiple_plateaus = true;
        res.at_boundary = true;
        return res;
    }

    double best = grid[a], vbest = val[a];
    if (a == b) {
        double l = grid[std::max(a - 1, 0)], r = grid[std::min(a + 1, G - 1)];
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = r - g * (r - l), x2 = l + g * (r - l);
        double f1 = f(x1), f2 = f(x2);
        while (r - l > tol) {
            if (f1 < vbest) best = x1, vbest = f1;
            if (f2 < vbest) best = x2, vbest = f2;
            if (f1 <= f2) {
                r = x2, x2 = x1, f2 = f1;
                x1 = r - g * (r - l);
                f1 = f(x1);
            } else {
                l = x1, x1 = x2, f1 = f2;
                x2 = l + g * (r - l);
                f2 = f(x2);
            }
        }
    }

    // Plateau edges by bisection on "value still minimal".
    auto edge = [&](double inner, double outer) {
        while (std::abs(outer - inner) > tol) {
            const double mid = 0.5 * (inner + outer);
            if (f(mid) <= vbest) inner = mid;
            else outer = mid;
        }
        return 0.5 * (inner + outer);
    };
    const double left_in = a == b ? best : grid[a];
    const double right_in = a == b ? best : grid[b];
    double left = a == 0 ? lo : edge(left_in, std::min(grid[a - 1], left_in));
    double right = b == G - 1 ? hi : edge(right_in, std::max(grid[b + 1], right_in));
    if (a == 0 && best <= lo + tol) left = lo;
    res.at_boundary = (a == 0) || (b == G - 1);
    const double mid = 0.5 * (left + right);
    const double vmid = f(mid);
    if (vmid <= vbest) {
        res.theta = mid;
        res.value = vmid;
    } else {
        res.theta = best;
        res.value = vbest;
    }
    return res;
}

double sandwich_variance(double jacobian, double meat) {
    if (!(std::abs(jacobian) >= 1e-8)) {
        throw SingularJacobianError(fmt::format("Jacobian estimate {} is numerically zero", jacobian));
    }
    return meat / (jacobian * jacobian);
}

VarianceResult variance_estimate(const std::vector<FoldScores>& folds, double theta) {
    if (folds.empty()) throw ParameterError("variance_estimate: no folds");
    VarianceResult out;
    for (const auto& fold : folds) {
        const double jk = fold.jacobian();
        out.fold_jacobians.push_back(jk);
        out.jacobian += jk;
        out.meat += fold.psi(theta).squaredNorm() / static_cast<double>(fold.n());
    }
    const auto K = static_cast<double>(folds.size());
    out.jacobian /= K;
    out.meat /= K;
    try {
        out.sigma2 = sandwich_variance(out.jacobian, out.meat);
    } catch (const SingularJacobianError& e) {
        throw SingularJacobianError(fmt::format("{}; per-fold contributions [{}]", e.what(),
                                                fmt::join(out.fold_jacobians, ", ")));
    }
    return out;
}

Interval confidence_interval(double theta, double sigma2, Eigen::Index N, double xi) {
    if (!(sigma2 > 0.0)) throw ParameterError("confidence_interval: sigma2 must be positive");
    if (!(xi > 0.0 && xi < 1.0)) throw ParameterError("confidence_interval: xi must lie in (0,1)");
    if (N <= 0) throw ParameterError("confidence_interval: N must be positive");
    const double half = normal_quantile(1.0 - xi / 2.0) * std::sqrt(sigma2 / static_cast<double>(N));
    return {theta - half, theta + half};
}

DmlEstimate estimate_from_folds(const std::vector<FoldScores>& folds, const std::vector<double>& pilots,
                                const DmlConfig& cfg, double se_proxy) {
    const int K = static_cast<int>(folds.size());
    if (K < 2) throw ParameterError("estimate_from_folds: cross-fitting needs K >= 2");
    if (static_cast<int>(pilots.size()) != K) throw ParameterError("estimate_from_folds: one pilot per fold");
    for (int k = 0; k < K; ++k) {
        if (folds[k].degenerate()) {
            throw DegenerateFoldError(fmt::format("fold {}: every score is identically zero", k));
        }
    }
    DmlEstimate est;
    est.mode = cfg.mode;
    est.K = K;
    est.tau = folds[0].tau;
    est.level = 1.0 - cfg.xi;

    double center = 0.0;
    for (double p : pilots) center += p;
    center /= K;
    double ss = 0.0;
    for (double p : pilots) ss += (p - center) * (p - center);
    if (!(se_proxy > 0.0)) se_proxy = std::sqrt(ss / (K - 1));
    double half = std::max(cfg.half_width_floor, 10.0 * se_proxy);
    if (!(half > 0.0)) half = 1.0;

    auto pooled = [&](double th) {
        double s = 0.0;
        for (const auto& fold : folds) s += fold_objective(fold, th).value;
        return s / K;
    };

    for (int attempt = 0;; ++attempt) {
        const double lo = center - half, hi = center + half;
        est.search_lo = lo;
        est.search_hi = hi;
        bool boundary = false, multiple = false;
        if (cfg.mode == DmlMode::DML1) {
            est.per_fold_theta.assign(K, 0.0);
            double sum = 0.0;
            for (int k = 0; k < K; ++k) {
                const auto r = solve_theta([&](double th) { return fold_objective(folds[k], th).value; }, lo, hi,
                                           cfg.search);
                est.per_fold_theta[k] = r.theta;
                sum += r.theta;
                boundary = boundary || r.at_boundary;
                multiple = multiple || r.multiple_plateaus;
            }
            est.theta = sum / K;
        } else {
            est.per_fold_theta.clear();
            const auto r = solve_theta(pooled, lo, hi, cfg.search);
            est.theta = r.theta;
            boundary = r.at_boundary;
            multiple = r.multiple_plateaus;
        }
        if (boundary && attempt < cfg.max_widen) {
            half *= 2.0;
            continue;
        }
        if (boundary) est.warnings.push_back("argmin on the search boundary after widening");
        if (multiple) est.warnings.push_back("objective minimized on several separated plateaus");
        break;
    }

    const VarianceResult var = variance_estimate(folds, est.theta);
    Eigen::Index N = 0;
    for (const auto& fold : folds) N += fold.n();
    est.n = N;
    est.sigma2 = var.sigma2;
    est.se = std::sqrt(var.sigma2 / static_cast<double>(N));
    const Interval ci = confidence_interval(est.theta, est.sigma2, N, cfg.xi);
    est.ci_lo = ci.lo;
    est.ci_hi = ci.hi;

    for (int k = 0; k < K; ++k) {
        FoldDiagnostics dg;
        dg.fold = k;
        dg.size = folds[k].n();
        dg.theta_pilot = pilots[k];
        dg.score_mean = folds[k].psi(est.theta).mean();
        dg.jacobian = var.fold_jacobians[k];
        dg.zero_over_zero = fold_objective(folds[k], est.theta).zero_over_zero;
        est.diagnostics.push_back(dg);
    }
    return est;
}

DmlEstimate estimate_dml(const Dataset& data, const DesignMatrix& design, const DmlConfig& cfg, std::uint64_t seed) {
    if (cfg.K < 2) throw ParameterError(fmt::format("K = {}: cross-fitting needs K >= 2", cfg.K));
    const double tau = cfg.nuisance.tau;
    if (!(tau > 0.0 && tau < 1.0)) throw ParameterError(fmt::format("tau = {} outside (0,1)", tau));
    if (!(cfg.xi > 0.0 && cfg.xi < 1.0)) throw ParameterError("xi must lie in (0,1)");
    if (data.n() < static_cast<Eigen::Index>(cfg.K) * cfg.min_rows_per_fold) {
        throw ParameterError(fmt::format("n = {} too small for K = {} (need n >= {})", data.n(), cfg.K,
                                         cfg.K * cfg.min_rows_per_fold));
    }
    if (design.rows() != data.n()) throw ParameterError("design and dataset row counts differ");

    const FoldPartition parts = make_folds(data.n(), cfg.K, seed);
    struct FoldOut {
        FoldScores scores;
        double pilot = 0.0;
        NuisanceFit::Diagnostics diag;
    };
    auto run_fold = [&](int k) {
        const Sample aux = make_sample(data, design, parts.complement(k));
        const Sample tgt = make_sample(data, design, parts.fold(k));
        const NuisanceFit nui = fit_nuisance(aux, tgt, cfg.nuisance, mix_seed(seed, 1000 + static_cast<unsigned>(k)));
        return FoldOut{FoldScores::from(tgt, nui), nui.theta_pilot, nui.diagnostics};
    };

    std::vector<FoldOut> outs;
    if (cfg.threads > 1) {
        std::vector<std::future<FoldOut>> futs;
        for (int k = 0; k < cfg.K; ++k) futs.push_back(std::async(std::launch::async, run_fold, k));
        for (auto& f : futs) outs.push_back(f.get());
    } else {
        for (int k = 0; k < cfg.K; ++k) outs.push_back(run_fold(k));
    }

    std::vector<FoldScores> folds;
    std::vector<double> pilots;
    for (auto& o : outs) {
        folds.push_back(o.scores);
        pilots.push_back(o.pilot);
    }
    const double d2 = data.d.squaredNorm() / static_cast<double>(data.n());
    const double proxy = d2 > 0.0 ? 1.0 / (std::sqrt(d2) * std::log(static_cast<double>(data.n()))) : -1.0;
    DmlEstimate est = estimate_from_folds(folds, pilots, cfg, proxy);
    est.seed = seed;
    est.p = design.p();
    for (int k = 0; k < cfg.K; ++k) {
        est.diagnostics[k].nuisance = outs[k].diag;
        for (const auto& w : outs[k].diag.warnings) est.warnings.push_back(fmt::format("fold {}: {}", k, w));
    }
    return est;
}

SlopeEstimate orthogonality_check(const TruthAtPopulation& pop, Direction dir, const Eigen::VectorXd& delta,
                                  const std::vector<double>& epsilons, double pi_clip) {
    const auto n = pop.y.size();
    if (n < 50000) throw ParameterError("orthogonality_check: population sample must have at least 5e4 rows");
    std::vector<double> pos;
    {
        std::vector<double> e = epsilons;
        std::sort(e.begin(), e.end());
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (e[i] != -e[e.size() - 1 - i]) throw ParameterError("orthogonality_check: epsilons not symmetric");
            if (e[i] > 0.0) pos.push_back(e[i]);
        }
    }
    if (pos.empty()) throw ParameterError("orthogonality_check: need a nonzero epsilon");
    const auto expected = dir == Direction::Pi ? n : pop.x.cols();
    if (delta.size() != expected) throw ParameterError("orthogonality_check: direction has the wrong length");

    const Eigen::VectorXd index0 = pop.x * pop.beta;
    const Eigen::VectorXd v0 = pop.d - pop.x * pop.mu;
    const Eigen::VectorXd dindex = dir == Direction::Beta ? (pop.x * delta).eval() : Eigen::VectorXd::Zero(n).eval();
    const Eigen::VectorXd dv = dir == Direction::Mu ? (pop.x * delta).eval() : Eigen::VectorXd::Zero(n).eval();

    auto inputs = [&](Eigen::Index i, double eps) {
        ScoreInputs o{pop.y[i], pop.d[i], pop.t[i], index0[i] + eps * dindex[i], pop.pi[i], 0.0, v0[i] - eps * dv[i]};
        if (dir == Direction::Pi) o.pi = std::clamp(pop.pi[i] + eps * delta[i], pi_clip, 1.0 - pi_clip);
        o.h = (o.pi - (1.0 - pop.tau)) / o.pi;
        return o;
    };

    double denom = 0.0;
    for (double e : pos) denom += 2.0 * e * e;
    Eigen::VectorXd bo(n), bn(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double so = 0.0, sn = 0.0;
        for (double e : pos) {
            const ScoreInputs up = inputs(i, e), dn = inputs(i, -e);
            so += e * (score_psi(up, pop.theta, pop.tau) - score_psi(dn, pop.theta, pop.tau));
            sn += e * (naive_score(up, pop.theta) - naive_score(dn, pop.theta));
        }
        bo[i] = so / denom;
        bn[i] = sn / denom;
    }
    auto sd_mean = [&](const Eigen::VectorXd& b) {
        const double m = b.mean();
        return std::sqrt((b.array() - m).square().sum() / static_cast<double>(n - 1) / static_cast<double>(n));
    };
    return {bo.mean(), sd_mean(bo), bn.mean(), sd_mean(bn)};
}

}  // namespace dmlcqr
