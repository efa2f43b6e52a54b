#include "dmlcqr/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "dmlcqr/errors.hpp"
#include "dmlcqr/lasso.hpp"
#include "dmlcqr/nuisance.hpp"
#include "dmlcqr/stats.hpp"

namespace dmlcqr {

Eigen::VectorXd default_nu_y(Eigen::Index p) {
    if (p < 15) throw ParameterError("default_nu_y: p must be at least 15");
    Eigen::VectorXd nu = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < 5; ++j) {
        nu[j] = 1.0 / (j + 1);
        nu[10 + j] = 1.0 / (j + 1);
    }
    return nu;
}

Eigen::VectorXd default_nu_d(Eigen::Index p) {
    if (p < 15) throw ParameterError("default_nu_d: p must be at least 15");
    Eigen::VectorXd nu = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < 10; ++j) nu[j] = 1.0 / (j + 1);
    return nu;
}

double pattern_quadratic_form(const Eigen::VectorXd& nu, double rho) {
    std::vector<Eigen::Index> nz;
    for (Eigen::Index j = 1; j < nu.size(); ++j) {
        if (nu[j] != 0.0) nz.push_back(j);
    }
    double s = 0.0;
    for (auto i : nz) {
        for (auto j : nz) s += nu[i] * nu[j] * std::pow(rho, static_cast<double>(std::abs(i - j)));
    }
    return s;
}

double r2_to_coef(double r2, const Eigen::VectorXd& nu, double rho) {
    if (!(r2 >= 0.0 && r2 < 1.0)) throw ParameterError(fmt::format("r2_to_coef: r2 = {} outside [0,1)", r2));
    if (r2 == 0.0) return 0.0;
    const double s = pattern_quadratic_form(nu, rho);
    if (!(s > 0.0)) throw ParameterError("r2_to_coef: pattern has no signal on the covariates");
    return std::sqrt(r2 / ((1.0 - r2) * s));
}

void DgpConfig::validate() const {
    if (n < 10) throw ParameterError("dgp: n must be at least 10");
    if (p < 2) throw ParameterError("dgp: p must be at least 2");
    if ((nu_y.size() == 0 || nu_d.size() == 0) && p < 15) {
        throw ParameterError("dgp: default patterns need p >= 15");
    }
    if (!(censor_quantile > 0.0 && censor_quantile < 1.0)) throw ParameterError("dgp: censor_quantile outside (0,1)");
    if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("dgp: tau outside (0,1)");
    if (!(rho > -1.0 && rho < 1.0)) throw ParameterError("dgp: rho outside (-1,1)");
    const bool coefs = c_y.has_value() || c_d.has_value();
    const bool r2s = r2_y.has_value() || r2_d.has_value();
    if (coefs == r2s) throw ParameterError("dgp: supply exactly one of (c_y, c_d) or (r2_y, r2_d)");
    if (coefs && !(c_y && c_d)) throw ParameterError("dgp: both c_y and c_d are required");
    if (r2s && !(r2_y && r2_d)) throw ParameterError("dgp: both r2_y and r2_d are required");
    if (nu_y.size() && nu_y.size() != p) throw ParameterError("dgp: nu_y must have p entries");
    if (nu_d.size() && nu_d.size() != p) throw ParameterError("dgp: nu_d must have p entries");
    if (error == ErrorDist::StudentT && !(error_df > 0.0)) throw ParameterError("dgp: error_df must be positive");
}

Eigen::VectorXd DgpConfig::pattern_y() const { return nu_y.size() ? nu_y : default_nu_y(p); }
Eigen::VectorXd DgpConfig::pattern_d() const { return nu_d.size() ? nu_d : default_nu_d(p); }

std::pair<double, double> DgpConfig::scales() const {
    if (c_y && c_d) return {*c_y, *c_d};
    return {r2_to_coef(*r2_y, pattern_y(), rho), r2_to_coef(*r2_d, pattern_d(), rho)};
}

std::vector<Eigen::Index> DgpConfig::relevant() const {
    const Eigen::VectorXd a = pattern_y(), b = pattern_d();
    std::vector<Eigen::Index> out{0};
    for (Eigen::Index j = 1; j < p; ++j) {
        if (a[j] != 0.0 || b[j] != 0.0) out.push_back(j);
    }
    return out;
}

Dataset generate_replication(const DgpConfig& cfg, std::uint64_t rep_seed) {
    cfg.validate();
    const auto [cy, cd] = cfg.scales();
    const Eigen::VectorXd by = cy * cfg.pattern_y(), bd = cd * cfg.pattern_d();
    const Eigen::Index n = cfg.n, q = cfg.p - 1;

    std::mt19937_64 rng(rep_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double s = std::sqrt(1.0 - cfg.rho * cfg.rho);
    Eigen::MatrixXd z(n, q);
    for (Eigen::Index i = 0; i < n; ++i) {
        z(i, 0) = normal(rng);
        for (Eigen::Index j = 1; j < q; ++j) z(i, j) = cfg.rho * z(i, j - 1) + s * normal(rng);
    }
    Eigen::VectorXd v(n), eps(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
    if (cfg.error == ErrorDist::Normal) {
        for (Eigen::Index i = 0; i < n; ++i) eps[i] = normal(rng);
    } else {
        std::student_t_distribution<double> st(cfg.error_df);
        for (Eigen::Index i = 0; i < n; ++i) eps[i] = st(rng);
    }

    const Eigen::VectorXd d = (z * bd.tail(q)).array() + bd[0] + v.array();
    const Eigen::VectorXd ystar = cfg.theta_true * d + ((z * by.tail(q)).array() + by[0]).matrix() + eps;
    const double c = empirical_quantile(as_span(ystar), cfg.censor_quantile);
    std::vector<std::string> names;
    for (Eigen::Index j = 1; j <= q; ++j) names.push_back(fmt::format("z{}", j));
    return censor_left(ystar, d, std::move(z), std::move(names), Eigen::VectorXd::Constant(n, c));
}

DesignMatrix simulation_design(const Dataset& data) {
    return standardize(build_design(data, ExpansionRecipe::linear(data.control_names)));
}

namespace {

/// Powell kernel sandwich for the treatment coefficient of a weighted
/// rotated QR fit, with a Hall-Sheather bandwidth on the residual scale.
double qr_sandwich_se(const Eigen::MatrixXd& w, const Eigen::VectorXd& y, const Eigen::VectorXd& kept,
                      const Eigen::VectorXd& levels, const Eigen::VectorXd& coef, double tau) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (kept[i] > 0.0) rows.push_back(i);
    }
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < coef.size(); ++j) {
        if (j == 0 || coef[j] != 0.0) cols.push_back(j);
    }
    const Eigen::MatrixXd a = w(rows, cols);
    const Eigen::VectorXd r = y(rows) - a * coef(cols);
    const Eigen::VectorXd lv = levels(rows);
    const auto m = static_cast<double>(rows.size());
    const auto n = static_cast<double>(y.size());

    const double zq = normal_quantile(tau);
    const double z975 = normal_quantile(0.975);
    double hs = std::pow(m, -1.0 / 3.0) * std::pow(z975, 2.0 / 3.0) *
                std::pow(1.5 * std::pow(normal_pdf(zq), 2.0) / (2.0 * zq * zq + 1.0), 1.0 / 3.0);
    hs = std::min(hs, 0.999 * std::min(tau, 1.0 - tau));
    const double rm = r.mean();
    const double sd = std::sqrt((r.array() - rm).square().sum() / std::max(m - 1.0, 1.0));
    const double kappa = std::min(sd, iqr(as_span(r)) / 1.34);
    const double bw = std::max(kappa, 1e-12) * (normal_quantile(tau + hs) - normal_quantile(tau - hs));

    const auto k = a.cols();
    Eigen::MatrixXd jm = Eigen::MatrixXd::Zero(k, k), om = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const Eigen::VectorXd ai = a.row(i).transpose();
        if (std::abs(r[i]) <= bw) jm.noalias() += ai * ai.transpose();
        om.noalias() += lv[i] * (1.0 - lv[i]) * ai * ai.transpose();
    }
    jm /= 2.0 * bw * n;
    om /= n;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jm);
    if (!lu.isInvertible()) throw FitError("sandwich: kernel Jacobian is singular", coef);
    const Eigen::MatrixXd ji = lu.inverse();
    const double v = (ji * om * ji)(0, 0) / n;
    return std::sqrt(std::max(v, 0.0));
}

/// Unpenalized three-step estimator on [d, x(:, cols)].
PointEstimate three_step(const Sample& s, const std::vector<Eigen::Index>& cols, const EstimatorRules& rules,
                         bool allow_lasso_pi) {
    const auto n = s.n();
    Eigen::MatrixXd w(n, static_cast<Eigen::Index>(cols.size()) + 1);
    w.col(0) = s.d;
    for (std::size_t j = 0; j < cols.size(); ++j) w.col(static_cast<Eigen::Index>(j) + 1) = s.x.col(cols[j]);
    std::vector<Eigen::Index> all(static_cast<std::size_t>(w.cols()));
    for (Eigen::Index j = 0; j < w.cols(); ++j) all[static_cast<std::size_t>(j)] = j;

    const NuisanceConfig& cfg = rules.nuisance;
    Eigen::VectorXd pi;
    if (s.t.sum() >= static_cast<double>(n)) {
        pi = Eigen::VectorXd::Constant(n, 1.0 - cfg.pi_clip);
    } else {
        try {
            const LassoFit lf = refit_on(LogitProblem{w, s.t}, all, cfg.solver);
            pi = (w * lf.coefficients).unaryExpr([&](double u) {
                return std::clamp(logistic(u), cfg.pi_clip, 1.0 - cfg.pi_clip);
            });
        } catch (const FitError&) {
            if (!allow_lasso_pi) throw;
            pi = fit_censoring_prob(s, s, cfg).pi_target;
        }
    }
    const LevelFit lev = compute_h(pi, cfg.tau);
    const Eigen::VectorXd kept = lev.keep.cwiseProduct(s.t);
    const auto nk = static_cast<Eigen::Index>((kept.array() > 0.0).count());
    if (nk <= w.cols()) {
        throw RankError(fmt::format("{} kept observations for {} regressors", nk, w.cols()));
    }
    Eigen::VectorXd levels = Eigen::VectorXd::Constant(n, 0.5);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (kept[i] > 0.0) levels[i] = lev.h[i];
    }
    const LassoFit qr = refit_on(QrProblem{w, s.y, kept, levels}, all, cfg.solver);
    return {qr.coefficients[0], qr_sandwich_se(w, s.y, kept, levels, qr.coefficients, cfg.tau)};
}

}  // namespace

PointEstimate estimator_naive_ps(const Dataset& data, const DesignMatrix& design, const EstimatorRules& rules,
                                 std::uint64_t seed) {
    const Sample s = make_sample(data, design);
    const NuisanceConfig& cfg = rules.nuisance;
    const CensoringFit cens = fit_censoring_prob(s, s, cfg);
    const LevelFit lev = compute_h(cens.pi_aux, cfg.tau);
    const QuantileFit fit = fit_pilot_qr(s, lev.keep, lev.h, cfg, seed);

    Eigen::VectorXd coef(fit.beta.size() + 1);
    coef[0] = fit.theta;
    coef.tail(fit.beta.size()) = fit.beta;
    const Eigen::VectorXd kept = lev.keep.cwiseProduct(s.t);
    Eigen::VectorXd levels = Eigen::VectorXd::Constant(s.n(), 0.5);
    for (Eigen::Index i = 0; i < s.n(); ++i) {
        if (kept[i] > 0.0) levels[i] = lev.h[i];
    }
    return {fit.theta, qr_sandwich_se(s.with_treatment(), s.y, kept, levels, coef, cfg.tau)};
}

PointEstimate estimator_hdcqr(const Dataset& data, const DesignMatrix& design, const EstimatorRules& rules) {
    if (design.p() + 1 >= data.n()) {
        throw RankError(fmt::format("hdcqr: p = {} controls need n > p + 1, got n = {}", design.p(), data.n()));
    }
    std::vector<Eigen::Index> cols(static_cast<std::size_t>(design.p()));
    for (Eigen::Index j = 0; j < design.p(); ++j) cols[static_cast<std::size_t>(j)] = j;
    return three_step(make_sample(data, design), cols, rules, true);
}

PointEstimate estimator_oracle(const Dataset& data, const DesignMatrix& design, const EstimatorRules& rules,
                               const std::vector<Eigen::Index>& relevant) {
    std::vector<Eigen::Index> cols{design.intercept_col};
    for (auto j : relevant) {
        if (j < 0 || j >= design.p()) throw ParameterError(fmt::format("oracle: column {} out of range", j));
        if (j != design.intercept_col) cols.push_back(j);
    }
    std::sort(cols.begin() + 1, cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    return three_step(make_sample(data, design), cols, rules, false);
}

PointEstimate estimator_dmlcqr(const Dataset& data, const DesignMatrix& design, const EstimatorRules& rules,
                               std::uint64_t seed) {
    DmlConfig cfg = rules.dml;
    cfg.nuisance = rules.nuisance;
    const DmlEstimate est = estimate_dml(data, design, cfg, seed);
    return {est.theta, est.se};
}

const std::vector<std::string>& estimator_names() {
    static const std::vector<std::string> names{"naive_ps", "hdcqr", "dmlcqr", "oracle"};
    return names;
}

void validate_estimators(const std::vector<std::string>& names) {
    const auto& valid = estimator_names();
    for (const auto& n : names) {
        if (std::find(valid.begin(), valid.end(), n) == valid.end()) {
            throw ConfigError(fmt::format("unknown estimator '{}' (valid: {})", n, fmt::join(valid, ", ")));
        }
    }
}

const EstimatorMetrics& McReport::metric(const std::string& name) const {
    for (const auto& m : metrics) {
        if (m.name == name) return m;
    }
    throw ParameterError(fmt::format("no metrics for estimator '{}'", name));
}

EstimatorMetrics summarize(const std::string& name, const std::vector<PointEstimate>& ok, int failures,
                           double theta_true, double z) {
    EstimatorMetrics m;
    m.name = name;
    m.failures = failures;
    m.successes = static_cast<int>(ok.size());
    if (ok.empty()) return m;
    const auto r = static_cast<double>(ok.size());
    double mean = 0.0;
    for (const auto& e : ok) mean += e.theta;
    mean /= r;
    double ss = 0.0, sq = 0.0, ab = 0.0;
    int rej = 0;
    for (const auto& e : ok) {
        ss += (e.theta - mean) * (e.theta - mean);
        sq += (e.theta - theta_true) * (e.theta - theta_true);
        ab += std::abs(e.theta - theta_true);
        if (!(e.se > 0.0) || std::abs(e.theta - theta_true) > z * e.se) ++rej;
    }
    m.bias = mean - theta_true;
    m.sd = ok.size() > 1 ? std::sqrt(ss / r) : 0.0;
    m.single_rep = ok.size() == 1;
    m.rmse = std::sqrt(sq / r);
    m.mae = ab / r;
    m.rejection_rate = rej / r;
    return m;
}

McReport run_mc(const DgpConfig& cfg, const std::vector<std::string>& estimators, int reps, std::uint64_t base_seed,
                const McOptions& opts) {
    validate_estimators(estimators);
    cfg.validate();
    if (reps < 0) throw ParameterError("run_mc: reps must be nonnegative");
    McReport report;
    report.design_id = opts.design_id;
    report.reps = reps;
    report.theta_true = cfg.theta_true;
    if (reps == 0) return report;

    EstimatorRules rules = opts.rules;
    rules.nuisance.tau = cfg.tau;
    rules.dml.nuisance = rules.nuisance;
    const auto relevant = cfg.relevant();
    const std::size_t E = estimators.size();
    std::vector<ReplicationRecord> recs(static_cast<std::size_t>(reps) * E);

    auto run_rep = [&](int r) {
        const std::uint64_t seed = mix_seed(base_seed, static_cast<std::uint64_t>(r));
        std::optional<Dataset> data;
        std::optional<DesignMatrix> design;
        std::string setup_error;
        try {
            data = generate_replication(cfg, seed);
            design = simulation_design(*data);
        } catch (const std::exception& e) {
            setup_error = e.what();
        }
        for (std::size_t k = 0; k < E; ++k) {
            ReplicationRecord& rec = recs[static_cast<std::size_t>(r) * E + k];
            rec.rep = r;
            rec.seed = seed;
            rec.estimator = estimators[k];
            if (!setup_error.empty()) {
                rec.error = setup_error;
                continue;
            }
            try {
                const std::uint64_t es = mix_seed(seed, 17);
                PointEstimate pe;
                const auto& nm = estimators[k];
                if (nm == "naive_ps") pe = estimator_naive_ps(*data, *design, rules, es);
                else if (nm == "hdcqr") pe = estimator_hdcqr(*data, *design, rules);
                else if (nm == "oracle") pe = estimator_oracle(*data, *design, rules, relevant);
                else pe = estimator_dmlcqr(*data, *design, rules, es);
                if (!std::isfinite(pe.theta)) throw QualityError("non-finite estimate");
                rec.ok = true;
                rec.theta = pe.theta;
                rec.se = pe.se;
            } catch (const std::exception& e) {
                rec.error = e.what();
            }
        }
    };

    const int T = std::max(1, std::min(opts.threads, reps));
    if (T == 1) {
        for (int r = 0; r < reps; ++r) run_rep(r);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < T; ++w) {
            pool.emplace_back([&] {
                for (int r = next++; r < reps; r = next++) run_rep(r);
            });
        }
        for (auto& th : pool) th.join();
    }

    const double z = normal_quantile(0.975);
    for (std::size_t k = 0; k < E; ++k) {
        std::vector<PointEstimate> ok;
        int fails = 0;
        for (int r = 0; r < reps; ++r) {
            const auto& rec = recs[static_cast<std::size_t>(r) * E + k];
            if (rec.ok) ok.push_back({rec.theta, rec.se});
            else ++fails;
        }
        report.metrics.push_back(summarize(estimators[k], ok, fails, cfg.theta_true, z));
    }
    report.records = std::move(recs);
    return report;
}

std::vector<CoverageCell> coverage_grid(const std::vector<std::pair<double, double>>& r2_pairs,
                                        const DgpConfig& templ, int reps, const std::vector<std::string>& estimators,
                                        std::uint64_t base_seed, const McOptions& opts) {
    validate_estimators(estimators);
    if (reps < 0) throw ParameterError("coverage_grid: negative replication count");
    for (const auto& [rd, ry] : r2_pairs) {
        if (!(rd >= 0.0 && rd < 1.0 && ry >= 0.0 && ry < 1.0)) {
            throw ParameterError(fmt::format("coverage_grid: R^2 pair ({}, {}) outside [0,1)", rd, ry));
        }
    }
    std::vector<CoverageCell> out;
    if (reps == 0) return out;
    for (std::size_t g = 0; g < r2_pairs.size(); ++g) {
        DgpConfig cfg = templ;
        cfg.c_y.reset();
        cfg.c_d.reset();
        cfg.r2_d = r2_pairs[g].first;
        cfg.r2_y = r2_pairs[g].second;
        McOptions o = opts;
        o.design_id = fmt::format("r2d={:g},r2y={:g}", r2_pairs[g].first, r2_pairs[g].second);
        out.push_back({r2_pairs[g].first, r2_pairs[g].second,
                       run_mc(cfg, estimators, reps, mix_seed(base_seed, 1000003 + g), o)});
    }
    return out;
}

}  // namespace dmlcqr
