#include "dmlcqr/nuisance.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "dmlcqr/errors.hpp"
#include "dmlcqr/stats.hpp"

namespace dmlcqr {

Eigen::MatrixXd Sample::with_treatment() const {
    Eigen::MatrixXd w(n(), x.cols() + 1);
    w.col(0) = d;
    w.rightCols(x.cols()) = x;
    return w;
}

Sample make_sample(const Dataset& data, const DesignMatrix& design) {
    if (design.rows() != data.n()) throw ParameterError("make_sample: design and dataset row counts differ");
    return Sample{data.y, data.d, data.t, design.x, design.intercept_col};
}

Sample make_sample(const Dataset& data, const DesignMatrix& design, const std::vector<Eigen::Index>& rows) {
    if (design.rows() != data.n()) throw ParameterError("make_sample: design and dataset row counts differ");
    return Sample{data.y(rows), data.d(rows), data.t(rows), design.x(rows, Eigen::all),
                  design.intercept_col};
}

namespace {

Eigen::Index count_kept(const Eigen::VectorXd& keep, const Eigen::VectorXd& t) {
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < keep.size(); ++i) k += (keep[i] > 0.0 && t[i] > 0.0) ? 1 : 0;
    return k;
}

void require_floor(Eigen::Index kept, int floor, const char* what) {
    if (kept < floor) {
        throw DegenerateDataError(fmt::format("{}: {} kept uncensored rows, need at least {}", what, kept, floor));
    }
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

CensoringFit fit_censoring_prob(const Sample& aux, const Sample& target, const NuisanceConfig& cfg) {
    CensoringFit out;
    const double hi = 1.0 - cfg.pi_clip;
    const double tsum = aux.t.sum();
    const Eigen::MatrixXd w = aux.with_treatment();
    if (tsum >= static_cast<double>(aux.n())) {
        out.pi_aux = Eigen::VectorXd::Constant(aux.n(), hi);
        out.pi_target = Eigen::VectorXd::Constant(target.n(), hi);
        out.alpha = Eigen::VectorXd::Zero(w.cols());
        out.warnings.push_back("no censoring detected in the auxiliary sample; pi set to 1 - clip");
        return out;
    }
    if (tsum <= 0.0) throw DegenerateDataError("fit_censoring_prob: every auxiliary row is censored");

    const std::vector<Eigen::Index> forced{1 + aux.intercept_col};
    const LogitProblem prob{w, aux.t};
    const double lambda = cfg.lambda_scale * penalty_logit_level(aux.n(), aux.x.cols(), cfg.rule);
    Eigen::VectorXd gam = initial_loadings(prob, forced);
    gam = penalty_loadings(prob, lambda, gam, cfg.rule.loading_rounds, forced, cfg.solver);
    const LassoFit fit = lasso_logit(w, aux.t, lambda, gam, cfg.solver);
    LassoFit post;
    try {
        post = post_lasso(fit, prob, forced, cfg.solver);
    } catch (const FitError&) {
        // Quasi-separation on the selected columns: keep the penalized fit.
        post = fit;
        out.warnings.push_back("logit post-lasso refit did not converge; using the lasso fit");
    }
    out.alpha = post.coefficients;
    out.support_size = post.support.size();

    auto eval = [&](const Sample& s) {
        Eigen::VectorXd idx = s.d * out.alpha[0] + s.x * out.alpha.tail(s.x.cols());
        return idx.unaryExpr([&](double u) { return std::clamp(logistic(u), cfg.pi_clip, hi); }).eval();
    };
    out.pi_aux = eval(aux);
    out.pi_target = eval(target);
    return out;
}

LevelFit compute_h(const Eigen::VectorXd& pi, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("compute_h: tau must lie in (0,1)");
    LevelFit out;
    out.h.resize(pi.size());
    out.keep.resize(pi.size());
    for (Eigen::Index i = 0; i < pi.size(); ++i) {
        if (!(pi[i] > 0.0 && pi[i] <= 1.0)) throw ParameterError(fmt::format("compute_h: pi[{}] = {}", i, pi[i]));
        out.h[i] = (pi[i] - (1.0 - tau)) / pi[i];
        out.keep[i] = out.h[i] > 0.0 ? 1.0 : 0.0;
    }
    return out;
}

namespace {

struct QrSetup {
    Eigen::VectorXd kept;
    Eigen::VectorXd levels;
};

QrSetup qr_setup(const Sample& aux, const Eigen::VectorXd& keep, const Eigen::VectorXd& h, const NuisanceConfig& cfg,
                 const char* who) {
    const auto n = aux.n();
    if (keep.size() != n || h.size() != n) throw ParameterError(fmt::format("{}: length mismatch", who));
    QrSetup s{keep.cwiseProduct(aux.t), Eigen::VectorXd::Constant(n, 0.5)};
    require_floor(count_kept(keep, aux.t), cfg.kept_floor, who);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (s.kept[i] > 0.0) s.levels[i] = h[i];
    }
    return s;
}

QuantileFit unpack(const LassoFit& post, Eigen::Index px) {
    QuantileFit out;
    out.theta = post.coefficients[0];
    out.beta = post.coefficients.tail(px);
    out.post_support = post.support.size();
    return out;
}

}  // namespace

QuantileFit fit_pilot_qr(const Sample& aux, const Eigen::VectorXd& keep, const Eigen::VectorXd& h,
                         const NuisanceConfig& cfg, std::uint64_t seed) {
    const QrSetup st = qr_setup(aux, keep, h, cfg, "fit_pilot_qr");
    const Eigen::MatrixXd w = aux.with_treatment();
    const Eigen::Index ic = 1 + aux.intercept_col;
    std::vector<Eigen::Index> pen;
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
        if (j != ic) pen.push_back(j);
    }
    PenaltyRule rule = cfg.rule;
    rule.seed = seed;
    Eigen::VectorXd gam = column_rms(w);
    gam[ic] = 0.0;
    if (!cfg.penalize_treatment) {
        gam[0] = 0.0;
        pen.erase(pen.begin());
    }
    const double lambda =
        pen.empty() ? 0.0 : cfg.lambda_scale * penalty_qr_level(w(Eigen::all, pen), st.kept, st.levels, rule);

    const LassoFit fit = lasso_qr(w, aux.y, st.kept, st.levels, lambda, gam, cfg.solver);
    const LassoFit post = post_lasso(fit, QrProblem{w, aux.y, st.kept, st.levels}, {0, ic}, cfg.solver);
    QuantileFit out = unpack(post, aux.x.cols());
    out.lambda = lambda;
    out.lasso_support = fit.support.size();
    out.selected = fit.support;
    out.lasso_theta = fit.coefficients[0];
    out.lasso_beta = fit.coefficients.tail(aux.x.cols());
    return out;
}

QuantileFit refit_qr(const Sample& aux, const Eigen::VectorXd& keep, const Eigen::VectorXd& h,
                     const std::vector<Eigen::Index>& columns, const NuisanceConfig& cfg) {
    const QrSetup st = qr_setup(aux, keep, h, cfg, "refit_qr");
    const Eigen::MatrixXd w = aux.with_treatment();
    std::vector<Eigen::Index> cols = columns;
    cols.push_back(0);
    cols.push_back(1 + aux.intercept_col);
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    QuantileFit out = unpack(refit_on(QrProblem{w, aux.y, st.kept, st.levels}, cols, cfg.solver), aux.x.cols());
    out.selected = cols;
    return out;
}

double default_bandwidth(Eigen::Index n, double tau) {
    if (n < 10) throw ParameterError("default_bandwidth: need n >= 10");
    if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("default_bandwidth: tau must lie in (0,1)");
    return std::min(std::pow(static_cast<double>(n), -1.0 / 6.0), std::min(tau, 1.0 - tau) / 2.0);
}

DensityFit estimate_density(const Sample& aux, const Sample& target, const Eigen::VectorXd& pi_aux,
                            double bandwidth, const NuisanceConfig& cfg, std::uint64_t seed,
                            const std::vector<Eigen::Index>& base_support) {
    const double tau = cfg.tau;
    if (!(bandwidth > 0.0 && tau - bandwidth > 0.0 && tau + bandwidth < 1.0)) {
        throw ParameterError(fmt::format("estimate_density: tau +- h = {} +- {} leaves (0,1)", tau, bandwidth));
    }
    DensityFit out;
    out.bandwidth = bandwidth;
    const LevelFit up = compute_h(pi_aux, tau + bandwidth);
    const LevelFit lo = compute_h(pi_aux, tau - bandwidth);
    const QuantileFit lasso_up = fit_pilot_qr(aux, up.keep, up.h, cfg, mix_seed(seed, 1));
    const QuantileFit lasso_lo = fit_pilot_qr(aux, lo.keep, lo.h, cfg, mix_seed(seed, 2));
    std::vector<Eigen::Index> cols = base_support;
    cols.insert(cols.end(), lasso_up.selected.begin(), lasso_up.selected.end());
    cols.insert(cols.end(), lasso_lo.selected.begin(), lasso_lo.selected.end());
    if (cfg.density_from_lasso) {
        out.upper = lasso_up;
        out.lower = lasso_lo;
        out.upper.theta = lasso_up.lasso_theta;
        out.upper.beta = lasso_up.lasso_beta;
        out.lower.theta = lasso_lo.lasso_theta;
        out.lower.beta = lasso_lo.lasso_beta;
    } else {
        out.upper = refit_qr(aux, up.keep, up.h, cols, cfg);
        out.lower = refit_qr(aux, lo.keep, lo.h, cols, cfg);
    }

    std::vector<double> yu;
    for (Eigen::Index i = 0; i < aux.n(); ++i) {
        if (aux.t[i] > 0.0) yu.push_back(aux.y[i]);
    }
    double floor = yu.empty() ? 0.0 : cfg.density_floor * iqr(yu);
    if (!(floor > 0.0)) floor = 1e-12;

    auto spacing = [&](const Sample& s) {
        return ((s.d * (out.upper.theta - out.lower.theta)) + s.x * (out.upper.beta - out.lower.beta)).eval();
    };
    auto density = [&](const Eigen::VectorXd& gap, int* caps) {
        Eigen::VectorXd f(gap.size());
        for (Eigen::Index i = 0; i < gap.size(); ++i) {
            double g = gap[i];
            if (g < floor) {
                g = floor;
                if (caps) ++*caps;
            }
            f[i] = 2.0 * bandwidth / g;
        }
        return f;
    };

    const Eigen::VectorXd gap_aux = spacing(aux);
    const LevelFit at = compute_h(pi_aux, tau);
    Eigen::Index kept = 0;
    for (Eigen::Index i = 0; i < aux.n(); ++i) {
        if (at.keep[i] > 0.0 && aux.t[i] > 0.0) {
            ++kept;
            if (gap_aux[i] < 0.0) ++out.crossings;
        }
    }
    if (kept > 0 && static_cast<double>(out.crossings) > cfg.max_crossing_share * static_cast<double>(kept)) {
        throw QualityError(fmt::format("estimate_density: quantile fits cross on {} of {} kept rows", out.crossings,
                                       kept));
    }
    out.f_aux = density(gap_aux, &out.capped);
    out.f_target = density(spacing(target), nullptr);
    return out;
}

ProjectionFit fit_projection(const Sample& aux, const Sample& target, const Eigen::VectorXd& weights,
                             const NuisanceConfig& cfg, const std::vector<Eigen::Index>& extra) {
    if (weights.size() != aux.n()) throw ParameterError("fit_projection: length mismatch");
    Eigen::Index active = 0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) active += weights[i] > 0.0 ? 1 : 0;
    require_floor(active, cfg.kept_floor, "fit_projection");

    ProjectionFit out;
    const std::vector<Eigen::Index> forced{aux.intercept_col};
    const LsProblem prob{aux.x, aux.d, weights};
    out.lambda = cfg.lambda_scale * penalty_ls_level(aux.n(), std::max<Eigen::Index>(aux.x.cols() - 1, 1), cfg.rule);
    Eigen::VectorXd gam = initial_loadings(prob, forced);
    gam = penalty_loadings(prob, out.lambda, gam, cfg.rule.loading_rounds, forced, cfg.solver);
    const LassoFit fit = lasso_ls(aux.x, aux.d, weights, out.lambda, gam, cfg.solver);
    std::vector<Eigen::Index> keep_cols = forced;
    for (Eigen::Index j : extra) {
        if (j < 0 || j >= aux.x.cols()) throw ParameterError("fit_projection: extra column out of range");
        if (j != aux.intercept_col) keep_cols.push_back(j);
    }
    const LassoFit post = post_lasso(fit, prob, keep_cols, cfg.solver);
    out.mu = post.coefficients;
    out.support_size = post.support.size();
    out.v_aux = aux.d - aux.x * out.mu;
    out.v_target = target.d - target.x * out.mu;
    return out;
}

void NuisanceFit::validate() const {
    const auto n = pi_hat.size();
    if (h_hat.size() != n || keep.size() != n || f_hat.size() != n || v_hat.size() != n || index_hat.size() != n) {
        throw QualityError("NuisanceFit: field lengths differ");
    }
    if (!all_finite(pi_hat) || !all_finite(h_hat) || !all_finite(keep) || !all_finite(f_hat) ||
        !all_finite(mu_hat) || !all_finite(v_hat) || !all_finite(beta_pilot) || !all_finite(index_hat) ||
        !std::isfinite(theta_pilot) || !std::isfinite(bandwidth)) {
        throw QualityError("NuisanceFit: non-finite value");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(pi_hat[i] > 0.0 && pi_hat[i] < 1.0)) throw QualityError("NuisanceFit: pi outside (0,1)");
        if (std::abs(h_hat[i] * pi_hat[i] - (pi_hat[i] - (1.0 - tau))) > 1e-12) {
            throw QualityError("NuisanceFit: h identity violated");
        }
        if ((keep[i] > 0.0) != (h_hat[i] > 0.0)) throw QualityError("NuisanceFit: keep inconsistent with h");
        if (f_hat[i] < 0.0) throw QualityError("NuisanceFit: negative density");
    }
}

NuisanceFit fit_nuisance(const Sample& aux, const Sample& target, const NuisanceConfig& cfg, std::uint64_t seed) {
    NuisanceFit out;
    out.tau = cfg.tau;
    out.bandwidth = cfg.bandwidth > 0.0 ? cfg.bandwidth : default_bandwidth(aux.n(), cfg.tau);

    const CensoringFit cens = fit_censoring_prob(aux, target, cfg);
    const LevelFit lev_aux = compute_h(cens.pi_aux, cfg.tau);
    const LevelFit lev_tgt = compute_h(cens.pi_target, cfg.tau);
    const QuantileFit pilot = fit_pilot_qr(aux, lev_aux.keep, lev_aux.h, cfg, mix_seed(seed, 0));
    const DensityFit dens = estimate_density(aux, target, cens.pi_aux, out.bandwidth, cfg, seed, pilot.selected);
    const Eigen::VectorXd wts = aux.t.cwiseProduct(lev_aux.keep).cwiseProduct(dens.f_aux);
    std::vector<Eigen::Index> extra;
    if (cfg.projection_union) {
        for (Eigen::Index j : pilot.selected) {
            if (j > 0) extra.push_back(j - 1);
        }
    }
    const ProjectionFit proj = fit_projection(aux, target, wts, cfg, extra);

    out.pi_hat = cens.pi_target;
    out.h_hat = lev_tgt.h;
    out.keep = lev_tgt.keep;
    out.theta_pilot = pilot.theta;
    out.beta_pilot = pilot.beta;
    out.index_hat = target.x * pilot.beta;
    out.f_hat = dens.f_target;
    out.mu_hat = proj.mu;
    out.v_hat = proj.v_target;

    auto& dg = out.diagnostics;
    dg.logit_support = cens.support_size;
    dg.qr_lasso_support = pilot.lasso_support;
    dg.qr_post_support = pilot.post_support;
    dg.projection_support = proj.support_size;
    dg.density_caps = dens.capped;
    dg.density_crossings = dens.crossings;
    dg.pi_min = out.pi_hat.size() ? out.pi_hat.minCoeff() : 0.0;
    dg.pi_max = out.pi_hat.size() ? out.pi_hat.maxCoeff() : 0.0;
    dg.kept_aux = count_kept(lev_aux.keep, aux.t);
    dg.lambda_qr = pilot.lambda;
    dg.warnings = cens.warnings;
    out.validate();
    return out;
}

}  // namespace dmlcqr
