#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dmlcqr/errors.hpp"
#include "dmlcqr/lasso.hpp"
#include "dmlcqr/stats.hpp"
#include "oracles.hpp"

using namespace dmlcqr;

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& z) {
    Eigen::MatrixXd x(z.rows(), z.cols() + 1);
    x.col(0).setOnes();
    x.rightCols(z.cols()) = z;
    return x;
}

// Columns satisfy E_n[x_j x_k] = delta_jk.
Eigen::MatrixXd orthonormal_design(Eigen::Index n, Eigen::Index p, std::mt19937_64& rng) {
    const Eigen::MatrixXd g = oracle::gaussian_matrix(n, p, rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    return qr.householderQ() * Eigen::MatrixXd::Identity(n, p) * std::sqrt(static_cast<double>(n));
}

// Independent KKT check for the least-squares Lasso.
double ls_kkt(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
              const Eigen::VectorXd& beta, double lambda, const Eigen::VectorXd& gam) {
    const double n = static_cast<double>(x.rows());
    const Eigen::VectorXd g = 2.0 * x.transpose() * w.cwiseProduct(y - x * beta) / n;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        const double k = lambda * gam[j] / n;
        if (beta[j] == 0.0) {
            worst = std::max(worst, std::abs(g[j]) - k);
        } else {
            worst = std::max(worst, std::abs(g[j] - k * (beta[j] > 0 ? 1.0 : -1.0)));
        }
    }
    return worst;
}

}  // namespace

TEST(CheckLoss, Examples) {
    EXPECT_DOUBLE_EQ(check_loss(2.0, 0.5), 1.0);
    EXPECT_DOUBLE_EQ(check_loss(-2.0, 0.75), 0.5);
    EXPECT_DOUBLE_EQ(check_loss(0.0, 0.3), 0.0);
    EXPECT_THROW(check_loss(1.0, 1.0), ParameterError);
    EXPECT_THROW(check_loss(1.0, 0.0), ParameterError);
}

TEST(LassoLs, UnpenalizedMatchesNormalEquations) {
    std::mt19937_64 rng(11);
    const Eigen::MatrixXd x = with_intercept(oracle::gaussian_matrix(200, 5, rng));
    const Eigen::VectorXd y = oracle::gaussian_matrix(200, 1, rng).col(0) + x.col(1) * 0.7;
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(200);
    const auto fit = lasso_ls(x, y, w, 0.0, Eigen::VectorXd::Ones(6));
    const Eigen::VectorXd ols = oracle::wls(x, y, w);
    EXPECT_LT((fit.coefficients - ols).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(LassoLs, HugePenaltyLeavesWeightedMean) {
    std::mt19937_64 rng(12);
    const Eigen::MatrixXd x = with_intercept(oracle::gaussian_matrix(100, 4, rng));
    const Eigen::VectorXd y = oracle::gaussian_matrix(100, 1, rng).col(0).array() + 3.0;
    Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(100, 0.5, 2.0);
    Eigen::VectorXd gam = Eigen::VectorXd::Ones(5);
    gam[0] = 0.0;
    const auto fit = lasso_ls(x, y, w, 1e12, gam);
    EXPECT_TRUE((fit.coefficients.tail(4).array() == 0.0).all());
    EXPECT_NEAR(fit.coefficients[0], w.dot(y) / w.sum(), 1e-10);
    EXPECT_EQ(fit.support, std::vector<Eigen::Index>{0});
}

TEST(LassoLs, OrthonormalDesignIsSoftThresholding) {
    std::mt19937_64 rng(13);
    const Eigen::Index n = 120, p = 8;
    const Eigen::MatrixXd x = orthonormal_design(n, p, rng);
    Eigen::VectorXd y = oracle::gaussian_matrix(n, 1, rng).col(0);
    y += x.col(0) * 1.5 - x.col(3) * 0.4;
    const Eigen::VectorXd gam = Eigen::VectorXd::LinSpaced(p, 0.5, 1.5);
    const double lambda = 30.0;
    const auto fit = lasso_ls(x, y, Eigen::VectorXd::Ones(n), lambda, gam);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double z = x.col(j).dot(y) / static_cast<double>(n);
        const double k = lambda * gam[j] / (2.0 * static_cast<double>(n));
        const double expect = std::copysign(std::max(std::abs(z) - k, 0.0), z);
        EXPECT_NEAR(fit.coefficients[j], expect, 1e-8) << "column " << j;
    }
}

TEST(LassoLs, KktCertificateAndObjectiveBoundOnRandomProblems) {
    std::mt19937_64 rng(14);
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::Index n = 60 + rep * 5, p = 40;
        const Eigen::MatrixXd x = with_intercept(oracle::gaussian_matrix(n, p - 1, rng));
        Eigen::VectorXd y = oracle::gaussian_matrix(n, 1, rng).col(0) + 2.0 * x.col(2) - x.col(5);
        Eigen::VectorXd w = (oracle::gaussian_matrix(n, 1, rng).col(0).array().abs() + 0.1).matrix();
        Eigen::VectorXd gam = (oracle::gaussian_matrix(p, 1, rng).col(0).array().abs() + 0.5).matrix();
        gam[0] = 0.0;
        const double lambda = 5.0 + rep;
        const auto fit = lasso_ls(x, y, w, lambda, gam);
        EXPECT_LE(ls_kkt(x, y, w, fit.coefficients, lambda, gam), 1e-7);
        const Problem pr = LsProblem{x, y, w};
        const double zero_obj = penalized_objective(pr, Eigen::VectorXd::Zero(p), lambda, gam);
        EXPECT_LE(fit.objective, zero_obj + 1e-9);
        EXPECT_EQ(fit.support, support_of(fit.coefficients));
        const auto refit = post_lasso(fit, pr, {0});
        EXPECT_LE(fit.objective, penalized_objective(pr, refit.coefficients, lambda, gam) + 1e-9);
    }
}

TEST(LassoLs, RejectsNegativeWeights) {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 1);
    const Eigen::VectorXd y = Eigen::VectorXd::Ones(4);
    Eigen::VectorXd w = Eigen::VectorXd::Ones(4);
    w[2] = -1.0;
    EXPECT_THROW(lasso_ls(x, y, w, 0.0, Eigen::VectorXd::Zero(1)), ParameterError);
}

TEST(LassoLogit, InterceptOnlyIsBernoulliMle) {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(100);
    t.head(30).setOnes();
    const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(100, 1);
    const auto fit = lasso_logit(x, t, 0.0, Eigen::VectorXd::Ones(1));
    EXPECT_NEAR(logistic(fit.coefficients[0]), 0.3, 1e-7);
}

TEST(LassoLogit, HugePenaltyLeavesLogitOfMean) {
    std::mt19937_64 rng(21);
    const Eigen::MatrixXd x = with_intercept(oracle::gaussian_matrix(150, 6, rng));
    Eigen::VectorXd t(150);
    for (Eigen::Index i = 0; i < 150; ++i) t[i] = x(i, 1) + 0.3 > 0.0 ? 1.0 : 0.0;
    Eigen::VectorXd gam = Eigen::VectorXd::Ones(7);
    gam[0] = 0.0;
    const auto fit = lasso_logit(x, t, 1e9, gam);
    EXPECT_TRUE((fit.coefficients.tail(6).array() == 0.0).all());
    const double m = t.mean();
    EXPECT_NEAR(fit.coefficients[0], std::log(m / (1 - m)), 1e-7);
}

TEST(LassoLogit, UnpenalizedMatchesNewtonMle) {
    std::mt19937_64 rng(22);
    const Eigen::MatrixXd x = with_intercept(oracle::gaussian_matrix(200, 4, rng));
    Eigen::VectorXd truth(5);
    truth << -0.3, 0.8, -0.5, 0.2, 0.0;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd t(200);
    for (Eigen::Index i = 0; i < 200; ++i) t[i] = u(rng) < logistic(x.row(i).dot(truth)) ? 1.0 : 0.0;
    const auto fit = lasso_logit(x, t, 0.0, Eigen::VectorXd::Ones(5));
    const Eigen::VectorXd mle = oracle::logit_mle(x, t);
    EXPECT_LT((fit.coefficients - mle).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(LassoLogit, DegenerateInputs) {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(10, 1);
    EXPECT_THROW(lasso_logit(x, Eigen::VectorXd::Ones(10), 0.0, Eigen::VectorXd::Ones(1)), DegenerateDataError);

    // Perfectly separated classes at lambda = 0.
    Eigen::MatrixXd xs(20, 2);
    Eigen::VectorXd t(20);
    for (int i = 0; i < 20; ++i) {
        xs(i, 0) = 1.0;
        xs(i, 1) = i - 9.5;
        t[i] = i >= 10 ? 1.0 : 0.0;
    }
    EXPECT_THROW(lasso_logit(xs, t, 0.0, Eigen::VectorXd::Zero(2)), FitError);
    const Problem pr = LogitProblem{xs, t};
    EXPECT_THROW(refit_on(pr, {0, 1}), FitError);
}

TEST(LassoQr, InterceptOnlyIsSampleQuantile) {
    std::mt19937_64 rng(31);
    const Eigen::VectorXd y = oracle::gaussian_matrix(101, 1, rng).col(0);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(101, 1);
    for (double tau : {0.25, 0.5, 0.9}) {
        const auto fit = lasso_qr(x, y, Eigen::VectorXd::Ones(101), Eigen::VectorXd::Constant(101, tau), 0.0,
                                  Eigen::VectorXd::Zero(1));
        EXPECT_EQ(fit.coefficients[0], empirical_quantile(as_span(y), tau)) << "tau " << tau;
    }
}

TEST(LassoQr, ThreeKeptRowsInterpolateMiddleOrderStatistic) {
    Eigen::VectorXd y(8);
    y << 5.0, -1.0, 2.0, 7.0, 0.5, 3.0, -4.0, 9.0;
    Eigen::VectorXd keep = Eigen::VectorXd::Zero(8);
    keep[0] = keep[2] = keep[4] = 1.0;  // kept values 5, 2, 0.5
    const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(8, 1);
    const auto fit = lasso_qr(x, y, keep, Eigen::VectorXd::Constant(8, 0.5), 0.0, Eigen::VectorXd::Zero(1));
    EXPECT_EQ(fit.coefficients[0], 2.0);
}

TEST(LassoQr, MatchesLinearProgramWithMixedLevels) {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> lev(0.1, 0.9);
    for (int rep = 0; rep < 10; ++rep) {
        const Eigen::Index n = 60, p = 4;
        const Eigen::MatrixXd x = with_intercept(oracle::gaussian_matrix(n, p - 1, rng));
        const Eigen::VectorXd y = x.col(1) - 0.5 * x.col(2) + oracle::gaussian_matrix(n, 1, rng).col(0);
        Eigen::VectorXd levels(n);
        for (Eigen::Index i = 0; i < n; ++i) levels[i] = lev(rng);
        const Eigen::VectorXd keep = Eigen::VectorXd::Ones(n);
        const auto fit = lasso_qr(x, y, keep, levels, 0.0, Eigen::VectorXd::Zero(p));
        const auto lp = oracle::quantile_lp(x, y, keep / static_cast<double>(n), levels);
        ASSERT_TRUE(lp.ok);
        EXPECT_NEAR(fit.objective, lp.objective, 1e-6);
        EXPECT_LE(fit.kkt_residual, 1e-6);
    }
}

TEST(LassoQr, PenalizedMatchesAugmentedLinearProgram) {
    std::mt19937_64 rng(33);
    for (int rep = 0; rep < 8; ++rep) {
        const Eigen::Index n = 50, p = 6;
        const Eigen::MatrixXd x = with_intercept(oracle::gaussian_matrix(n, p - 1, rng));
        const Eigen::VectorXd y = 2.0 * x.col(1) + oracle::gaussian_matrix(n, 1, rng).col(0);
        Eigen::VectorXd keep = Eigen::VectorXd::Ones(n);
        keep.head(8).setZero();
        const Eigen::VectorXd levels = Eigen::VectorXd::Constant(n, 0.3 + 0.05 * rep);
        Eigen::VectorXd gam = Eigen::VectorXd::Ones(p);
        gam[0] = 0.0;
        const double lambda = 2.0 + 2.0 * rep;
        const auto fit = lasso_qr(x, y, keep, levels, lambda, gam);

        // |b_j| * k = 2 k rho_0.5(0 - b_j): append one pseudo-row per penalized column.
        const Eigen::Index m = n + p - 1;
        Eigen::MatrixXd xa = Eigen::MatrixXd::Zero(m, p);
        Eigen::VectorXd ya = Eigen::VectorXd::Zero(m), wa(m), qa(m);
        xa.topRows(n) = x;
        ya.head(n) = y;
        wa.head(n) = keep / static_cast<double>(n);
        qa.head(n) = levels;
        for (Eigen::Index j = 1; j < p; ++j) {
            xa(n + j - 1, j) = 1.0;
            wa[n + j - 1] = 2.0 * lambda * gam[j] / static_cast<double>(n);
            qa[n + j - 1] = 0.5;
        }
        const auto lp = oracle::quantile_lp(xa, ya, wa, qa);
        ASSERT_TRUE(lp.ok);
        EXPECT_NEAR(fit.objective, lp.objective, 1e-6);
        EXPECT_EQ(fit.support, support_of(fit.coefficients));
        const Problem pr = QrProblem{x, y, keep, levels};
        EXPECT_NEAR(penalized_objective(pr, fit.coefficients, lambda, gam), fit.objective, 1e-10);
        EXPECT_LE(fit.objective, penalized_objective(pr, Eigen::VectorXd::Zero(p), lambda, gam) + 1e-9);
    }
}

TEST(LassoQr, LargePenaltyGivesExactZeros) {
    std::mt19937_64 rng(34);
    const Eigen::MatrixXd x = with_intercept(oracle::gaussian_matrix(80, 30, rng));
    const Eigen::VectorXd y = oracle::gaussian_matrix(80, 1, rng).col(0);
    Eigen::VectorXd gam = Eigen::VectorXd::Ones(31);
    gam[0] = 0.0;
    const auto fit = lasso_qr(x, y, Eigen::VectorXd::Ones(80), Eigen::VectorXd::Constant(80, 0.5), 1e4, gam);
    EXPECT_EQ(fit.support.size(), 1u);
    EXPECT_EQ(fit.support[0], 0);
}

TEST(LassoQr, TooFewKeptRows) {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(5, 2);
    Eigen::VectorXd keep = Eigen::VectorXd::Zero(5);
    keep[0] = 1.0;
    EXPECT_THROW(lasso_qr(x, Eigen::VectorXd::Ones(5), keep, Eigen::VectorXd::Constant(5, 0.5), 0.0,
                          Eigen::VectorXd::Zero(2)),
                 DegenerateDataError);
}

TEST(PostLasso, ForcedOnlyRefit) {
    std::mt19937_64 rng(41);
    const Eigen::MatrixXd x = with_intercept(oracle::gaussian_matrix(100, 5, rng));
    const Eigen::VectorXd y = oracle::gaussian_matrix(100, 1, rng).col(0) + x.col(1);
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(100);
    LassoFit empty;
    empty.coefficients = Eigen::VectorXd::Zero(6);
    const Problem pr = LsProblem{x, y, w};
    const auto fit = post_lasso(empty, pr, {1, 0});
    Eigen::MatrixXd sub(100, 2);
    sub << x.col(0), x.col(1);
    const Eigen::VectorXd ols = oracle::wls(sub, y, w);
    EXPECT_NEAR(fit.coefficients[0], ols[0], 1e-10);
    EXPECT_NEAR(fit.coefficients[1], ols[1], 1e-10);
    EXPECT_TRUE((fit.coefficients.tail(4).array() == 0.0).all());
}

TEST(PostLasso, IdempotentOnUnpenalizedFit) {
    std::mt19937_64 rng(42);
    const Eigen::MatrixXd x = with_intercept(oracle::gaussian_matrix(80, 3, rng));
    const Eigen::VectorXd y = oracle::gaussian_matrix(80, 1, rng).col(0) + x.col(2);
    const Eigen::VectorXd keep = Eigen::VectorXd::Ones(80);
    const Eigen::VectorXd lev = Eigen::VectorXd::Constant(80, 0.4);
    const auto fit = lasso_qr(x, y, keep, lev, 0.0, Eigen::VectorXd::Zero(4));
    const auto re = post_lasso(fit, QrProblem{x, y, keep, lev}, {});
    EXPECT_NEAR(re.objective, fit.objective, 1e-12);
    EXPECT_LT((re.coefficients - fit.coefficients).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(PostLasso, OrthonormalSubsetIsSubmatrixOls) {
    std::mt19937_64 rng(43);
    const Eigen::MatrixXd x = orthonormal_design(90, 5, rng);
    const Eigen::VectorXd y = oracle::gaussian_matrix(90, 1, rng).col(0) + x.col(1) - x.col(3);
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(90);
    LassoFit sel;
    sel.coefficients = Eigen::VectorXd::Zero(5);
    sel.coefficients[1] = 0.3;
    sel.coefficients[3] = -0.2;
    sel.support = {1, 3};
    const auto fit = post_lasso(sel, LsProblem{x, y, w}, {});
    Eigen::MatrixXd sub(90, 2);
    sub << x.col(1), x.col(3);
    const Eigen::VectorXd ols = oracle::wls(sub, y, w);
    EXPECT_NEAR(fit.coefficients[1], ols[0], 1e-10);
    EXPECT_NEAR(fit.coefficients[3], ols[1], 1e-10);
    EXPECT_EQ(fit.support, (std::vector<Eigen::Index>{1, 3}));
}

TEST(PostLasso, DropsCollinearColumnsInsideSupport) {
    std::mt19937_64 rng(44);
    Eigen::MatrixXd x = with_intercept(oracle::gaussian_matrix(50, 3, rng));
    x.col(3) = 2.0 * x.col(1);
    const Eigen::VectorXd y = oracle::gaussian_matrix(50, 1, rng).col(0);
    LassoFit sel;
    sel.coefficients = Eigen::VectorXd::Ones(4);
    sel.support = {0, 1, 2, 3};
    const auto fit = post_lasso(sel, LsProblem{x, y, Eigen::VectorXd::Ones(50)}, {0});
    EXPECT_EQ(fit.dropped_collinear, std::vector<Eigen::Index>{3});
    EXPECT_EQ(fit.coefficients[3], 0.0);
}

TEST(PenaltyLevels, LogitLevel) {
    PenaltyRule rule;
    rule.c = 1.1;
    rule.gamma = 0.1 / std::log(500.0);
    EXPECT_NEAR(penalty_logit_level(500, 300, rule), 130.7208, 1e-3);
    EXPECT_NEAR(penalty_logit_level(500, 300, rule), 130.6, 0.5);
    EXPECT_LT(penalty_logit_level(500, 10, rule), penalty_logit_level(500, 1000, rule));

    // c = 1 and gamma chosen so the quantile argument is 0.975 (p = 1, n = 100).
    PenaltyRule r2;
    r2.c = 1.0;
    r2.gamma = 0.025 * 2.0 * 2.0 * 100.0;
    EXPECT_NEAR(penalty_logit_level(100, 1, r2), 10.0 * 1.959964, 1e-5);
}

TEST(PenaltyLevels, LsLevel) {
    PenaltyRule rule;
    rule.c = 1.0;
    rule.gamma = 0.05;
    EXPECT_NEAR(penalty_ls_level(100, 1, rule), 39.19928, 1e-4);
    PenaltyRule r3 = rule;
    r3.c = 1.3;
    EXPECT_NEAR(penalty_ls_level(250, 40, r3), 2.0 * 1.3 * std::sqrt(250.0) * normal_quantile(1 - 0.05 / 80), 1e-12);
    r3.gamma = 1.0 - 1e-12;
    EXPECT_NEAR(penalty_ls_level(100, 1, r3), 0.0, 1e-9);
    EXPECT_THROW(penalty_ls_level(1, 1, rule), ParameterError);
}

TEST(PenaltyQrLevel, BinomialCltOracle) {
    const Eigen::Index n = 400;
    const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(n, 1);
    PenaltyRule rule;
    rule.c = 1.0 + 1e-12;
    rule.alpha = 0.1;
    rule.ndraws = 20000;
    rule.seed = 5;
    const double lam = penalty_qr_level(x, Eigen::VectorXd::Ones(n), Eigen::VectorXd::Constant(n, 0.5), rule);
    const double expect = normal_quantile(0.95) / (2.0 * std::sqrt(400.0));
    EXPECT_NEAR(lam / (rule.c * n), expect, 0.0035);
}

TEST(PenaltyQrLevel, DeterministicAndMonotoneInC) {
    std::mt19937_64 rng(51);
    const Eigen::MatrixXd x = oracle::gaussian_matrix(120, 10, rng);
    Eigen::VectorXd keep = Eigen::VectorXd::Ones(120);
    keep.head(20).setZero();
    const Eigen::VectorXd lev = Eigen::VectorXd::LinSpaced(120, 0.2, 0.8);
    PenaltyRule rule;
    rule.seed = 9;
    const double a = penalty_qr_level(x, keep, lev, rule);
    EXPECT_EQ(a, penalty_qr_level(x, keep, lev, rule));
    PenaltyRule bigger = rule;
    bigger.c = 1.5;
    EXPECT_GE(penalty_qr_level(x, keep, lev, bigger), a);
    EXPECT_THROW(penalty_qr_level(x, Eigen::VectorXd::Zero(120), lev, rule), DegenerateDataError);
}

TEST(PenaltyLoadings, LogitOneRoundPositive) {
    std::mt19937_64 rng(61);
    const Eigen::MatrixXd x = with_intercept(oracle::gaussian_matrix(300, 8, rng));
    Eigen::VectorXd t(300);
    std::uniform_real_distribution<double> u(0, 1);
    for (Eigen::Index i = 0; i < 300; ++i) t[i] = u(rng) < logistic(x(i, 1)) ? 1.0 : 0.0;
    const Problem pr = LogitProblem{x, t};
    const Eigen::VectorXd init = initial_loadings(pr, {0});
    PenaltyRule rule;
    const double lam = penalty_logit_level(300, 8, rule);
    const Eigen::VectorXd g = penalty_loadings(pr, lam, init, 1, {0});
    EXPECT_EQ(g[0], 0.0);
    EXPECT_TRUE((g.tail(8).array() > 0.0).all());
    EXPECT_TRUE(g.allFinite());
}

TEST(PenaltyLoadings, HomoskedasticLsLoadingsTrackResidualRms) {
    std::mt19937_64 rng(62);
    const Eigen::Index n = 2000;
    Eigen::MatrixXd z = oracle::gaussian_matrix(n, 10, rng);
    z = z.array().rowwise() / (z.colwise().squaredNorm().array() / n).sqrt();
    const Eigen::MatrixXd x = with_intercept(z);
    const Eigen::VectorXd y = x.col(1) * 0.5 + oracle::gaussian_matrix(n, 1, rng).col(0);
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
    const Problem pr = LsProblem{x, y, w};
    PenaltyRule rule;
    const double lam = penalty_ls_level(n, 10, rule);
    const Eigen::VectorXd g = penalty_loadings(pr, lam, initial_loadings(pr, {0}), 2, {0});
    const auto fit = post_lasso(lasso_ls(x, y, w, lam, g), pr, {0});
    const double rms = std::sqrt((y - x * fit.coefficients).squaredNorm() / n);
    for (Eigen::Index j = 1; j <= 10; ++j) EXPECT_NEAR(g[j] / rms, 1.0, 0.10) << "column " << j;
}

TEST(PenaltyLoadings, LsLoadingsScaleWithOutcome) {
    std::mt19937_64 rng(63);
    const Eigen::MatrixXd x = with_intercept(oracle::gaussian_matrix(200, 6, rng));
    const Eigen::VectorXd y = x.col(2) + oracle::gaussian_matrix(200, 1, rng).col(0);
    const Eigen::VectorXd y2 = 2.0 * y;
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(200);
    const Problem p1 = LsProblem{x, y, w};
    const Problem p2 = LsProblem{x, y2, w};
    const Eigen::VectorXd g1 = initial_loadings(p1, {0});
    const Eigen::VectorXd g2 = initial_loadings(p2, {0});
    EXPECT_LT((g2 - 2.0 * g1).cwiseAbs().maxCoeff(), 1e-12);
    const double lam = 20.0;
    const Eigen::VectorXd r1 = penalty_loadings(p1, lam, g1, 2, {0});
    const Eigen::VectorXd r2 = penalty_loadings(p2, lam, g2, 2, {0});
    EXPECT_LT((r2 - 2.0 * r1).cwiseAbs().maxCoeff(), 1e-6);
}
