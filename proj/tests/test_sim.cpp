#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dmlcqr/errors.hpp"
#include "dmlcqr/sim.hpp"
#include "dmlcqr/stats.hpp"

using namespace dmlcqr;

namespace {

// Direct double loop over nu' Sigma nu, intercept excluded.
double quad_form(const Eigen::VectorXd& nu, double rho) {
    double s = 0.0;
    for (Eigen::Index i = 1; i < nu.size(); ++i) {
        for (Eigen::Index j = 1; j < nu.size(); ++j) s += nu[i] * nu[j] * std::pow(rho, std::abs(i - j));
    }
    return s;
}

DgpConfig small_design(Eigen::Index n, Eigen::Index p) {
    DgpConfig c;
    c.n = n;
    c.p = p;
    c.r2_y = 0.5;
    c.r2_d = 0.5;
    return c;
}

}  // namespace

TEST(Patterns, PaperFixtures) {
    const Eigen::VectorXd y = default_nu_y(20);
    const Eigen::VectorXd d = default_nu_d(20);
    const double ey[20] = {1, 1.0 / 2, 1.0 / 3, 1.0 / 4, 1.0 / 5, 0, 0, 0, 0, 0, 1, 1.0 / 2, 1.0 / 3, 1.0 / 4, 1.0 / 5,
                           0, 0, 0, 0, 0};
    for (int j = 0; j < 20; ++j) {
        EXPECT_EQ(y[j], ey[j]) << j;
        EXPECT_EQ(d[j], j < 10 ? 1.0 / (j + 1) : 0.0) << j;
    }
    EXPECT_THROW(default_nu_y(10), ParameterError);
}

TEST(R2ToCoef, Examples) {
    const Eigen::VectorXd nu = default_nu_d(300);
    EXPECT_EQ(r2_to_coef(0.0, nu, 0.5), 0.0);
    const Eigen::Vector2d unit(0.0, 1.0);
    EXPECT_NEAR(pattern_quadratic_form(unit, 0.5), 1.0, 1e-15);
    EXPECT_NEAR(r2_to_coef(0.5, unit, 0.5), 1.0, 1e-15);
    const double s = quad_form(nu, 0.5);
    EXPECT_NEAR(pattern_quadratic_form(nu, 0.5), s, 1e-12);
    EXPECT_NEAR(r2_to_coef(0.75, nu, 0.5), std::sqrt(3.0 / s), 1e-12);
    EXPECT_THROW(r2_to_coef(0.5, Eigen::VectorXd::Zero(20), 0.5), ParameterError);
    EXPECT_THROW(r2_to_coef(1.0, nu, 0.5), ParameterError);
}

TEST(Dgp, NoSignalCorrelation) {
    DgpConfig c;
    c.n = 100000;
    c.p = 15;
    c.c_y = 0.0;
    c.c_d = 0.0;
    c.censor_quantile = 1e-9;
    const Dataset data = generate_replication(c, 4);
    // Only the minimum is at the censoring point, so y equals y* everywhere.
    const Eigen::VectorXd dy = data.y.array() - data.y.mean();
    const Eigen::VectorXd dd = data.d.array() - data.d.mean();
    const double corr = dy.dot(dd) / std::sqrt(dy.squaredNorm() * dd.squaredNorm());
    EXPECT_NEAR(corr, 1.0 / std::sqrt(2.0), 0.01);
}

TEST(Dgp, CensoredShareAndDeterminism) {
    DgpConfig c = small_design(517, 20);
    const Dataset a = generate_replication(c, 9);
    const Dataset b = generate_replication(c, 9);
    const double share = 1.0 - a.t.mean();
    EXPECT_NEAR(share, std::ceil(0.3 * 517) / 517.0, 1.0 / 517);
    EXPECT_NEAR(share, 0.3, 1.0 / 517);
    EXPECT_EQ(a.y, b.y);
    EXPECT_EQ(a.d, b.d);
    EXPECT_EQ(a.z_raw, b.z_raw);
    EXPECT_NE(generate_replication(c, 10).y, a.y);
    EXPECT_EQ(a.control_names.front(), "z1");
    EXPECT_EQ(a.z_raw.cols(), 19);
}

TEST(Dgp, CorrelationStructure) {
    DgpConfig c = small_design(50000, 16);
    const Dataset a = generate_replication(c, 2);
    const Eigen::MatrixXd s = a.z_raw.transpose() * a.z_raw / static_cast<double>(a.n());
    EXPECT_NEAR(s(0, 0), 1.0, 0.03);
    EXPECT_NEAR(s(3, 3), 1.0, 0.03);
    EXPECT_NEAR(s(2, 3), 0.5, 0.02);
    EXPECT_NEAR(s(2, 4), 0.25, 0.02);
}

TEST(Dgp, Validation) {
    DgpConfig c;
    EXPECT_THROW(c.validate(), ParameterError);
    c.r2_y = 0.5;
    c.r2_d = 0.5;
    EXPECT_NO_THROW(c.validate());
    c.c_y = 1.0;
    EXPECT_THROW(c.validate(), ParameterError);
    DgpConfig d = small_design(100, 10);
    EXPECT_THROW(d.validate(), ParameterError);
    d.censor_quantile = 1.0;
    EXPECT_THROW(d.validate(), ParameterError);
    const std::vector<Eigen::Index> rel = small_design(100, 30).relevant();
    EXPECT_EQ(rel.size(), 15u);
    EXPECT_EQ(rel.front(), 0);
    EXPECT_EQ(rel.back(), 14);
}

TEST(Summarize, Examples) {
    const EstimatorMetrics m = summarize("x", {{1.1, 0.1}, {0.9, 0.1}}, 0, 1.0, 1.96);
    EXPECT_NEAR(m.bias, 0.0, 1e-15);
    EXPECT_NEAR(m.mae, 0.1, 1e-15);
    EXPECT_NEAR(m.rmse, 0.1, 1e-15);
    EXPECT_NEAR(m.rejection_rate, 0.0, 0.0);

    const EstimatorMetrics one = summarize("x", {{1.3, 0.1}}, 2, 1.0, 1.96);
    EXPECT_EQ(one.sd, 0.0);
    EXPECT_TRUE(one.single_rep);
    EXPECT_EQ(one.failures, 2);
    EXPECT_EQ(one.rejection_rate, 1.0);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(1.1, 0.3);
    std::vector<PointEstimate> v;
    for (int i = 0; i < 57; ++i) v.push_back({g(rng), 0.3});
    const EstimatorMetrics a = summarize("x", v, 0, 1.0, 1.96);
    EXPECT_NEAR(a.rmse * a.rmse, a.bias * a.bias + a.sd * a.sd, 1e-10);
    EXPECT_GE(a.rejection_rate, 0.0);
    EXPECT_LE(a.rejection_rate, 1.0);
    std::reverse(v.begin(), v.end());
    const EstimatorMetrics b = summarize("x", v, 0, 1.0, 1.96);
    EXPECT_NEAR(a.bias, b.bias, 1e-14);
    EXPECT_NEAR(a.sd, b.sd, 1e-14);
    EXPECT_EQ(a.rejection_rate, b.rejection_rate);

    const EstimatorMetrics bad_se = summarize("x", {{1.0, 0.0}}, 0, 1.0, 1.96);
    EXPECT_EQ(bad_se.rejection_rate, 1.0);
}

TEST(Estimators, OracleOnAllColumnsIsHdcqr) {
    const Dataset data = generate_replication(small_design(400, 15), 5);
    const DesignMatrix dm = simulation_design(data);
    std::vector<Eigen::Index> all;
    for (Eigen::Index j = 0; j < dm.p(); ++j) all.push_back(j);
    const EstimatorRules rules;
    const PointEstimate a = estimator_hdcqr(data, dm, rules);
    const PointEstimate b = estimator_oracle(data, dm, rules, all);
    EXPECT_EQ(a.theta, b.theta);
    EXPECT_EQ(a.se, b.se);
    EXPECT_GT(a.se, 0.0);

    const PointEstimate c = estimator_oracle(data, dm, rules, {});
    EXPECT_TRUE(std::isfinite(c.theta));
}

TEST(Estimators, NaiveWithoutPenaltyIsHdcqr) {
    const Dataset data = generate_replication(small_design(400, 15), 6);
    const DesignMatrix dm = simulation_design(data);
    EstimatorRules rules;
    rules.nuisance.lambda_scale = 0.0;
    const PointEstimate a = estimator_naive_ps(data, dm, rules, 1);
    const PointEstimate b = estimator_hdcqr(data, dm, rules);
    EXPECT_NEAR(a.theta, b.theta, 1e-6);
}

TEST(Estimators, HdcqrNeedsMoreRowsThanColumns) {
    const Dataset data = generate_replication(small_design(60, 80), 7);
    const DesignMatrix dm = simulation_design(data);
    EXPECT_THROW(estimator_hdcqr(data, dm, EstimatorRules{}), RankError);
}

TEST(Estimators, NaiveRecoversEffectInLowDimension) {
    const Dataset data = generate_replication(small_design(3000, 15), 8);
    const PointEstimate a = estimator_naive_ps(data, simulation_design(data), EstimatorRules{}, 2);
    EXPECT_NEAR(a.theta, 1.0, 0.2);
    EXPECT_GT(a.se, 0.0);
}

TEST(RunMc, DeterministicAcrossThreads) {
    const DgpConfig c = small_design(200, 15);
    McOptions o;
    o.rules.dml.K = 2;
    const std::vector<std::string> est{"naive_ps", "oracle", "dmlcqr"};
    const McReport a = run_mc(c, est, 4, 77, o);
    o.threads = 3;
    const McReport b = run_mc(c, est, 4, 77, o);
    ASSERT_EQ(a.records.size(), 12u);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        EXPECT_EQ(a.records[i].theta, b.records[i].theta);
        EXPECT_EQ(a.records[i].ok, b.records[i].ok);
        EXPECT_EQ(a.records[i].estimator, b.records[i].estimator);
    }
    ASSERT_EQ(a.metrics.size(), 3u);
    EXPECT_EQ(a.metric("oracle").rmse, b.metric("oracle").rmse);
    EXPECT_THROW(run_mc(c, {"lasso"}, 1, 1, o), ConfigError);
}

TEST(RunMc, FailuresAreRecorded) {
    // Too few rows for the fold floor: every DML replication fails, the study still completes.
    const DgpConfig c = small_design(60, 15);
    McOptions o;
    const McReport r = run_mc(c, {"dmlcqr", "oracle"}, 2, 1, o);
    EXPECT_EQ(r.metric("dmlcqr").failures, 2);
    EXPECT_EQ(r.metric("dmlcqr").successes, 0);
    EXPECT_FALSE(r.records.front().error.empty());
    EXPECT_EQ(r.metric("oracle").successes + r.metric("oracle").failures, 2);
}

TEST(CoverageGrid, Shapes) {
    DgpConfig templ = small_design(150, 15);
    McOptions o;
    EXPECT_TRUE(coverage_grid({{0.5, 0.5}}, templ, 0, {"oracle"}, 1, o).empty());
    const auto cells = coverage_grid({{0.2, 0.5}, {0.8, 0.2}}, templ, 2, {"oracle"}, 1, o);
    ASSERT_EQ(cells.size(), 2u);
    EXPECT_EQ(cells[1].r2_d, 0.8);
    EXPECT_EQ(cells[1].r2_y, 0.2);
    EXPECT_EQ(cells[0].report.reps, 2);
    EXPECT_THROW(coverage_grid({{1.2, 0.5}}, templ, 1, {"oracle"}, 1, o), ParameterError);
}
