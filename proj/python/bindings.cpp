#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dmlcqr/dml.hpp"
#include "dmlcqr/errors.hpp"
#include "dmlcqr/lasso.hpp"
#include "dmlcqr/sim.hpp"

namespace py = pybind11;
using namespace dmlcqr;

namespace {

Dataset make_dataset(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::MatrixXd& z,
                     const Eigen::VectorXd& censor) {
    if (censor.size() != y.size()) throw ParameterError("censor must have one entry per row");
    Dataset data;
    data.y = y;
    data.d = d;
    data.z_raw = z;
    for (Eigen::Index j = 0; j < z.cols(); ++j) data.control_names.push_back("z" + std::to_string(j + 1));
    data.t = indicator_from_censor(y, censor);
    data.censor_value = censor;
    data.validate();
    return data;
}

py::dict estimate(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::MatrixXd& z,
                  const Eigen::VectorXd& censor, double tau, int K, const std::string& mode, std::uint64_t seed,
                  int threads, bool standardize_controls) {
    const Dataset data = make_dataset(y, d, z, censor);
    DesignMatrix design = build_design(data, ExpansionRecipe::linear(data.control_names));
    if (standardize_controls && design.p() > 1) design = standardize(design);
    DmlConfig cfg;
    cfg.nuisance.tau = tau;
    cfg.K = K;
    cfg.mode = parse_mode(mode);
    cfg.threads = threads;
    DmlEstimate est;
    {
        py::gil_scoped_release release;
        est = estimate_dml(data, design, cfg, seed);
    }
    py::dict out;
    out["theta"] = est.theta;
    out["se"] = est.se;
    out["ci"] = py::make_tuple(est.ci_lo, est.ci_hi);
    out["sigma2"] = est.sigma2;
    out["per_fold_theta"] = est.per_fold_theta;
    out["tau"] = est.tau;
    out["K"] = est.K;
    out["mode"] = to_string(est.mode);
    out["warnings"] = est.warnings;
    return out;
}

DgpConfig dgp_config(Eigen::Index n, Eigen::Index p, double tau, double theta, double rho, double r2_y, double r2_d,
                     double censor_quantile) {
    DgpConfig c;
    c.n = n;
    c.p = p;
    c.tau = tau;
    c.theta_true = theta;
    c.rho = rho;
    c.r2_y = r2_y;
    c.r2_d = r2_d;
    c.censor_quantile = censor_quantile;
    return c;
}

py::dict generate(Eigen::Index n, Eigen::Index p, double tau, double theta, double rho, double r2_y, double r2_d,
                  double censor_quantile, std::uint64_t seed) {
    const Dataset data = generate_replication(dgp_config(n, p, tau, theta, rho, r2_y, r2_d, censor_quantile), seed);
    py::dict out;
    out["y"] = data.y;
    out["d"] = data.d;
    out["z"] = data.z_raw;
    out["t"] = data.t;
    out["censor"] = *data.censor_value;
    return out;
}

py::dict simulate(Eigen::Index n, Eigen::Index p, double tau, double theta, double rho, double r2_y, double r2_d,
                  double censor_quantile, const std::vector<std::string>& estimators, int reps, std::uint64_t seed,
                  int K, int threads) {
    const DgpConfig c = dgp_config(n, p, tau, theta, rho, r2_y, r2_d, censor_quantile);
    McOptions o;
    o.rules.dml.K = K;
    o.threads = threads;
    McReport rep;
    {
        py::gil_scoped_release release;
        rep = run_mc(c, estimators, reps, seed, o);
    }
    py::dict out;
    for (const auto& m : rep.metrics) {
        py::dict e;
        e["rmse"] = m.rmse;
        e["sd"] = m.sd;
        e["bias"] = m.bias;
        e["mae"] = m.mae;
        e["rejection_rate"] = m.rejection_rate;
        e["successes"] = m.successes;
        e["failures"] = m.failures;
        out[py::str(m.name)] = e;
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_dmlcqr, m) {
    m.doc() = "Double/debiased machine learning for censored quantile regression";

    static py::exception<Error> base(m, "Error");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            base((std::string(e.kind()) + ": " + e.what()).c_str());
        }
    });

    m.def("estimate", &estimate, py::arg("y"), py::arg("d"), py::arg("z"), py::arg("censor"), py::arg("tau") = 0.5,
          py::arg("K") = 4, py::arg("mode") = "dml2", py::arg("seed") = 1, py::arg("threads") = 1,
          py::arg("standardize") = true,
          "Cross-fitted estimate of the quantile treatment effect for y = max(y*, censor).");
    m.def("generate", &generate, py::arg("n") = 500, py::arg("p") = 300, py::arg("tau") = 0.5,
          py::arg("theta") = 1.0, py::arg("rho") = 0.5, py::arg("r2_y") = 0.75, py::arg("r2_d") = 0.75,
          py::arg("censor_quantile") = 0.3, py::arg("seed") = 1, "One replication of the simulated design.");
    m.def("simulate", &simulate, py::arg("n") = 500, py::arg("p") = 300, py::arg("tau") = 0.5,
          py::arg("theta") = 1.0, py::arg("rho") = 0.5, py::arg("r2_y") = 0.75, py::arg("r2_d") = 0.75,
          py::arg("censor_quantile") = 0.3,
          py::arg("estimators") = std::vector<std::string>{"naive_ps", "hdcqr", "dmlcqr", "oracle"},
          py::arg("reps") = 10, py::arg("seed") = 1, py::arg("K") = 2, py::arg("threads") = 1,
          "Monte-Carlo metrics per estimator.");

    m.def(
        "lasso_ls",
        [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
            return lasso_ls(x, y, Eigen::VectorXd::Ones(y.size()), lambda, Eigen::VectorXd::Ones(x.cols()))
                .coefficients;
        },
        py::arg("x"), py::arg("y"), py::arg("lam"), "Minimizes mean (y - xb)^2 + (lam / n) |b|_1.");
    m.def(
        "lasso_logit",
        [](const Eigen::MatrixXd& x, const Eigen::VectorXd& t, double lambda) {
            return lasso_logit(x, t, lambda, Eigen::VectorXd::Ones(x.cols())).coefficients;
        },
        py::arg("x"), py::arg("t"), py::arg("lam"), "L1-penalized logistic regression.");
    m.def(
        "lasso_qr",
        [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double tau, double lambda) {
            return lasso_qr(x, y, Eigen::VectorXd::Ones(y.size()), Eigen::VectorXd::Constant(y.size(), tau), lambda,
                            Eigen::VectorXd::Ones(x.cols()))
                .coefficients;
        },
        py::arg("x"), py::arg("y"), py::arg("tau"), py::arg("lam"), "L1-penalized quantile regression.");
}
