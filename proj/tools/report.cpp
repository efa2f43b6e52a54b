#include "report.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "dmlcqr/errors.hpp"

namespace dmlcqr::cli {

using nlohmann::ordered_json;

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return fmt::format("{:016x}", h);
}

std::string RunHeader::hash() const { return fnv1a_hex(command + "\n" + config); }

ordered_json RunHeader::json() const {
    ordered_json j;
    j["command"] = command;
    j["version"] = version;
    j["config_hash"] = hash();
    j["seed"] = seed;
    ordered_json cfg = ordered_json::object();
    std::istringstream in(config);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        cfg[line.substr(0, eq)] = line.substr(eq + 1);
    }
    j["config"] = cfg;
    return ordered_json{{"header", j}};
}

std::vector<std::string> RunHeader::comment_lines() const {
    return {"dmlcqr " + version, "command: " + command, "config_hash: " + hash(), fmt::format("seed: {}", seed)};
}

ordered_json estimate_record(const DmlEstimate& est) {
    ordered_json j;
    j["tau"] = est.tau;
    j["theta"] = est.theta;
    j["se"] = est.se;
    j["ci_lo"] = est.ci_lo;
    j["ci_hi"] = est.ci_hi;
    j["level"] = est.level;
    j["K"] = est.K;
    j["mode"] = to_string(est.mode);
    j["n"] = est.n;
    j["p"] = est.p;
    j["seed"] = est.seed;
    j["sigma2"] = est.sigma2;
    j["per_fold_theta"] = est.per_fold_theta;
    j["search"] = {est.search_lo, est.search_hi};
    ordered_json folds = ordered_json::array();
    for (const auto& d : est.diagnostics) {
        ordered_json f;
        f["fold"] = d.fold;
        f["size"] = d.size;
        f["theta_pilot"] = d.theta_pilot;
        f["score_mean"] = d.score_mean;
        f["jacobian"] = d.jacobian;
        f["zero_over_zero"] = d.zero_over_zero;
        const auto& n = d.nuisance;
        f["logit_support"] = n.logit_support;
        f["qr_lasso_support"] = n.qr_lasso_support;
        f["qr_post_support"] = n.qr_post_support;
        f["projection_support"] = n.projection_support;
        f["lambda_qr"] = n.lambda_qr;
        f["density_caps"] = n.density_caps;
        f["density_crossings"] = n.density_crossings;
        f["pi_min"] = n.pi_min;
        f["pi_max"] = n.pi_max;
        f["kept_aux"] = n.kept_aux;
        f["warnings"] = n.warnings;
        folds.push_back(std::move(f));
    }
    j["diagnostics"] = std::move(folds);
    j["warnings"] = est.warnings;
    return j;
}

ordered_json replication_record(const ReplicationRecord& rec) {
    ordered_json j;
    j["rep"] = rec.rep;
    j["seed"] = rec.seed;
    j["estimator"] = rec.estimator;
    j["ok"] = rec.ok;
    if (rec.ok) {
        j["theta"] = rec.theta;
        j["se"] = rec.se;
    } else {
        j["error"] = rec.error;
    }
    return j;
}

ordered_json error_record(const std::string& kind, const std::string& message) {
    return ordered_json{{"error", {{"kind", kind}, {"message", message}}}};
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write '{}'", path));
    out << body;
    if (!out) throw IoError(fmt::format("write to '{}' failed", path));
}

std::string summary_table(const std::vector<DmlEstimate>& results) {
    std::string s = fmt::format("{:>6} {:>10} {:>9} {:>10} {:>10} {:>5}\n", "tau", "theta", "se", "ci_lo", "ci_hi", "mode");
    for (const auto& e : results) {
        s += fmt::format("{:>6.3f} {:>10.4f} {:>9.4f} {:>10.4f} {:>10.4f} {:>5}\n", e.tau, e.theta, e.se, e.ci_lo,
                         e.ci_hi, to_string(e.mode));
    }
    return s;
}

std::string mc_table(const McReport& r) {
    std::string s = fmt::format("design {}  reps {}  theta_true {}\n", r.design_id, r.reps, r.theta_true);
    s += fmt::format("{:<10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>6}\n", "estimator", "RMSE", "SD", "Bias", "MAE", "Rej",
                     "fail");
    for (const auto& m : r.metrics) {
        s += fmt::format("{:<10} {:>8.4f} {:>8.4f} {:>8.4f} {:>8.4f} {:>8.3f} {:>6}\n", m.name, m.rmse, m.sd, m.bias,
                         m.mae, m.rejection_rate, m.failures);
    }
    s += "SD uses the population denominator (divide by the number of successful replications).\n";
    return s;
}

}  // namespace dmlcqr::cli
