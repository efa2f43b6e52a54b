// Command-line front end: estimate | simulate | coverage | dgp.
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "dmlcqr/dataset.hpp"
#include "dmlcqr/design.hpp"
#include "dmlcqr/dml.hpp"
#include "dmlcqr/errors.hpp"
#include "dmlcqr/sim.hpp"
#include "dmlcqr/stats.hpp"
#include "report.hpp"

#ifndef DMLCQR_VERSION
#define DMLCQR_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace dmlcqr::cli {
namespace {

// Options that never change results and stay out of the config hash.
const std::set<std::string> kUnhashed{"help", "config", "threads", "out-dir", "out"};

int default_threads() {
    if (const char* env = std::getenv("DMLCQR_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return v;
        } catch (const std::exception&) {
        }
    }
    return 1;
}

struct Common {
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = ".";
};

struct Rules {
    int K = 4;
    std::string mode = "dml2";
    double xi = 0.05;
    double c = 1.1;
    double gamma = -1.0;
    double alpha = 0.1;
    int ndraws = 500;
    int loading_rounds = 2;
    double density_floor = 0.1;
    double bandwidth = -1.0;
    double half_width_floor = 0.0;
    int grid_points = 401;
    int kept_floor = 20;

    EstimatorRules build(double tau) const {
        EstimatorRules r;
        r.nuisance.tau = tau;
        r.nuisance.rule.c = c;
        r.nuisance.rule.gamma = gamma;
        r.nuisance.rule.alpha = alpha;
        r.nuisance.rule.ndraws = ndraws;
        r.nuisance.rule.loading_rounds = loading_rounds;
        r.nuisance.density_floor = density_floor;
        r.nuisance.bandwidth = bandwidth;
        r.nuisance.kept_floor = kept_floor;
        r.dml.K = K;
        r.dml.mode = parse_mode(mode);
        r.dml.xi = xi;
        r.dml.half_width_floor = half_width_floor;
        r.dml.search.grid_points = grid_points;
        r.dml.nuisance = r.nuisance;
        return r;
    }

    void validate() const {
        if (K < 2) throw ConfigError("K must be at least 2");
        if (!(xi > 0.0 && xi < 1.0)) throw ConfigError("xi must lie in (0,1)");
        try {
            parse_mode(mode);
            build(0.5).nuisance.rule.validate();
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
};

struct DgpOpts {
    Eigen::Index n = 500;
    Eigen::Index p = 300;
    double tau = 0.5;
    double theta = 1.0;
    double rho = 0.5;
    double r2_y = 0.75;
    double r2_d = 0.75;
    double c_y = -1.0;
    double c_d = -1.0;
    double censor_quantile = 0.3;
    std::string error = "normal";
    double df = 5.0;

    DgpConfig build() const {
        DgpConfig c;
        c.n = n;
        c.p = p;
        c.tau = tau;
        c.theta_true = theta;
        c.rho = rho;
        if (c_y >= 0.0 || c_d >= 0.0) {
            if (!(c_y >= 0.0 && c_d >= 0.0)) throw ConfigError("c-y and c-d must be given together");
            c.c_y = c_y;
            c.c_d = c_d;
        } else {
            c.r2_y = r2_y;
            c.r2_d = r2_d;
        }
        c.censor_quantile = censor_quantile;
        if (error == "normal") {
            c.error = ErrorDist::Normal;
        } else if (error == "t") {
            c.error = ErrorDist::StudentT;
        } else {
            throw ConfigError("error must be 'normal' or 't'");
        }
        c.error_df = df;
        try {
            c.validate();
            c.scales();
        } catch (const ParameterError& e) {
            throw ConfigError(e.what());
        }
        return c;
    }
};

void check_tau(double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError(fmt::format("tau = {} must lie in (0,1)", tau));
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", "Plain-text key = value file; command-line flags win");
    sub->add_option("--seed", c.seed, "Base RNG seed")->capture_default_str();
    sub->add_option("--threads", c.threads, "Worker threads (default: DMLCQR_THREADS or 1)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out-dir", c.out_dir, "Directory for output files")->capture_default_str();
}

void add_rules(CLI::App* sub, Rules& r) {
    sub->add_option("--K", r.K, "Number of folds")->capture_default_str();
    sub->add_option("--mode", r.mode, "dml1 or dml2")->capture_default_str();
    sub->add_option("--xi", r.xi, "1 - confidence level")->capture_default_str();
    sub->add_option("--penalty-c", r.c, "Penalty constant c > 1")->capture_default_str();
    sub->add_option("--penalty-gamma", r.gamma, "Tail probability (<= 0: 0.1 / ln n)")->capture_default_str();
    sub->add_option("--penalty-alpha", r.alpha, "Quantile level of the simulated QR penalty")->capture_default_str();
    sub->add_option("--penalty-draws", r.ndraws, "Draws for the simulated QR penalty")->capture_default_str();
    sub->add_option("--loading-rounds", r.loading_rounds, "Penalty loading iterations")->capture_default_str();
    sub->add_option("--density-floor", r.density_floor, "Spacing floor as a multiple of IQR(y | t = 1)")
        ->capture_default_str();
    sub->add_option("--bandwidth", r.bandwidth, "Density bandwidth (<= 0: default rule)")->capture_default_str();
    sub->add_option("--half-width-floor", r.half_width_floor, "Minimum half-width of the theta search")
        ->capture_default_str();
    sub->add_option("--grid-points", r.grid_points, "Grid points of the theta search")->capture_default_str();
    sub->add_option("--kept-floor", r.kept_floor, "Minimum kept rows per auxiliary sample")->capture_default_str();
}

void add_dgp(CLI::App* sub, DgpOpts& d) {
    sub->add_option("--n", d.n, "Sample size")->capture_default_str();
    sub->add_option("--p", d.p, "Columns of x including the intercept")->capture_default_str();
    sub->add_option("--tau", d.tau, "Quantile index")->capture_default_str();
    sub->add_option("--theta", d.theta, "True treatment effect")->capture_default_str();
    sub->add_option("--rho", d.rho, "AR correlation of the controls")->capture_default_str();
    sub->add_option("--r2-y", d.r2_y, "Target R^2 of the outcome equation")->capture_default_str();
    sub->add_option("--r2-d", d.r2_d, "Target R^2 of the treatment equation")->capture_default_str();
    sub->add_option("--c-y", d.c_y, "Outcome signal scale (overrides --r2-y)")->capture_default_str();
    sub->add_option("--c-d", d.c_d, "Treatment signal scale (overrides --r2-d)")->capture_default_str();
    sub->add_option("--censor-quantile", d.censor_quantile, "Censoring point as a sample quantile of y*")
        ->capture_default_str();
    sub->add_option("--error", d.error, "normal or t")->capture_default_str();
    sub->add_option("--df", d.df, "Degrees of freedom for t errors")->capture_default_str();
}

std::string join_results(const CLI::Option* o) {
    std::string s;
    for (const auto& r : o->results()) s += (s.empty() ? "" : ",") + r;
    return s;
}

// Resolved options as sorted key=value lines.
std::string canonical_config(const CLI::App* sub) {
    std::vector<std::string> lines;
    for (const CLI::Option* o : sub->get_options()) {
        const auto& names = o->get_lnames();
        if (names.empty() || kUnhashed.count(names.front())) continue;
        const std::string value = o->count() ? join_results(o) : o->get_default_str();
        lines.push_back(names.front() + "=" + value);
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

RunHeader make_header(const CLI::App* sub, const Common& c) {
    return {sub->get_name(), DMLCQR_VERSION, canonical_config(sub), c.seed};
}

std::string prepare_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError(fmt::format("cannot create output directory '{}'", dir));
    return dir;
}

std::string comments(const RunHeader& h) {
    std::string s;
    for (const auto& l : h.comment_lines()) s += "# " + l + "\n";
    return s;
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

// ---------------------------------------------------------------- estimate

struct EstimateOpts {
    std::string data;
    std::string outcome = "y";
    std::string treatment = "d";
    std::vector<std::string> controls;
    std::vector<double> censor_const;
    std::string censor_col;
    std::string censor_indicator;
    std::string censor_side = "left";
    std::string terms;
    std::vector<std::string> interactions;
    bool no_standardize = false;
    std::vector<double> taus{0.5};
};

CsvSchema resolve_schema(const EstimateOpts& o, const CsvTable& table) {
    CsvSchema s;
    s.outcome = o.outcome;
    s.treatment = o.treatment;
    const int rules = (o.censor_const.empty() ? 0 : 1) + (o.censor_col.empty() ? 0 : 1) +
                      (o.censor_indicator.empty() ? 0 : 1);
    if (rules > 1) throw ConfigError("give at most one of --censor-const, --censor-col, --censor-indicator");
    std::string censor_name;
    if (!o.censor_const.empty()) {
        s.censor = CensorConstant{o.censor_const.front()};
    } else if (!o.censor_col.empty()) {
        s.censor = CensorColumn{censor_name = o.censor_col};
    } else if (!o.censor_indicator.empty()) {
        s.censor = CensorIndicator{censor_name = o.censor_indicator};
    } else if (table.column_index("c") >= 0) {
        s.censor = CensorColumn{censor_name = "c"};
    } else if (table.column_index("t") >= 0) {
        s.censor = CensorIndicator{censor_name = "t"};
    } else {
        throw ConfigError("no censoring rule given and the file has no 'c' or 't' column");
    }
    if (o.censor_side == "left") {
        s.side = CensorSide::Left;
    } else if (o.censor_side == "right") {
        s.side = CensorSide::Right;
    } else {
        throw ConfigError("censor-side must be 'left' or 'right'");
    }
    s.controls = o.controls;
    if (s.controls.empty()) {
        for (const auto& name : table.header) {
            if (name != s.outcome && name != s.treatment && name != censor_name) s.controls.push_back(name);
        }
    }
    return s;
}

int cmd_estimate(const CLI::App* sub, const Common& c, const Rules& r, const EstimateOpts& o) {
    for (double tau : o.taus) check_tau(tau);
    r.validate();
    if (!fs::exists(o.data)) throw IoError(fmt::format("input file '{}' does not exist", o.data));
    const std::string dir = prepare_dir(c.out_dir);
    const RunHeader header = make_header(sub, c);

    const CsvTable table = read_csv(o.data);
    const CsvSchema schema = resolve_schema(o, table);
    const Dataset data = dataset_from_table(table, schema);
    const ExpansionRecipe recipe = o.terms.empty()
                                       ? [&] {
                                             ExpansionRecipe e = ExpansionRecipe::linear(schema.controls);
                                             e.interactions = ExpansionRecipe::parse("", o.interactions).interactions;
                                             return e;
                                         }()
                                       : ExpansionRecipe::parse(o.terms, o.interactions);
    DesignMatrix design = build_design(data, recipe);
    if (!o.no_standardize && design.p() > 1) design = standardize(design);

    std::string jsonl = header.json().dump() + "\n";
    ordered_json dj;
    dj["n"] = data.n();
    dj["p"] = design.p();
    dj["censored_share"] = 1.0 - data.t.mean();
    dj["columns"] = design.column_names;
    ordered_json dropped = ordered_json::array();
    for (const auto& d : design.dropped) dropped.push_back({{"name", d.name}, {"reason", d.reason}});
    dj["dropped"] = dropped;
    dj["warnings"] = design.warnings;
    jsonl += ordered_json{{"design", dj}}.dump() + "\n";

    std::vector<DmlEstimate> results;
    for (double tau : o.taus) {
        EstimatorRules rules = r.build(tau);
        rules.dml.threads = c.threads;
        results.push_back(estimate_dml(data, design, rules.dml, c.seed));
        jsonl += estimate_record(results.back()).dump() + "\n";
    }
    const std::string table_txt = summary_table(results);
    write_file(dir + "/results.jsonl", jsonl);
    write_file(dir + "/summary.txt", comments(header) + table_txt);
    std::cout << table_txt;
    return 0;
}

// ---------------------------------------------------------------- simulate

std::string metrics_csv(const RunHeader& h, const McReport& rep) {
    std::string s = comments(h) + "estimator,metric,value\n";
    for (const auto& m : rep.metrics) {
        s += fmt::format("{},rmse,{}\n{},sd,{}\n{},bias,{}\n{},mae,{}\n", m.name, num(m.rmse), m.name, num(m.sd), m.name,
                         num(m.bias), m.name, num(m.mae));
    }
    return s;
}

std::string rates_csv(const RunHeader& h, const McReport& rep) {
    std::string s = comments(h) + "estimator,rejection_rate,successes,failures,single_rep\n";
    for (const auto& m : rep.metrics) {
        s += fmt::format("{},{},{},{},{}\n", m.name, num(m.rejection_rate), m.successes, m.failures,
                         m.single_rep ? 1 : 0);
    }
    return s;
}

struct StudyOpts {
    int reps = 100;
    std::vector<std::string> estimators{"naive_ps", "hdcqr", "dmlcqr", "oracle"};
};

int cmd_simulate(const CLI::App* sub, const Common& c, const Rules& r, const DgpOpts& d, const StudyOpts& s) {
    check_tau(d.tau);
    r.validate();
    const DgpConfig cfg = d.build();
    if (s.reps < 0) throw ConfigError("reps must be non-negative");
    try {
        validate_estimators(s.estimators);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    const std::string dir = prepare_dir(c.out_dir);
    const RunHeader header = make_header(sub, c);

    McOptions mo;
    mo.rules = r.build(d.tau);
    mo.threads = c.threads;
    mo.design_id = header.hash();
    const McReport rep = run_mc(cfg, s.estimators, s.reps, c.seed, mo);

    std::string jsonl = header.json().dump() + "\n";
    for (const auto& rec : rep.records) jsonl += replication_record(rec).dump() + "\n";
    write_file(dir + "/estimates.jsonl", jsonl);
    write_file(dir + "/metrics.csv", metrics_csv(header, rep));
    write_file(dir + "/rates.csv", rates_csv(header, rep));
    const std::string txt = mc_table(rep);
    write_file(dir + "/summary.txt", comments(header) + txt);
    std::cout << txt;
    return 0;
}

// ---------------------------------------------------------------- coverage

struct GridOpts {
    std::vector<double> grid{0.2, 0.5, 0.8};
    std::vector<double> r2_d_grid;
    std::vector<double> r2_y_grid;
};

int cmd_coverage(const CLI::App* sub, const Common& c, const Rules& r, const DgpOpts& d, const StudyOpts& s,
                 const GridOpts& g) {
    check_tau(d.tau);
    r.validate();
    const std::vector<double> gd = g.r2_d_grid.empty() ? g.grid : g.r2_d_grid;
    const std::vector<double> gy = g.r2_y_grid.empty() ? g.grid : g.r2_y_grid;
    if (gd.empty() || gy.empty()) throw ConfigError("coverage grid is empty");
    for (double v : gd) {
        if (!(v >= 0.0 && v < 1.0)) throw ConfigError(fmt::format("grid value {} outside [0,1)", v));
    }
    for (double v : gy) {
        if (!(v >= 0.0 && v < 1.0)) throw ConfigError(fmt::format("grid value {} outside [0,1)", v));
    }
    if (s.reps < 0) throw ConfigError("reps must be non-negative");
    try {
        validate_estimators(s.estimators);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    DgpOpts templ_opts = d;
    templ_opts.c_y = templ_opts.c_d = -1.0;
    const DgpConfig templ = templ_opts.build();
    const std::string dir = prepare_dir(c.out_dir);
    const RunHeader header = make_header(sub, c);

    std::vector<std::pair<double, double>> pairs;
    for (double a : gd) {
        for (double b : gy) pairs.emplace_back(a, b);
    }
    McOptions mo;
    mo.rules = r.build(d.tau);
    mo.threads = c.threads;
    mo.design_id = header.hash();
    const auto cells = coverage_grid(pairs, templ, s.reps, s.estimators, c.seed, mo);

    std::string txt;
    std::string long_csv = comments(header) + "estimator,r2_d,r2_y,rejection_rate,successes,failures\n";
    for (const auto& est : s.estimators) {
        std::string m = comments(header) + "r2_d\\r2_y";
        for (double b : gy) m += "," + num(b);
        m += "\n";
        txt += fmt::format("{} rejection rates (rows r2_d, columns r2_y)\n{:>8}", est, "");
        for (double b : gy) txt += fmt::format(" {:>7.2f}", b);
        txt += "\n";
        std::size_t k = 0;
        for (double a : gd) {
            m += num(a);
            txt += fmt::format("{:>8.2f}", a);
            for (std::size_t j = 0; j < gy.size(); ++j, ++k) {
                if (cells.empty()) {
                    m += ",";
                    txt += fmt::format(" {:>7}", "-");
                    continue;
                }
                const auto& met = cells[k].report.metric(est);
                m += "," + num(met.rejection_rate);
                txt += fmt::format(" {:>7.3f}", met.rejection_rate);
                long_csv += fmt::format("{},{},{},{},{},{}\n", est, num(a), num(gy[j]), num(met.rejection_rate),
                                        met.successes, met.failures);
            }
            m += "\n";
            txt += "\n";
        }
        write_file(dir + "/coverage_" + est + ".csv", m);
    }
    write_file(dir + "/coverage_long.csv", long_csv);
    write_file(dir + "/summary.txt", comments(header) + txt);
    std::cout << txt;
    return 0;
}

// ---------------------------------------------------------------- dgp

int cmd_dgp(const CLI::App* sub, const Common& c, const DgpOpts& d, const std::string& out) {
    check_tau(d.tau);
    const DgpConfig cfg = d.build();
    const RunHeader header = make_header(sub, c);
    const std::string path = out.empty() ? prepare_dir(c.out_dir) + "/dgp.csv" : out;
    if (!out.empty()) {
        const fs::path parent = fs::path(out).parent_path();
        if (!parent.empty()) prepare_dir(parent.string());
    }
    // Replication 0 of a simulate run with the same seed.
    const Dataset data = generate_replication(cfg, mix_seed(c.seed, 0));
    write_csv(path, data, header.comment_lines());
    std::cout << fmt::format("wrote {} rows, {} controls, censored share {:.4f} to {}\n", data.n(),
                             data.z_raw.cols(), 1.0 - data.t.mean(), path);
    return 0;
}

// Turns `key = value` lines of the --config file into `--key=value` arguments
// placed ahead of the command line, skipping keys the command line sets.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
    std::string path;
    std::set<std::string> given;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.rfind("--", 0) != 0) continue;
        const auto eq = a.find('=');
        const std::string key = a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
        given.insert(key);
        if (key != "config") continue;
        if (eq != std::string::npos) {
            path = a.substr(eq + 1);
        } else if (i + 1 < args.size()) {
            path = args[i + 1];
        }
    }
    if (path.empty() || args.size() < 2) return args;
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open config file '{}'", path));
    auto trim = [](std::string v) {
        v.erase(0, v.find_first_not_of(" \t"));
        v.erase(v.find_last_not_of(" \t\r") + 1);
        if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
            v = v.substr(1, v.size() - 2);
        }
        return v;
    };
    std::vector<std::string> extra;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(fmt::format("{}:{}: expected key = value", path, lineno));
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(fmt::format("{}:{}: empty key", path, lineno));
        if (given.count(key)) continue;
        if (value == "true") {
            extra.push_back("--" + key);
        } else if (value != "false") {
            extra.push_back("--" + key + "=" + value);
        }
    }
    std::vector<std::string> out{args[0], args[1]};
    out.insert(out.end(), extra.begin(), extra.end());
    out.insert(out.end(), args.begin() + 2, args.end());
    return out;
}

int exit_code_for(const std::string& kind) {
    static const std::set<std::string> config_like{"config", "io", "parse", "schema", "spec"};
    return config_like.count(kind) ? 2 : 1;
}

}  // namespace
}  // namespace dmlcqr::cli

int main(int argc, char** argv) {
    using namespace dmlcqr::cli;
    CLI::App app{"Double/debiased machine learning for censored quantile regression"};
    app.require_subcommand(1);
    app.set_version_flag("--version", DMLCQR_VERSION);

    Common common;
    common.threads = default_threads();
    Rules rules;
    DgpOpts dgp;
    StudyOpts study;
    GridOpts grid;
    EstimateOpts est;
    std::string dgp_out;

    auto* e = app.add_subcommand("estimate", "Estimate the quantile treatment effect on a CSV file");
    add_common(e, common);
    add_rules(e, rules);
    e->add_option("--data", est.data, "Input CSV")->required();
    e->add_option("--outcome", est.outcome, "Outcome column")->capture_default_str();
    e->add_option("--treatment", est.treatment, "Treatment column")->capture_default_str();
    e->add_option("--controls", est.controls, "Control columns (default: all remaining)")->delimiter(',');
    auto* cc = e->add_option("--censor-const", est.censor_const, "Constant censoring point")->expected(1);
    auto* ccol = e->add_option("--censor-col", est.censor_col, "Column of censoring points");
    auto* cind = e->add_option("--censor-indicator", est.censor_indicator, "0/1 not-censored column");
    cc->excludes(ccol)->excludes(cind);
    ccol->excludes(cind);
    e->add_option("--censor-side", est.censor_side, "left or right")->capture_default_str();
    e->add_option("--terms", est.terms, "Expansion terms, e.g. 'inc:poly=2,knots=6;age'");
    e->add_option("--interactions", est.interactions, "Interaction sets, e.g. 'a*b*c'")->delimiter(',');
    e->add_flag("--no-standardize", est.no_standardize, "Keep raw column scales");
    e->add_option("--tau", est.taus, "Quantile indices")->delimiter(',')->capture_default_str();

    auto* s = app.add_subcommand("simulate", "Monte-Carlo study on the simulated design");
    add_common(s, common);
    add_rules(s, rules);
    add_dgp(s, dgp);
    s->add_option("--reps", study.reps, "Replications")->capture_default_str();
    s->add_option("--estimators", study.estimators, "naive_ps,hdcqr,dmlcqr,oracle")
        ->delimiter(',')
        ->capture_default_str();

    auto* g = app.add_subcommand("coverage", "Rejection frequencies over an (R^2_d, R^2_y) grid");
    add_common(g, common);
    add_rules(g, rules);
    add_dgp(g, dgp);
    g->add_option("--reps", study.reps, "Replications per cell")->capture_default_str();
    g->add_option("--estimators", study.estimators, "naive_ps,hdcqr,dmlcqr,oracle")
        ->delimiter(',')
        ->capture_default_str();
    g->add_option("--grid", grid.grid, "R^2 values for both axes")->delimiter(',')->capture_default_str();
    g->add_option("--r2-d-grid", grid.r2_d_grid, "R^2_d values (overrides --grid)")->delimiter(',');
    g->add_option("--r2-y-grid", grid.r2_y_grid, "R^2_y values (overrides --grid)")->delimiter(',');

    auto* d = app.add_subcommand("dgp", "Export one simulated replication as CSV");
    add_common(d, common);
    add_dgp(d, dgp);
    d->add_option("--out", dgp_out, "Output CSV (default: <out-dir>/dgp.csv)");

    std::vector<std::string> args(argv, argv + argc);
    try {
        args = merge_config(args);
    } catch (const dmlcqr::Error& ex) {
        std::cerr << error_record(ex.kind(), ex.what()).dump() << "\n";
        return 2;
    }
    // CLI11 consumes arguments from the back.
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForVersion& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        std::cerr << error_record("config", ex.what()).dump() << "\n";
        return 2;
    }

    try {
        if (e->parsed()) return cmd_estimate(e, common, rules, est);
        if (s->parsed()) return cmd_simulate(s, common, rules, dgp, study);
        if (g->parsed()) return cmd_coverage(g, common, rules, dgp, study, grid);
        if (d->parsed()) return cmd_dgp(d, common, dgp, dgp_out);
    } catch (const dmlcqr::Error& ex) {
        std::cerr << error_record(ex.kind(), ex.what()).dump() << "\n";
        return exit_code_for(ex.kind());
    } catch (const std::exception& ex) {
        std::cerr << error_record("internal", ex.what()).dump() << "\n";
        return 1;
    }
    return 2;
}
