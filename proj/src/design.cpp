#include "dmlcqr/design.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "dmlcqr/errors.hpp"
#include "dmlcqr/stats.hpp"

namespace dmlcqr {

DesignMatrix DesignMatrix::subset_rows(const std::vector<Eigen::Index>& rows) const {
    DesignMatrix out = *this;
    out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.x.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
    return out;
}

DesignMatrix DesignMatrix::subset_cols(const std::vector<Eigen::Index>& cols) const {
    DesignMatrix out;
    out.x.resize(x.rows(), static_cast<Eigen::Index>(cols.size()));
    out.scale.resize(static_cast<Eigen::Index>(cols.size()));
    out.intercept_col = -1;
    for (std::size_t k = 0; k < cols.size(); ++k) {
        const auto j = cols[k];
        const auto kk = static_cast<Eigen::Index>(k);
        out.x.col(kk) = x.col(j);
        out.scale[kk] = scale[j];
        out.column_names.push_back(column_names[static_cast<std::size_t>(j)]);
        if (j == intercept_col) out.intercept_col = kk;
    }
    if (out.intercept_col < 0) throw ParameterError("column subset must keep the intercept");
    out.dropped = dropped;
    out.warnings = warnings;
    return out;
}

Eigen::VectorXd DesignMatrix::to_raw_units(const Eigen::VectorXd& coef) const {
    return coef.cwiseQuotient(scale);
}

std::vector<Eigen::Index> independent_columns(const Eigen::MatrixXd& x, double rel_tol) {
    std::vector<Eigen::Index> kept;
    Eigen::MatrixXd basis(x.rows(), 0);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        Eigen::VectorXd v = x.col(j);
        const double norm0 = v.norm();
        if (norm0 == 0.0) continue;
        // Two passes of modified Gram-Schmidt for numerical stability.
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index k = 0; k < basis.cols(); ++k) v -= basis.col(k).dot(v) * basis.col(k);
        }
        const double rnorm = v.norm();
        if (rnorm > rel_tol * norm0) {
            basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
            basis.col(basis.cols() - 1) = v / rnorm;
            kept.push_back(j);
        }
    }
    return kept;
}

ExpansionRecipe ExpansionRecipe::linear(const std::vector<std::string>& controls) {
    ExpansionRecipe r;
    for (const auto& c : controls) r.terms.push_back(TermSpec{c, 1, {}, 0});
    return r;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& s) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw SpecError("bad number '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        throw SpecError("bad number '" + s + "'");
    }
}

}  // namespace

ExpansionRecipe ExpansionRecipe::parse(const std::string& terms,
                                       const std::vector<std::string>& interactions) {
    ExpansionRecipe r;
    for (const auto& item : split(terms, ';')) {
        TermSpec t;
        const auto colon = item.find(':');
        t.control = item.substr(0, colon);
        if (colon != std::string::npos) {
            for (const auto& opt : split(item.substr(colon + 1), ',')) {
                const auto eq = opt.find('=');
                if (eq == std::string::npos) throw SpecError("term option '" + opt + "' needs key=value");
                const auto key = opt.substr(0, eq);
                const auto val = opt.substr(eq + 1);
                if (key == "poly") {
                    t.poly_degree = static_cast<int>(to_double(val));
                } else if (key == "knots") {
                    t.quantile_knots = static_cast<int>(to_double(val));
                } else if (key == "knots_at") {
                    for (const auto& k : split(val, '|')) t.knots.push_back(to_double(k));
                } else {
                    throw SpecError("unknown term option '" + key + "'");
                }
            }
        }
        r.terms.push_back(std::move(t));
    }
    for (const auto& set : interactions) r.interactions.push_back(split(set, '*'));
    return r;
}

DesignMatrix build_design(const Dataset& data, const ExpansionRecipe& recipe) {
    const auto n = data.n();
    auto control_index = [&](const std::string& name) {
        for (std::size_t j = 0; j < data.control_names.size(); ++j) {
            if (data.control_names[j] == name) return static_cast<Eigen::Index>(j);
        }
        throw SpecError("recipe references unknown control '" + name + "'");
    };

    std::vector<Eigen::VectorXd> cols;
    std::vector<std::string> names;
    std::set<std::string> seen;
    auto add = [&](std::string name, Eigen::VectorXd col) {
        if (!seen.insert(name).second) {
            // A repeated term yields an identical copy, left for the collinearity scan.
            const auto it = std::find(names.begin(), names.end(), name);
            if (cols[static_cast<std::size_t>(it - names.begin())] != col) {
                throw SpecError("duplicate column name '" + name + "'");
            }
            name += fmt::format("#{}", std::count_if(names.begin(), names.end(), [&](const std::string& s) {
                                    return s.rfind(name + "#", 0) == 0;
                                }) + 2);
        }
        names.push_back(std::move(name));
        cols.push_back(std::move(col));
    };

    add("(intercept)", Eigen::VectorXd::Ones(n));
    for (const auto& term : recipe.terms) {
        const Eigen::VectorXd u = data.z_raw.col(control_index(term.control));
        if (term.poly_degree < 0) throw SpecError("negative polynomial degree for " + term.control);
        const bool spline = !term.knots.empty() || term.quantile_knots > 0;
        const int degree = spline ? std::max(term.poly_degree, 2) : term.poly_degree;
        for (int k = 1; k <= degree; ++k) {
            add(k == 1 ? term.control : fmt::format("{}^{}", term.control, k), u.array().pow(k).matrix());
        }
        if (!spline) continue;
        std::vector<double> knots = term.knots;
        if (knots.empty()) {
            // Equally spaced interior sample quantiles.
            for (int j = 1; j <= term.quantile_knots; ++j) {
                knots.push_back(empirical_quantile(as_span(u), static_cast<double>(j) / (term.quantile_knots + 1)));
            }
        }
        const double lo = u.minCoeff();
        const double hi = u.maxCoeff();
        for (std::size_t j = 0; j < knots.size(); ++j) {
            const double k = knots[j];
            if (!(k > lo && k < hi)) {
                throw SpecError(fmt::format("knot {} for '{}' outside data range ({}, {})", k, term.control, lo, hi));
            }
            add(fmt::format("({}-{:.6g})^2+", term.control, k),
                (u.array() - k).max(0.0).square().matrix());
        }
    }
    for (const auto& set : recipe.interactions) {
        for (std::size_t a = 0; a < set.size(); ++a) {
            for (std::size_t b = a + 1; b < set.size(); ++b) {
                const Eigen::VectorXd ua = data.z_raw.col(control_index(set[a]));
                const Eigen::VectorXd ub = data.z_raw.col(control_index(set[b]));
                add(set[a] + ":" + set[b], ua.cwiseProduct(ub));
            }
        }
    }

    Eigen::MatrixXd all(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) all.col(static_cast<Eigen::Index>(j)) = cols[j];

    const auto keep = independent_columns(all);
    DesignMatrix out;
    out.x.resize(n, static_cast<Eigen::Index>(keep.size()));
    std::size_t next = 0;
    for (Eigen::Index j = 0; j < all.cols(); ++j) {
        if (next < keep.size() && keep[next] == j) {
            out.x.col(static_cast<Eigen::Index>(next)) = all.col(j);
            out.column_names.push_back(names[static_cast<std::size_t>(j)]);
            ++next;
        } else {
            out.dropped.push_back({names[static_cast<std::size_t>(j)], "collinear"});
        }
    }
    out.scale = Eigen::VectorXd::Ones(out.x.cols());
    out.intercept_col = 0;
    return out;
}

DesignMatrix standardize(const DesignMatrix& design) {
    if (design.p() < 2) throw ParameterError("standardize: design has no non-intercept column");
    const auto n = static_cast<double>(design.rows());
    DesignMatrix out;
    out.dropped = design.dropped;
    out.warnings = design.warnings;
    std::vector<Eigen::Index> keep;
    std::vector<double> scales;
    for (Eigen::Index j = 0; j < design.p(); ++j) {
        const auto col = design.x.col(j);
        if (j == design.intercept_col) {
            keep.push_back(j);
            scales.push_back(design.scale[j]);
            continue;
        }
        const double m = col.mean();
        const double var = (col.array() - m).square().sum() / n;
        const double rms = std::sqrt(col.squaredNorm() / n);
        if (!(var > 1e-14 * std::max(1.0, m * m)) || !(rms > 0.0) || !std::isfinite(rms)) {
            const auto& name = design.column_names[static_cast<std::size_t>(j)];
            out.dropped.push_back({name, "zero variance"});
            out.warnings.push_back("dropped zero-variance column '" + name + "'");
            continue;
        }
        keep.push_back(j);
        scales.push_back(design.scale[j] * rms);
    }
    out.x.resize(design.rows(), static_cast<Eigen::Index>(keep.size()));
    out.scale.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const auto j = keep[k];
        const auto kk = static_cast<Eigen::Index>(k);
        const double div = j == design.intercept_col ? 1.0 : scales[k] / design.scale[j];
        out.x.col(kk) = design.x.col(j) / div;
        out.scale[kk] = scales[k];
        out.column_names.push_back(design.column_names[static_cast<std::size_t>(j)]);
        if (j == design.intercept_col) out.intercept_col = kk;
    }
    return out;
}

}  // namespace dmlcqr
