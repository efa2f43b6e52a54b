#include "dmlcqr/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <fmt/format.h>

#include "dmlcqr/errors.hpp"

namespace dmlcqr {

void Dataset::validate() const {
    const auto n = y.size();
    if (n < 2) throw ParameterError("dataset needs at least 2 observations");
    if (d.size() != n || z_raw.rows() != n || t.size() != n) {
        throw ParameterError(fmt::format(
            "dataset length mismatch: y={} d={} z={} t={}", n, d.size(), z_raw.rows(), t.size()));
    }
    if (static_cast<Eigen::Index>(control_names.size()) != z_raw.cols()) {
        throw ParameterError("control_names does not match z_raw columns");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (t[i] != 0.0 && t[i] != 1.0) {
            throw ParameterError(fmt::format("t[{}] = {} is not 0/1", i, t[i]));
        }
    }
    if (censor_value) {
        const auto& c = *censor_value;
        if (c.size() != n) throw ParameterError("censor_value length mismatch");
        for (Eigen::Index i = 0; i < n; ++i) {
            if (y[i] < c[i]) {
                throw ParameterError(
                    fmt::format("row {}: outcome {} below censoring point {}", i, y[i], c[i]));
            }
            if ((y[i] > c[i]) != (t[i] == 1.0)) {
                throw ParameterError(fmt::format("row {}: t inconsistent with (y, c)", i));
            }
        }
    }
    if (t.sum() < 1.0) throw DegenerateDataError("all observations are censored");
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
    Dataset out;
    const auto m = static_cast<Eigen::Index>(rows.size());
    out.y.resize(m);
    out.d.resize(m);
    out.t.resize(m);
    out.z_raw.resize(m, z_raw.cols());
    out.control_names = control_names;
    if (censor_value) out.censor_value = Eigen::VectorXd(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const auto i = rows[static_cast<std::size_t>(k)];
        out.y[k] = y[i];
        out.d[k] = d[i];
        out.t[k] = t[i];
        out.z_raw.row(k) = z_raw.row(i);
        if (censor_value) (*out.censor_value)[k] = (*censor_value)[i];
    }
    return out;
}

Eigen::VectorXd indicator_from_censor(const Eigen::VectorXd& y, const Eigen::VectorXd& c) {
    return (y.array() > c.array()).cast<double>().matrix();
}

Dataset censor_left(const Eigen::VectorXd& y_latent, const Eigen::VectorXd& d,
                    Eigen::MatrixXd z_raw, std::vector<std::string> control_names,
                    const Eigen::VectorXd& censor_points) {
    Dataset out;
    out.y = y_latent.cwiseMax(censor_points);
    out.d = d;
    out.z_raw = std::move(z_raw);
    out.control_names = std::move(control_names);
    out.t = indicator_from_censor(y_latent, censor_points);
    out.censor_value = censor_points;
    out.validate();
    return out;
}

std::ptrdiff_t CsvTable::column_index(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == name) return static_cast<std::ptrdiff_t>(j);
    }
    return -1;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = first + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (cell.empty() || ec != std::errc{} || ptr != last) {
        throw ParseError(fmt::format("row {}: column '{}' value '{}' is not numeric", row, column, cell));
    }
    if (!std::isfinite(value)) {
        throw ParseError(fmt::format("row {}: column '{}' value is not finite", row, column));
    }
    return value;
}

std::size_t require_column(const CsvTable& table, const std::string& name, const char* role) {
    if (name.empty()) throw SchemaError(fmt::format("schema does not name the {} column", role));
    const auto idx = table.column_index(name);
    if (idx < 0) throw SchemaError(fmt::format("{} column '{}' not found in header", role, name));
    return static_cast<std::size_t>(idx);
}

}  // namespace

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open '{}'", path));
    CsvTable table;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!have_header) {
            if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
            table.header = split_line(line);
            have_header = true;
            continue;
        }
        auto cells = split_line(line);
        if (cells.size() != table.header.size()) {
            throw ParseError(fmt::format("row {}: expected {} fields, found {}", table.rows.size(),
                                         table.header.size(), cells.size()));
        }
        table.rows.push_back(std::move(cells));
    }
    if (!have_header) throw ParseError(fmt::format("'{}' has no header row", path));
    return table;
}

Dataset dataset_from_table(const CsvTable& table, const CsvSchema& schema) {
    const auto iy = require_column(table, schema.outcome, "outcome");
    const auto id = require_column(table, schema.treatment, "treatment");
    std::vector<std::size_t> iz;
    for (const auto& c : schema.controls) iz.push_back(require_column(table, c, "control"));

    const auto n = static_cast<Eigen::Index>(table.rows.size());
    const double sign = schema.side == CensorSide::Right ? -1.0 : 1.0;
    Dataset out;
    out.y.resize(n);
    out.d.resize(n);
    out.t.resize(n);
    out.z_raw.resize(n, static_cast<Eigen::Index>(iz.size()));
    out.control_names = schema.controls;

    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = table.rows[static_cast<std::size_t>(i)];
        const auto r = static_cast<std::size_t>(i);
        out.y[i] = sign * parse_cell(row[iy], r, schema.outcome);
        out.d[i] = parse_cell(row[id], r, schema.treatment);
        for (std::size_t j = 0; j < iz.size(); ++j) {
            out.z_raw(i, static_cast<Eigen::Index>(j)) = parse_cell(row[iz[j]], r, schema.controls[j]);
        }
    }

    std::visit(
        [&](const auto& rule) {
            using R = std::decay_t<decltype(rule)>;
            if constexpr (std::is_same_v<R, CensorConstant>) {
                out.censor_value = Eigen::VectorXd::Constant(n, sign * rule.value);
            } else if constexpr (std::is_same_v<R, CensorColumn>) {
                const auto ic = require_column(table, rule.column, "censor");
                Eigen::VectorXd c(n);
                for (Eigen::Index i = 0; i < n; ++i) {
                    c[i] = sign * parse_cell(table.rows[static_cast<std::size_t>(i)][ic],
                                             static_cast<std::size_t>(i), rule.column);
                }
                out.censor_value = c;
            } else {
                const auto it = require_column(table, rule.column, "censor indicator");
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double v = parse_cell(table.rows[static_cast<std::size_t>(i)][it],
                                                static_cast<std::size_t>(i), rule.column);
                    if (v != 0.0 && v != 1.0) {
                        throw ParseError(fmt::format("row {}: indicator '{}' must be 0 or 1", i, rule.column));
                    }
                    out.t[i] = v;
                }
            }
        },
        schema.censor);

    if (out.censor_value) {
        const auto& c = *out.censor_value;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (out.y[i] < c[i]) {
                throw ParseError(fmt::format("row {}: outcome lies beyond the censoring point", i));
            }
        }
        out.t = indicator_from_censor(out.y, c);
    }
    if (n >= 1 && out.t.sum() < 1.0) throw DegenerateDataError("all observations are censored");
    out.validate();
    return out;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    return dataset_from_table(read_csv(path), schema);
}

void write_csv(const std::string& path, const Dataset& data,
               const std::vector<std::string>& header_comments) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot write '{}'", path));
    for (const auto& line : header_comments) out << "# " << line << '\n';
    out << "y,d";
    for (const auto& name : data.control_names) out << ',' << name;
    out << (data.censor_value ? ",c" : ",t") << '\n';
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        out << fmt::format("{:.17g},{:.17g}", data.y[i], data.d[i]);
        for (Eigen::Index j = 0; j < data.z_raw.cols(); ++j) out << fmt::format(",{:.17g}", data.z_raw(i, j));
        if (data.censor_value) {
            out << fmt::format(",{:.17g}", (*data.censor_value)[i]);
        } else {
            out << fmt::format(",{:g}", data.t[i]);
        }
        out << '\n';
    }
}

CsvSchema default_schema(const Dataset& data) {
    CsvSchema s;
    s.outcome = "y";
    s.treatment = "d";
    s.controls = data.control_names;
    if (data.censor_value) {
        s.censor = CensorColumn{"c"};
    } else {
        s.censor = CensorIndicator{"t"};
    }
    return s;
}

}  // namespace dmlcqr
