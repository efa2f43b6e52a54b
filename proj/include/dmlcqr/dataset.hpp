#pragma once
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace dmlcqr {

/// Observations for a left-censored outcome model y = max(y*, c).
///
/// `t` holds the not-censored indicator as 0.0/1.0 so it can enter
/// arithmetic directly. Right-censored inputs are negated at ingestion,
/// so every Dataset is left-censored internally.
struct Dataset {
    Eigen::VectorXd y;
    Eigen::VectorXd d;
    Eigen::MatrixXd z_raw;
    std::vector<std::string> control_names;
    Eigen::VectorXd t;
    std::optional<Eigen::VectorXd> censor_value;

    Eigen::Index n() const { return y.size(); }

    /// Checks every invariant; throws ParameterError / DegenerateDataError.
    void validate() const;

    /// Rows in the given order.
    Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

/// Builds a Dataset from latent outcomes and censoring points, deriving
/// y = max(y*, c) and t = I(y* > c).
Dataset censor_left(const Eigen::VectorXd& y_latent, const Eigen::VectorXd& d,
                    Eigen::MatrixXd z_raw, std::vector<std::string> control_names,
                    const Eigen::VectorXd& censor_points);

/// t recomputed from (y, c): 1 exactly when y > c.
Eigen::VectorXd indicator_from_censor(const Eigen::VectorXd& y, const Eigen::VectorXd& c);

enum class CensorSide { Left, Right };

struct CensorConstant {
    double value;
};
struct CensorColumn {
    std::string column;
};
struct CensorIndicator {
    std::string column;
};
using CensorRule = std::variant<CensorConstant, CensorColumn, CensorIndicator>;

struct CsvSchema {
    std::string outcome;
    std::string treatment;
    std::vector<std::string> controls;
    CensorRule censor = CensorConstant{0.0};
    CensorSide side = CensorSide::Left;
};

/// Minimal CSV table: header + numeric-or-text cells kept as strings.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::ptrdiff_t column_index(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

Dataset load_csv(const std::string& path, const CsvSchema& schema);
Dataset dataset_from_table(const CsvTable& table, const CsvSchema& schema);

/// Writes the dataset in the layout load_csv expects with a censor column
/// named "c" (or an indicator column "t" when no censoring points exist).
void write_csv(const std::string& path, const Dataset& data,
               const std::vector<std::string>& header_comments = {});

/// Schema matching write_csv output.
CsvSchema default_schema(const Dataset& data);

}  // namespace dmlcqr
