#pragma once
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dmlcqr/dataset.hpp"

namespace dmlcqr {

/// Why a candidate column did not make it into the final design.
struct DroppedColumn {
    std::string name;
    std::string reason;
};

struct DesignMatrix {
    Eigen::MatrixXd x;
    std::vector<std::string> column_names;
    /// Divisor applied to each column; 1 for the intercept and for
    /// columns that were never standardized.
    Eigen::VectorXd scale;
    Eigen::Index intercept_col = 0;
    std::vector<DroppedColumn> dropped;
    std::vector<std::string> warnings;

    Eigen::Index rows() const { return x.rows(); }
    Eigen::Index p() const { return x.cols(); }

    DesignMatrix subset_rows(const std::vector<Eigen::Index>& rows) const;
    DesignMatrix subset_cols(const std::vector<Eigen::Index>& cols) const;

    /// Maps coefficients fitted on the standardized columns back to raw units.
    Eigen::VectorXd to_raw_units(const Eigen::VectorXd& coef) const;
};

/// Expansion of a single raw control.
struct TermSpec {
    std::string control;
    int poly_degree = 1;
    /// Explicit knots for a truncated-power quadratic spline. Empty = none.
    std::vector<double> knots;
    /// Number of knots at equally spaced sample quantiles; used when
    /// `knots` is empty. 0 = no spline.
    int quantile_knots = 0;
};

struct ExpansionRecipe {
    std::vector<TermSpec> terms;
    /// Each inner set contributes all pairwise products of its members.
    std::vector<std::vector<std::string>> interactions;

    /// Every control enters linearly, no interactions.
    static ExpansionRecipe linear(const std::vector<std::string>& controls);

    /// Parses `name:poly=2,knots=6;name2:knots_at=1|2|3` style term lists and
    /// `a*b*c` interaction sets. See README for the grammar.
    static ExpansionRecipe parse(const std::string& terms, const std::vector<std::string>& interactions);
};

/// Builds intercept + polynomial + spline + interaction columns and drops
/// perfectly collinear ones (in column order, relative tolerance 1e-10).
DesignMatrix build_design(const Dataset& data, const ExpansionRecipe& recipe);

/// Divides each non-intercept column by its root mean square. Columns with
/// zero variance are dropped with a warning.
DesignMatrix standardize(const DesignMatrix& design);

/// Indices of columns that survive an in-order Gram-Schmidt rank scan.
std::vector<Eigen::Index> independent_columns(const Eigen::MatrixXd& x, double rel_tol = 1e-10);

}  // namespace dmlcqr
