#pragma once
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dmlcqr {

// Base class for every error raised by the library. `kind()` is a stable
// machine-readable tag used in CLI error records.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(msg), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define DMLCQR_ERROR_TYPE(Name, tag)                                        \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string& msg) : Error(tag, msg) {}          \
    };

DMLCQR_ERROR_TYPE(ParameterError, "parameter")
DMLCQR_ERROR_TYPE(SchemaError, "schema")
DMLCQR_ERROR_TYPE(ParseError, "parse")
DMLCQR_ERROR_TYPE(IoError, "io")
DMLCQR_ERROR_TYPE(SpecError, "spec")
DMLCQR_ERROR_TYPE(DegenerateDataError, "degenerate_data")
DMLCQR_ERROR_TYPE(QualityError, "quality")
DMLCQR_ERROR_TYPE(SearchError, "search")
DMLCQR_ERROR_TYPE(SingularJacobianError, "singular_jacobian")
DMLCQR_ERROR_TYPE(DegenerateFoldError, "degenerate_fold")
DMLCQR_ERROR_TYPE(RankError, "rank")
DMLCQR_ERROR_TYPE(ConfigError, "config")

#undef DMLCQR_ERROR_TYPE

// Solver failed to converge. Carries the last iterate so callers can inspect it.
class FitError : public Error {
public:
    FitError(const std::string& msg, Eigen::VectorXd last_iterate)
        : Error("fit", msg), last_(std::move(last_iterate)) {}
    const Eigen::VectorXd& last_iterate() const noexcept { return last_; }

private:
    Eigen::VectorXd last_;
};

}  // namespace dmlcqr
