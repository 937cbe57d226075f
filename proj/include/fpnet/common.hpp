#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fpnet {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Root of every error the library throws. `code()` is a stable short tag
/// suitable for machine parsing (the CLI prints it before the message).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct InvalidParameter : Error {
  explicit InvalidParameter(const std::string& what) : Error("invalid-parameter", what) {}
};

struct InvalidSize : Error {
  explicit InvalidSize(const std::string& what) : Error("invalid-size", what) {}
};

struct ConnectivityError : Error {
  explicit ConnectivityError(const std::string& what) : Error("connectivity", what) {}
};

struct ContractViolation : Error {
  explicit ContractViolation(const std::string& what) : Error("contract-violation", what) {}
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& what) : Error("dimension-mismatch", what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

struct InfeasibleParameters : Error {
  explicit InfeasibleParameters(const std::string& what) : Error("infeasible-parameters", what) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error("parse", what) {}
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidParameter(what);
}

}  // namespace fpnet
