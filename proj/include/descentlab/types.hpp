#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace descentlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Failure categories. The C API maps each one onto a status code.
enum class ErrorCode {
  invalid_argument,
  hypothesis_violation,
  divergence,
  not_converged,
  config,
  io,
  verdict_failed,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::invalid_argument, what);
}

/// Returns the value of an optional constant or throws naming it.
inline double need(const std::optional<double>& v, const char* name) {
  if (!v) fail(ErrorCode::invalid_argument, std::string("missing constant: ") + name);
  return *v;
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace descentlab
