#ifndef PCRISK_ERROR_HPP
#define PCRISK_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace pcrisk {

enum class Errc {
  invalid_input,
  out_of_bounds,
  schema,
  duplicate_timestamp,
  missing_variable,
  insufficient_data,
  degenerate_variance,
  undefined_test,
  degenerate_partition,
  stratification,
  non_convergence,
  validation,
  config,
  io,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_input: return "invalid-input";
    case Errc::out_of_bounds: return "out-of-bounds";
    case Errc::schema: return "schema";
    case Errc::duplicate_timestamp: return "duplicate-timestamp";
    case Errc::missing_variable: return "missing-variable";
    case Errc::insufficient_data: return "insufficient-data";
    case Errc::degenerate_variance: return "degenerate-variance";
    case Errc::undefined_test: return "undefined-test";
    case Errc::degenerate_partition: return "degenerate-partition";
    case Errc::stratification: return "stratification";
    case Errc::non_convergence: return "non-convergence";
    case Errc::validation: return "validation";
    case Errc::config: return "config";
    case Errc::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Raised when an iterative trainer diverges; carries the last finite loss.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double last_loss)
      : Error(Errc::non_convergence, what), last_loss_(last_loss) {}

  [[nodiscard]] double last_loss() const noexcept { return last_loss_; }

 private:
  double last_loss_;
};

}  // namespace pcrisk

#endif  // PCRISK_ERROR_HPP
