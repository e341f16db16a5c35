#ifndef LCKF_ERRORS_HPP
#define LCKF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lckf {

/// Failure categories surfaced by the toolkit. The CLI maps these onto its
/// exit codes (parse -> 2, model/statistics at load -> 3, anything hit while
/// filtering or aggregating -> 4).
enum class ErrorCode {
  kParse,            // malformed scenario file or arguments
  kModel,            // inconsistent dimensions / invalid system matrices
  kStatistics,       // covariance not PSD, factorization failure
  kConditioning,     // solve aborted by the condition-number guard
  kConstraint,       // rank-deficient constraint matrix
  kDegreesOfFreedom, // constraint set leaves the gain no freedom
  kSchedule,         // inconsistent constraint-family sequencing
  kRegime,           // operation outside its statistical regime
  kInitialization,   // invalid filter initialization
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lckf

#endif  // LCKF_ERRORS_HPP
