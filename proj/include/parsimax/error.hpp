#ifndef PARSIMAX_ERROR_HPP
#define PARSIMAX_ERROR_HPP

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace parsimax {

enum class ErrorKind {
  // data errors
  invalid_argument,
  dimension_mismatch,
  file_not_found,
  missing_column,
  non_numeric_cell,
  too_few_rows,
  empty_betas,
  // numerical errors
  not_positive_definite,
  convergence_failure,
  rank_deficient,
  non_positive_dii,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "InvalidArgument";
    case ErrorKind::dimension_mismatch: return "DimensionMismatch";
    case ErrorKind::file_not_found: return "FileNotFound";
    case ErrorKind::missing_column: return "MissingColumn";
    case ErrorKind::non_numeric_cell: return "NonNumericCell";
    case ErrorKind::too_few_rows: return "TooFewRows";
    case ErrorKind::empty_betas: return "EmptyBetas";
    case ErrorKind::not_positive_definite: return "NotPositiveDefinite";
    case ErrorKind::convergence_failure: return "ConvergenceFailure";
    case ErrorKind::rank_deficient: return "RankDeficient";
    case ErrorKind::non_positive_dii: return "NonPositiveDii";
  }
  return "Unknown";
}

inline bool is_numerical(ErrorKind kind) {
  return kind == ErrorKind::not_positive_definite || kind == ErrorKind::convergence_failure ||
         kind == ErrorKind::rank_deficient || kind == ErrorKind::non_positive_dii;
}

/// Library-wide exception. `index` names the offending regressor, row or
/// column when one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(what), kind_(kind), index_(index) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

  /// Same error with `stage: ` prepended to the message.
  Error with_stage(std::string_view stage) const {
    return Error(kind_, std::string(stage) + ": " + what(), index_);
  }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> index_;
};

}  // namespace parsimax

#endif  // PARSIMAX_ERROR_HPP
