#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mtm {

/// Finite-difference gradient checks for every kernel op and the full loss.
///
/// Error measure per input tensor: max_i |a_i - n_i| / max(max_i |n_i|, 1e-8),
/// where a is the analytic and n the central-difference gradient. The
/// differences are always taken in 64-bit, so the 32-bit column measures the
/// error of the 32-bit analytic gradient. Coordinates whose central window
/// straddles a relu kink are detected by a one-sided slope mismatch and
/// skipped (the function is not differentiable there).
struct GradCheckOptions {
  std::size_t cases_per_op = 20;
  std::uint64_t seed = 20240601;
  double step = 1e-6;       // kernel ops
  double loss_step = 1e-5;  // full loss (larger: its value carries more rounding noise)
  std::size_t loss_coordinates = 96;  // sampled parameter coordinates per loss case
  double tol64 = 1e-6;
  double tol32 = 1e-4;
};

struct GradCheckRow {
  std::string op;
  std::size_t cases = 0;
  bool covers_length_one = false;
  double max_error64 = 0;
  double max_error32 = 0;
  std::size_t skipped_coordinates = 0;
  std::string worst_case;  // shape description of the worst 64-bit case
  bool ok = false;
};

std::vector<GradCheckRow> run_gradcheck_suite(const GradCheckOptions& options = {});

/// Names of the checked ops, in suite order.
std::vector<std::string> gradcheck_op_names();

}  // namespace mtm
