#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ksmooth {

/// Settings shared by the simplex optimizer and the bandwidth selector.
struct OptimizerConfig {
  int max_evaluations = 2000;        // per optimizer run
  double simplex_tolerance = 1e-7;   // relative spread of criterion values across the simplex
  int restarts = 2;                  // optimizer runs per starting point (each from the previous optimum)
  std::vector<double> initial_scales = {0.25, 1.0, 4.0};  // multipliers on the rule-of-thumb start
  std::uint64_t seed = 0;            // recorded for reproducibility; the optimizer is deterministic
  double upper_log_cap = std::log(1e8);  // log-bandwidth ceiling standing in for infinity
  double initial_step = 0.5;         // simplex edge length in optimizer coordinates

  void validate() const;
};

void to_json(nlohmann::json& j, const OptimizerConfig& c);
void from_json(const nlohmann::json& j, OptimizerConfig& c);

struct NelderMeadResult {
  std::vector<double> argmin;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

/// Nelder-Mead simplex descent with reflection 1, expansion 2, contraction 0.5 and
/// shrink 0.5. Every trial point is projected onto the box [lower, upper]; the
/// default box is [-upper_log_cap, upper_log_cap] in every coordinate, so a
/// coordinate drifting to +infinity ends exactly on the cap.
///
/// Stops when (f_worst - f_best) <= simplex_tolerance * (|f_best| + 1e-12), when
/// the simplex collapses, or after max_evaluations objective calls.
NelderMeadResult nelder_mead(const Objective& objective, std::span<const double> initial, const OptimizerConfig& config);
NelderMeadResult nelder_mead(const Objective& objective, std::span<const double> initial, const OptimizerConfig& config,
                             std::span<const double> lower, std::span<const double> upper);

}  // namespace ksmooth
