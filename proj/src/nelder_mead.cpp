#include "ksmooth/nelder_mead.hpp"

#include "ksmooth/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <limits>
#include <numeric>

namespace ksmooth {

void OptimizerConfig::validate() const {
  if (max_evaluations <= 0) throw Error(ErrorCode::InvalidConfig, "max_evaluations must be positive");
  if (restarts < 1) throw Error(ErrorCode::InvalidConfig, "restarts must be at least 1");
  if (!(simplex_tolerance > 0.0)) throw Error(ErrorCode::InvalidConfig, "simplex_tolerance must be positive");
  if (!std::isfinite(upper_log_cap) || upper_log_cap <= 0.0)
    throw Error(ErrorCode::InvalidConfig, "upper_log_cap must be finite and positive");
  if (initial_scales.empty()) throw Error(ErrorCode::InvalidConfig, "initial_scales must not be empty");
  for (double s : initial_scales)
    if (!(s > 0.0)) throw Error(ErrorCode::InvalidConfig, "initial_scales must be positive");
  if (!(initial_step > 0.0)) throw Error(ErrorCode::InvalidConfig, "initial_step must be positive");
}

void to_json(nlohmann::json& j, const OptimizerConfig& c) {
  j = nlohmann::json{{"max_evaluations", c.max_evaluations}, {"simplex_tolerance", c.simplex_tolerance},
                     {"restarts", c.restarts},         {"initial_scales", c.initial_scales},
                     {"seed", c.seed},                 {"upper_log_cap", c.upper_log_cap},
                     {"initial_step", c.initial_step}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& c) {
  c.max_evaluations = j.value("max_evaluations", c.max_evaluations);
  c.simplex_tolerance = j.value("simplex_tolerance", c.simplex_tolerance);
  c.restarts = j.value("restarts", c.restarts);
  c.initial_scales = j.value("initial_scales", c.initial_scales);
  c.seed = j.value("seed", c.seed);
  c.upper_log_cap = j.value("upper_log_cap", c.upper_log_cap);
  c.initial_step = j.value("initial_step", c.initial_step);
}

NelderMeadResult nelder_mead(const Objective& objective, std::span<const double> initial, const OptimizerConfig& config) {
  const std::vector<double> lower(initial.size(), -config.upper_log_cap);
  const std::vector<double> upper(initial.size(), config.upper_log_cap);
  return nelder_mead(objective, initial, config, lower, upper);
}

NelderMeadResult nelder_mead(const Objective& objective, std::span<const double> initial, const OptimizerConfig& config,
                             std::span<const double> lower, std::span<const double> upper) {
  config.validate();
  const std::size_t n = initial.size();
  if (n == 0 || lower.size() != n || upper.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "optimizer bounds must match the initial point");

  using Point = std::vector<double>;
  auto project = [&](Point& p) {
    for (std::size_t k = 0; k < n; ++k) p[k] = std::clamp(p[k], lower[k], upper[k]);
  };

  NelderMeadResult result;
  auto eval = [&](const Point& p) {
    ++result.evaluations;
    const double v = objective(p);
    return std::isnan(v) ? std::numeric_limits<double>::max() : v;
  };

  std::vector<Point> x(n + 1, Point(initial.begin(), initial.end()));
  project(x[0]);
  for (std::size_t k = 0; k < n; ++k) {
    x[k + 1] = x[0];
    const double up = x[0][k] + config.initial_step;
    x[k + 1][k] = up <= upper[k] ? up : x[0][k] - config.initial_step;
    project(x[k + 1]);
  }
  std::vector<double> f(n + 1);
  for (std::size_t v = 0; v <= n; ++v) f[v] = eval(x[v]);

  std::vector<std::size_t> order(n + 1);
  Point centroid(n), xr(n), xe(n), xc(n);
  auto along = [&](Point& out, const Point& from, const Point& to, double t) {
    for (std::size_t k = 0; k < n; ++k) out[k] = from[k] + t * (to[k] - from[k]);
    project(out);
  };

  while (true) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
    {
      std::vector<Point> xs(n + 1);
      std::vector<double> fs(n + 1);
      for (std::size_t v = 0; v <= n; ++v) {
        xs[v] = std::move(x[order[v]]);
        fs[v] = f[order[v]];
      }
      x.swap(xs);
      f.swap(fs);
    }

    const double spread = f[n] - f[0];
    if (spread <= config.simplex_tolerance * (std::abs(f[0]) + 1e-12)) {
      result.converged = true;
      break;
    }
    double diameter = 0.0;
    for (std::size_t v = 1; v <= n; ++v)
      for (std::size_t k = 0; k < n; ++k) diameter = std::max(diameter, std::abs(x[v][k] - x[0][k]));
    if (diameter < 1e-12) {
      result.converged = true;
      break;
    }
    if (result.evaluations >= config.max_evaluations) break;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t k = 0; k < n; ++k) centroid[k] += x[v][k];
    for (auto& c : centroid) c /= static_cast<double>(n);

    along(xr, centroid, x[n], -1.0);
    const double fr = eval(xr);
    if (fr < f[0]) {
      along(xe, centroid, x[n], -2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        x[n] = xe;
        f[n] = fe;
      } else {
        x[n] = xr;
        f[n] = fr;
      }
      continue;
    }
    if (fr < f[n - 1]) {
      x[n] = xr;
      f[n] = fr;
      continue;
    }
    const bool outside = fr < f[n];
    along(xc, centroid, outside ? xr : x[n], 0.5);
    const double fc = eval(xc);
    if (fc < (outside ? fr : f[n])) {
      x[n] = xc;
      f[n] = fc;
      continue;
    }
    for (std::size_t v = 1; v <= n; ++v) {
      along(x[v], x[0], x[v], 0.5);
      f[v] = eval(x[v]);
    }
  }

  result.argmin = x[0];
  result.value = f[0];
  return result;
}

}  // namespace ksmooth
