#include "ksmooth/run.hpp"

#include "ksmooth/bandwidth.hpp"
#include "ksmooth/cv.hpp"
#include "ksmooth/estimators.hpp"
#include "ksmooth/io.hpp"
#include "ksmooth/kernel.hpp"
#include "ksmooth/parallel.hpp"
#include "ksmooth/simulation.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>

namespace ksmooth {

std::string_view command_name(Command c) {
  switch (c) {
    case Command::Fit: return "fit";
    case Command::Select: return "select";
    case Command::Simulate: return "simulate";
    case Command::RateCheck: return "rate-check";
    case Command::Screen: return "screen";
  }
  return "unknown";
}

Command parse_command(std::string_view name) {
  if (name == "fit") return Command::Fit;
  if (name == "select") return Command::Select;
  if (name == "simulate") return Command::Simulate;
  if (name == "rate-check") return Command::RateCheck;
  if (name == "screen") return Command::Screen;
  throw Error(ErrorCode::InvalidConfig, "unknown command '" + std::string(name) + "'");
}

void RunConfig::validate() const {
  optimizer.validate();
  parse_kernel(kernel);
  parse_form(form);
  parse_task(task);
  parse_criterion(criterion);
  if (!(divergence_factor > 0.0)) throw Error(ErrorCode::InvalidConfig, "divergence factor must be positive");
  for (std::size_t k = 1; k < n_list.size(); ++k)
    if (n_list[k] <= n_list[k - 1]) throw Error(ErrorCode::InvalidConfig, "n list must be strictly increasing");
  const bool has_data = input_path.has_value() || (case_id.has_value() && !n_list.empty());
  switch (command) {
    case Command::Fit:
    case Command::Select:
    case Command::Screen:
      if (!has_data) throw Error(ErrorCode::InvalidConfig, "needs --input or --case with --n");
      if (!input_path && n_list.size() != 1) throw Error(ErrorCode::InvalidConfig, "give a single --n");
      break;
    case Command::Simulate:
      if (!case_id || n_list.empty()) throw Error(ErrorCode::InvalidConfig, "simulate needs --case and --n");
      break;
    case Command::RateCheck:
      if (!case_id || n_list.size() < 3) throw Error(ErrorCode::InvalidConfig, "rate-check needs --case and three or more --n values");
      break;
  }
  if ((command == Command::Simulate || command == Command::RateCheck) && replications < 1)
    throw Error(ErrorCode::InvalidConfig, "replications must be at least 1");
  if ((command == Command::Simulate || command == Command::RateCheck) && test_points < 100)
    throw Error(ErrorCode::InvalidConfig, "test points must be at least 100");
  if (case_id && (*case_id < 1 || *case_id > 3)) throw Error(ErrorCode::InvalidConfig, "case must be 1, 2 or 3");
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"command", command_name(c.command)},
                     {"output", c.output_path.string()},
                     {"kernel", c.kernel},
                     {"form", c.form},
                     {"task", c.task},
                     {"criterion", c.criterion},
                     {"response", c.response_columns},
                     {"seed", c.seed},
                     {"n", c.n_list},
                     {"replications", c.replications},
                     {"test_points", c.test_points},
                     {"optimizer", c.optimizer},
                     {"divergence_factor", c.divergence_factor}};
  j["input"] = c.input_path ? nlohmann::json(c.input_path->string()) : nlohmann::json();
  j["queries"] = c.query_path ? nlohmann::json(c.query_path->string()) : nlohmann::json();
  j["bandwidth"] = c.bandwidth_path ? nlohmann::json(c.bandwidth_path->string()) : nlohmann::json();
  j["case"] = c.case_id ? nlohmann::json(*c.case_id) : nlohmann::json();
}

void from_json(const nlohmann::json& in, RunConfig& c) {
  const nlohmann::json& j = in.contains("config") && in.at("config").is_object() ? in.at("config") : in;
  try {
    if (j.contains("command")) c.command = parse_command(j.at("command").get<std::string>());
    auto path = [&](const char* key, std::optional<std::filesystem::path>& dst) {
      if (j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<std::string>();
    };
    path("input", c.input_path);
    path("queries", c.query_path);
    path("bandwidth", c.bandwidth_path);
    if (j.contains("output")) c.output_path = j.at("output").get<std::string>();
    c.kernel = j.value("kernel", c.kernel);
    c.form = j.value("form", c.form);
    c.task = j.value("task", c.task);
    c.criterion = j.value("criterion", c.criterion);
    c.response_columns = j.value("response", c.response_columns);
    c.seed = j.value("seed", c.seed);
    if (j.contains("case") && !j.at("case").is_null()) c.case_id = j.at("case").get<int>();
    c.n_list = j.value("n", c.n_list);
    c.replications = j.value("replications", c.replications);
    c.test_points = j.value("test_points", c.test_points);
    if (j.contains("optimizer")) from_json(j.at("optimizer"), c.optimizer);
    c.divergence_factor = j.value("divergence_factor", c.divergence_factor);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
  }
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidParametrization:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::IncompatibleSplit:
    case ErrorCode::UnsupportedDimension:
      return 2;
    case ErrorCode::NoResponseColumn:
    case ErrorCode::MissingColumn:
    case ErrorCode::EmptyAfterFiltering:
    case ErrorCode::ParseError:
    case ErrorCode::IoError:
    case ErrorCode::NonpositiveValue:
    case ErrorCode::InsufficientData:
      return 3;
    case ErrorCode::SingularBandwidth:
    case ErrorCode::SingularBlock:
    case ErrorCode::Degenerate:
      return 4;
  }
  return 2;
}

nlohmann::json error_json(const Error& e) {
  return {{"error", {{"code", error_code_name(e.code())}, {"message", e.what()}, {"exit_code", exit_code_for(e.code())}}}};
}

namespace {

struct Context {
  const RunConfig& config;
  std::vector<std::filesystem::path> outputs;
  nlohmann::json extra = nlohmann::json::object();

  std::filesystem::path sibling(const std::string& suffix) const {
    std::filesystem::path p = config.output_path;
    p += suffix;
    return p;
  }

  void write(const std::filesystem::path& path, const std::string& text) {
    write_atomic(path, text);
    outputs.push_back(path);
  }
  void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write(path, j.dump(2) + "\n"); }
};

Dataset load_data(Context& ctx) {
  const RunConfig& c = ctx.config;
  if (c.input_path) {
    auto loaded = ingest_csv(*c.input_path, c.response_columns);
    ctx.extra["load"] = {{"rows_read", loaded.report.rows_read}, {"dropped", loaded.report.dropped}};
    return std::move(loaded.data);
  }
  return generate(SimulationCase::from_number(*c.case_id), c.n_list.front(), c.seed);
}

Task task_of(const RunConfig& c) { return parse_task(c.task); }

std::size_t bandwidth_dim(const Dataset& data, Task task) {
  return task == Task::Regression ? data.predictor_dim() : data.d();
}

CVSelection do_select(const Dataset& data, const RunConfig& c) {
  const Task task = task_of(c);
  const Kernel kernel(parse_kernel(c.kernel), bandwidth_dim(data, task));
  return select_bandwidth(data, task, parse_criterion(c.criterion), parse_form(c.form), kernel, c.optimizer,
                          c.divergence_factor);
}

// 50 points per axis over the data range for d <= 2, else the data rows.
Eigen::MatrixXd default_queries(const Eigen::MatrixXd& points) {
  const auto d = points.cols();
  if (d > 2) return points;
  constexpr Eigen::Index m = 50;
  const Eigen::VectorXd lo = points.colwise().minCoeff();
  const Eigen::VectorXd hi = points.colwise().maxCoeff();
  auto axis = [&](Eigen::Index j) { return Eigen::VectorXd::LinSpaced(m, lo[j], hi[j]); };
  if (d == 1) return axis(0);
  const Eigen::VectorXd a = axis(0), b = axis(1);
  Eigen::MatrixXd q(m * m, 2);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index k = 0; k < m; ++k) q.row(i * m + k) << a[i], b[k];
  return q;
}

std::vector<std::string> query_names(const Dataset& data, Task task) {
  std::vector<std::string> out;
  if (task == Task::ConditionalDensity)
    for (auto r : data.response_indices()) out.push_back(data.names()[r]);
  for (auto p : data.predictor_indices()) out.push_back(data.names()[p]);
  return out;
}

Eigen::MatrixXd load_queries(const std::filesystem::path& path, const std::vector<std::string>& names) {
  const auto loaded = ingest_csv(path, {});
  const auto& file_names = loaded.data.names();
  Eigen::MatrixXd q(static_cast<Eigen::Index>(loaded.data.n()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto it = std::find(file_names.begin(), file_names.end(), names[j]);
    if (it == file_names.end()) throw Error(ErrorCode::MissingColumn, "query file lacks column '" + names[j] + "'");
    q.col(static_cast<Eigen::Index>(j)) = loaded.data.values().col(it - file_names.begin());
  }
  return q;
}

nlohmann::json cmd_fit(Context& ctx) {
  const RunConfig& c = ctx.config;
  const Dataset data = load_data(ctx);
  const Task task = task_of(c);
  const Kernel kernel(parse_kernel(c.kernel), bandwidth_dim(data, task));
  std::optional<BandwidthMatrix> h;
  nlohmann::json summary;
  if (c.bandwidth_path) {
    std::ifstream in(*c.bandwidth_path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + c.bandwidth_path->string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("bandwidth file: ") + e.what());
    }
    h = bandwidth_from_json(j.contains("bandwidth") ? j.at("bandwidth") : j);
  } else {
    const CVSelection s = do_select(data, c);
    summary["selection"] = s;
    h = s.bandwidth;
  }
  const auto names = query_names(data, task);
  const Eigen::MatrixXd queries =
      c.query_path ? load_queries(*c.query_path, names)
                   : default_queries(task == Task::Regression ? data.predictors() : data.joint());
  const auto results = task == Task::Regression
                           ? nw_regression_batch(data, kernel, *h, queries)
                           : conditional_density_batch(data, response_predictor_split(data), kernel, *h, queries);
  Eigen::MatrixXd table(queries.rows(), queries.cols() + 3);
  table.leftCols(queries.cols()) = queries;
  std::size_t degenerate = 0;
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    const auto& r = results[static_cast<std::size_t>(i)];
    table(i, queries.cols()) = r.value;
    table(i, queries.cols() + 1) = r.denominator;
    table(i, queries.cols() + 2) = r.degenerate ? 1.0 : 0.0;
    degenerate += r.degenerate ? 1 : 0;
  }
  auto header = names;
  header.insert(header.end(), {"estimate", "denominator", "degenerate"});
  ctx.write(c.output_path, format_csv(header, table));
  summary["bandwidth"] = *h;
  summary["queries"] = queries.rows();
  summary["degenerate"] = degenerate;
  return summary;
}

nlohmann::json cmd_select(Context& ctx) {
  const Dataset data = load_data(ctx);
  const CVSelection s = do_select(data, ctx.config);
  nlohmann::json j = s;
  ctx.write_json(ctx.config.output_path, j);
  return j;
}

nlohmann::json cmd_screen(Context& ctx) {
  const RunConfig& c = ctx.config;
  const Dataset raw = load_data(ctx);
  if (raw.predictor_dim() == 0) throw Error(ErrorCode::IncompatibleSplit, "screening needs predictors");
  // Standardize predictors to unit sample scale.
  Eigen::MatrixXd values = raw.values();
  std::vector<double> scales;
  for (auto p : raw.predictor_indices()) {
    const double s = raw.column_scales()[p];
    scales.push_back(s);
    const auto col = static_cast<Eigen::Index>(p);
    const double mean = values.col(col).mean();
    values.col(col) = (values.col(col).array() - mean) / (s > 0.0 ? s : 1.0);
  }
  const Dataset data = raw.with_values(std::move(values));
  RunConfig diag = c;
  diag.form = "diagonal";
  diag.task = "regression";
  diag.criterion = "lscv";
  const CVSelection s = do_select(data, diag);
  nlohmann::json vars = nlohmann::json::array();
  for (std::size_t k = 0; k < raw.predictor_dim(); ++k) {
    const double h_std = s.bandwidth(k, k);
    const double scale = scales[k] > 0.0 ? scales[k] : 1.0;
    vars.push_back({{"name", raw.names()[raw.predictor_indices()[k]]},
                    {"bandwidth_standardized", h_std},
                    {"bandwidth_raw", h_std * scale},
                    {"scale", scales[k]},
                    {"ratio", h_std},
                    {"divergent", static_cast<bool>(s.divergent_flags[k])},
                    {"relevant", !s.divergent_flags[k]}});
  }
  nlohmann::json j = {{"variables", vars}, {"selection", s}};
  ctx.write_json(c.output_path, j);
  return j;
}

std::vector<MiseReport> run_mise(const RunConfig& c) {
  const SimulationCase sc = SimulationCase::from_number(*c.case_id);
  const Form form = parse_form(c.form);
  std::vector<MiseReport> reports;
  for (std::size_t n : c.n_list)
    reports.push_back(estimate_mise(sc, form, n, c.replications, c.test_points, c.seed, c.optimizer));
  return reports;
}

nlohmann::json table_json(const std::vector<MiseReport>& reports) {
  nlohmann::json table = nlohmann::json::object();
  for (const auto& r : reports)
    table[std::string(form_name(r.form))][std::to_string(r.n)] = {{"mise", r.mise}, {"sd", r.sd}};
  return table;
}

nlohmann::json cmd_simulate(Context& ctx) {
  const auto reports = run_mise(ctx.config);
  nlohmann::json j = {{"case", *ctx.config.case_id}, {"table", table_json(reports)}, {"cells", reports}};
  ctx.write_json(ctx.config.output_path, j);
  ctx.write(ctx.sibling(".csv"), mise_reports_csv(reports));
  return j;
}

nlohmann::json cmd_rate_check(Context& ctx) {
  const auto reports = run_mise(ctx.config);
  const RateFit fit = fit_rate(reports);
  nlohmann::json j = fit;
  j["case"] = *ctx.config.case_id;
  j["form"] = ctx.config.form;
  j["reports"] = reports;
  ctx.write_json(ctx.config.output_path, j);
  ctx.write(ctx.sibling(".csv"), mise_reports_csv(reports));
  return j;
}

}  // namespace

RunOutcome run(const RunConfig& config) {
  RunOutcome outcome;
  Context ctx{config, {}};
  const auto t0 = std::chrono::steady_clock::now();
  nlohmann::json manifest;
  try {
    config.validate();
    if (config.output_path.has_parent_path()) std::filesystem::create_directories(config.output_path.parent_path());
    switch (config.command) {
      case Command::Fit: outcome.summary = cmd_fit(ctx); break;
      case Command::Select: outcome.summary = cmd_select(ctx); break;
      case Command::Simulate: outcome.summary = cmd_simulate(ctx); break;
      case Command::RateCheck: outcome.summary = cmd_rate_check(ctx); break;
      case Command::Screen: outcome.summary = cmd_screen(ctx); break;
    }
  } catch (const Error& e) {
    outcome.exit_code = exit_code_for(e.code());
    outcome.summary = error_json(e);
  } catch (const std::filesystem::filesystem_error& e) {
    const Error err(ErrorCode::IoError, e.what());
    outcome.exit_code = exit_code_for(err.code());
    outcome.summary = error_json(err);
  }
  manifest["config"] = config;
  manifest["version"] = kVersion;
  manifest["seed"] = config.seed;
  manifest["workers"] = worker_count();
  manifest["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest["exit_code"] = outcome.exit_code;
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& p : ctx.outputs) outs.push_back(p.string());
  manifest["outputs"] = outs;
  if (!ctx.extra.empty()) manifest["load"] = ctx.extra.value("load", nlohmann::json());
  if (outcome.exit_code != 0) manifest["error"] = outcome.summary["error"];
  try {
    ctx.write_json(ctx.sibling(".manifest.json"), manifest);
  } catch (const Error&) {
    // the error JSON on stdout still reports the outcome
  }
  outcome.outputs = ctx.outputs;
  return outcome;
}

}  // namespace ksmooth
