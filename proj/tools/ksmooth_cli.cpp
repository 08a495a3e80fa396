// Command-line front end: parses flags into a RunConfig and calls ksmooth::run.

#include "ksmooth/run.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::vector<std::size_t> parse_n_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(item, &pos);
      if (pos != item.size() || v < 2) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ksmooth::Error(ksmooth::ErrorCode::InvalidConfig, "bad --n entry '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel smoothing with unrestricted bandwidth matrices"};
  app.require_subcommand(1);

  struct Flags {
    std::string config, input, queries, bandwidth, output, kernel, form, task, criterion, n;
    std::vector<std::string> response;
    std::uint64_t seed = 0;
    int case_id = 0;
    std::size_t replications = 0, test_points = 0;
    double divergence_factor = 0.0;
    int max_evaluations = 0, restarts = 0;
  } f;

  std::vector<CLI::App*> subs;
  std::map<std::string, std::map<std::string, CLI::Option*>> opts;
  for (const char* name : {"fit", "select", "simulate", "rate-check", "screen"}) {
    CLI::App* sub = app.add_subcommand(name);
    auto& o = opts[name];
    o["config"] = sub->add_option("--config", f.config, "JSON config or manifest (flags override it)");
    o["input"] = sub->add_option("--input", f.input, "CSV with a header row");
    o["queries"] = sub->add_option("--queries", f.queries, "fit: CSV of query points");
    o["bandwidth"] = sub->add_option("--bandwidth", f.bandwidth, "fit: bandwidth JSON (skips selection)");
    o["output"] = sub->add_option("--output", f.output, "output file");
    o["kernel"] = sub->add_option("--kernel", f.kernel, "gaussian | epanechnikov");
    o["form"] = sub->add_option("--form", f.form, "scalar | diagonal | full");
    o["task"] = sub->add_option("--task", f.task, "regression | cond_density");
    o["criterion"] = sub->add_option("--criterion", f.criterion, "lscv | lcv");
    o["response"] = sub->add_option("--response", f.response, "response column name(s)");
    o["seed"] = sub->add_option("--seed", f.seed, "master seed");
    o["case"] = sub->add_option("--case", f.case_id, "simulation case 1, 2 or 3");
    o["n"] = sub->add_option("--n", f.n, "sample size(s), comma separated");
    o["replications"] = sub->add_option("--replications", f.replications, "Monte-Carlo replications");
    o["test_points"] = sub->add_option("--test-points", f.test_points, "test draws per replication");
    o["divergence_factor"] = sub->add_option("--divergence-factor", f.divergence_factor, "bandwidth/scale flag threshold");
    o["max_evaluations"] = sub->add_option("--max-evaluations", f.max_evaluations, "optimizer budget per run");
    o["restarts"] = sub->add_option("--restarts", f.restarts, "optimizer rounds per start");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return 0;
    std::cout << ksmooth::error_json(ksmooth::Error(ksmooth::ErrorCode::InvalidConfig, e.what())).dump() << "\n";
    return 2;
  }

  try {
    ksmooth::RunConfig config;
    std::string chosen;
    for (auto* sub : subs)
      if (sub->parsed()) chosen = sub->get_name();
    auto& o = opts[chosen];
    if (o["config"]->count()) {
      std::ifstream in(f.config);
      if (!in) throw ksmooth::Error(ksmooth::ErrorCode::IoError, "cannot open " + f.config);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw ksmooth::Error(ksmooth::ErrorCode::InvalidConfig, std::string("config: ") + e.what());
      }
      config = j.get<ksmooth::RunConfig>();
    }
    config.command = ksmooth::parse_command(chosen);
    if (o["input"]->count()) config.input_path = f.input;
    if (o["queries"]->count()) config.query_path = f.queries;
    if (o["bandwidth"]->count()) config.bandwidth_path = f.bandwidth;
    if (o["output"]->count()) config.output_path = f.output;
    if (o["kernel"]->count()) config.kernel = f.kernel;
    if (o["form"]->count()) config.form = f.form;
    if (o["task"]->count()) config.task = f.task;
    if (o["criterion"]->count()) config.criterion = f.criterion;
    if (o["response"]->count()) config.response_columns = f.response;
    if (o["seed"]->count()) config.seed = f.seed;
    if (o["case"]->count()) config.case_id = f.case_id;
    if (o["n"]->count()) config.n_list = parse_n_list(f.n);
    if (o["replications"]->count()) config.replications = f.replications;
    if (o["test_points"]->count()) config.test_points = f.test_points;
    if (o["divergence_factor"]->count()) config.divergence_factor = f.divergence_factor;
    if (o["max_evaluations"]->count()) config.optimizer.max_evaluations = f.max_evaluations;
    if (o["restarts"]->count()) config.optimizer.restarts = f.restarts;

    const ksmooth::RunOutcome outcome = ksmooth::run(config);
    if (outcome.exit_code != 0) {
      std::cout << outcome.summary.dump() << "\n";
      return outcome.exit_code;
    }
    for (const auto& p : outcome.outputs) std::cerr << "wrote " << p.string() << "\n";
    std::cout << outcome.summary.dump(2) << "\n";
    return 0;
  } catch (const ksmooth::Error& e) {
    std::cout << ksmooth::error_json(e).dump() << "\n";
    return ksmooth::exit_code_for(e.code());
  }
}
