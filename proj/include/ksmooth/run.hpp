#pragma once

#include "ksmooth/error.hpp"
#include "ksmooth/nelder_mead.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ksmooth {

inline constexpr const char* kVersion = "0.1.0";

enum class Command { Fit, Select, Simulate, RateCheck, Screen };

std::string_view command_name(Command c);
Command parse_command(std::string_view name);

struct RunConfig {
  Command command = Command::Select;
  std::optional<std::filesystem::path> input_path;
  std::optional<std::filesystem::path> query_path;       // fit: query rows (CSV with the same column names)
  std::optional<std::filesystem::path> bandwidth_path;   // fit: bandwidth JSON instead of selection
  std::filesystem::path output_path = "ksmooth_output";
  std::string kernel = "gaussian";
  std::string form = "diagonal";
  std::string task = "regression";
  std::string criterion = "lscv";
  std::vector<std::string> response_columns = {"y"};
  std::uint64_t seed = 0;
  std::optional<int> case_id;
  std::vector<std::size_t> n_list;
  std::size_t replications = 50;
  std::size_t test_points = 1000;
  OptimizerConfig optimizer;
  double divergence_factor = 1000.0;

  /// Command-specific checks; throws InvalidConfig.
  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
/// Accepts a plain config object or a manifest (its "config" member).
void from_json(const nlohmann::json& j, RunConfig& c);

/// Exit status for an error code: 2 configuration, 3 data, 4 numeric degeneracy.
int exit_code_for(ErrorCode code);

nlohmann::json error_json(const Error& e);

struct RunOutcome {
  int exit_code = 0;
  std::vector<std::filesystem::path> outputs;  // artifact files written, manifest last
  nlohmann::json summary;                      // main result (or the error object)
};

/// Executes one command, writing artifacts next to config.output_path plus a
/// manifest `<output>.manifest.json`. Module errors are caught and reported.
RunOutcome run(const RunConfig& config);

}  // namespace ksmooth
