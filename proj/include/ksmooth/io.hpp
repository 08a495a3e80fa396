#pragma once

#include "ksmooth/dataset.hpp"
#include "ksmooth/simulation.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace ksmooth {

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t dropped = 0;  // rows with a non-finite cell
};

struct LoadedData {
  Dataset data;
  LoadReport report;
};

/// Reads a comma-separated file with a header row. Columns named in
/// `response_columns` become responses, every other column a predictor.
/// Empty cells and nan/inf parse as non-finite and drop the row.
LoadedData ingest_csv(const std::filesystem::path& path, const std::vector<std::string>& response_columns);

/// Header plus rows, 17 significant digits.
std::string format_csv(const std::vector<std::string>& header, const Eigen::MatrixXd& rows);

/// Shortest decimal text that reads back to the same double (at most 17 digits).
std::string format_double(double v);

/// Writes `contents` to a sibling temporary file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

/// Columns case, n, form, replication, ise, seed.
std::string mise_reports_csv(const std::vector<MiseReport>& reports);

}  // namespace ksmooth
