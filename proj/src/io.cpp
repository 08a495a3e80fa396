#include "ksmooth/io.hpp"

#include "ksmooth/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

namespace ksmooth {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

// Returns false for text that is not a number; empty and nan/inf give NaN/inf.
bool parse_cell(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty() || t == "NA" || t == "na") {
    out = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

LoadedData ingest_csv(const std::filesystem::path& path, const std::vector<std::string>& response_columns) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, path.string() + ": missing header row");
  std::vector<std::string> names;
  for (const auto& c : split_line(line)) names.push_back(trim(c));

  std::vector<std::size_t> responses;
  for (const auto& r : response_columns) {
    const auto it = std::find(names.begin(), names.end(), r);
    if (it == names.end()) throw Error(ErrorCode::MissingColumn, "column '" + r + "' not found in " + path.string());
    responses.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  std::vector<std::size_t> predictors;
  for (std::size_t j = 0; j < names.size(); ++j)
    if (std::find(responses.begin(), responses.end(), j) == responses.end()) predictors.push_back(j);

  std::vector<double> flat;
  LoadReport report;
  std::size_t line_no = 1;
  std::vector<double> row(names.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != names.size())
      throw Error(ErrorCode::ParseError, path.string() + ": row " + std::to_string(line_no) + " has " +
                                             std::to_string(cells.size()) + " cells, expected " +
                                             std::to_string(names.size()));
    ++report.rows_read;
    bool finite = true;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (!parse_cell(cells[j], row[j]))
        throw Error(ErrorCode::ParseError, path.string() + ": row " + std::to_string(line_no) + ", column " +
                                               std::to_string(j + 1) + " ('" + names[j] + "'): not a number: '" +
                                               trim(cells[j]) + "'");
      finite = finite && std::isfinite(row[j]);
    }
    if (!finite) {
      ++report.dropped;
      continue;
    }
    flat.insert(flat.end(), row.begin(), row.end());
  }
  const std::size_t n = names.empty() ? 0 : flat.size() / names.size();
  if (n == 0) throw Error(ErrorCode::EmptyAfterFiltering, path.string() + ": no complete rows");
  Eigen::MatrixXd values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < names.size(); ++j)
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flat[i * names.size() + j];
  return {Dataset(std::move(values), std::move(names), std::move(responses), std::move(predictors)), report};
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string format_csv(const std::vector<std::string>& header, const Eigen::MatrixXd& rows) {
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) out += (j ? "," : "") + header[j];
  out += '\n';
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      if (j) out += ',';
      out += format_double(rows(i, j));
    }
    out += '\n';
  }
  return out;
}

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  write_atomic(path, format_csv(data.names(), data.values()));
}

std::string mise_reports_csv(const std::vector<MiseReport>& reports) {
  std::string out = "case,n,form,replication,ise,seed\n";
  for (const auto& r : reports)
    for (std::size_t k = 0; k < r.per_replication.size(); ++k)
      out += std::to_string(r.case_id) + ',' + std::to_string(r.n) + ',' + std::string(form_name(r.form)) + ',' +
             std::to_string(r.indices[k]) + ',' + format_double(r.per_replication[k]) + ',' +
             std::to_string(r.seeds[k]) + '\n';
  return out;
}

}  // namespace ksmooth
