#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "selinf/experiments.hpp"

// Serialization shared by the command-line tool and the tests.

namespace selinf::io {

/// One JSON-lines object:
/// {rep, j, T_obs, sigma, ci_lo, ci_hi, mle, naive_lo, naive_hi, naive_est,
///  truth?, flags, ...}.
nlohmann::json record_to_json(const InferenceRecord& rec, int rep, std::string_view manifest);
InferenceRecord record_from_json(const nlohmann::json& j);

/// Reads JSON-lines; blank lines are skipped. Throws MalformedInput.
std::vector<InferenceRecord> read_records(std::istream& in);

nlohmann::json coverage_to_json(const CoverageRow& row);
std::string coverage_csv_header();
std::string coverage_csv_row(const CoverageRow& row);

/// Numeric CSV with a mandatory header row (RFC 4180 quoting).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Throws MalformedInput on ragged rows, non-numeric cells or a missing header.
CsvTable read_numeric_csv(std::istream& in);

/// Splits one CSV record; `in` supplies continuation lines for quoted
/// fields spanning newlines.
std::vector<std::string> split_csv_record(const std::string& line, std::istream& in);

/// %.17g formatting.
std::string format_double(double x);

/// SHA-1 of "blob <size>\0<content>", as git computes object ids.
std::string git_blob_hash(std::string_view content);

}  // namespace selinf::io
