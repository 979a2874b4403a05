#include "selinf/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <openssl/evp.h>

namespace selinf::io {

namespace {

Interval interval_from(const nlohmann::json& j, const char* lo, const char* hi) {
  return Interval{j.at(lo).get<double>(), j.at(hi).get<double>()};
}

bool parse_double(std::string_view text, double& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

}  // namespace

nlohmann::json record_to_json(const InferenceRecord& rec, int rep, std::string_view manifest) {
  nlohmann::json j;
  j["rep"] = rep;
  j["j"] = rec.j;
  j["variable"] = rec.variable;
  j["T_obs"] = rec.T_obs;
  j["sigma"] = rec.sigma;
  j["ci_lo"] = rec.ci.lo;
  j["ci_hi"] = rec.ci.hi;
  j["mle"] = rec.mle;
  j["naive_lo"] = rec.naive_ci.lo;
  j["naive_hi"] = rec.naive_ci.hi;
  j["naive_est"] = rec.naive_estimate;
  j["pvalue"] = rec.pvalue;
  if (rec.truth) j["truth"] = *rec.truth;
  if (rec.pivot_at_truth) j["pivot"] = *rec.pivot_at_truth;
  if (rec.naive_pivot_at_truth) j["naive_pivot"] = *rec.naive_pivot_at_truth;
  j["flags"] = rec.flags;
  j["manifest"] = manifest;
  return j;
}

InferenceRecord record_from_json(const nlohmann::json& j) {
  try {
    InferenceRecord rec;
    rec.j = j.at("j").get<Index>();
    rec.variable = j.value("variable", rec.j);
    rec.T_obs = j.at("T_obs").get<double>();
    rec.sigma = j.at("sigma").get<double>();
    rec.ci = interval_from(j, "ci_lo", "ci_hi");
    rec.mle = j.at("mle").get<double>();
    rec.naive_ci = interval_from(j, "naive_lo", "naive_hi");
    rec.naive_estimate = j.at("naive_est").get<double>();
    rec.pvalue = j.value("pvalue", 1.0);
    if (j.contains("truth")) rec.truth = j["truth"].get<double>();
    if (j.contains("pivot")) rec.pivot_at_truth = j["pivot"].get<double>();
    if (j.contains("naive_pivot")) rec.naive_pivot_at_truth = j["naive_pivot"].get<double>();
    if (j.contains("flags")) rec.flags = j["flags"].get<std::vector<std::string>>();
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedInput, std::string("bad record: ") + e.what());
  }
}

std::vector<InferenceRecord> read_records(std::istream& in) {
  std::vector<InferenceRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::MalformedInput, std::string("bad JSON line: ") + e.what());
    }
    out.push_back(record_from_json(j));
  }
  return out;
}

nlohmann::json coverage_to_json(const CoverageRow& row) {
  return {{"label", row.label},
          {"coverage_selective", row.coverage_selective},
          {"coverage_naive", row.coverage_naive},
          {"length_selective", row.length_selective},
          {"length_naive", row.length_naive},
          {"c", row.c},
          {"n_targets", row.n_targets}};
}

std::string coverage_csv_header() {
  return "label,coverage_selective,coverage_naive,length_selective,length_naive,c,n_targets";
}

std::string coverage_csv_row(const CoverageRow& row) {
  std::ostringstream os;
  os << row.label << ',' << format_double(row.coverage_selective) << ','
     << format_double(row.coverage_naive) << ',' << format_double(row.length_selective) << ','
     << format_double(row.length_naive) << ',' << format_double(row.c) << ',' << row.n_targets;
  return os.str();
}

std::vector<std::string> split_csv_record(const std::string& first, std::istream& in) {
  std::vector<std::string> fields;
  std::string field;
  std::string line = first;
  bool quoted = false;
  std::size_t i = 0;
  for (;;) {
    if (i == line.size()) {
      if (quoted) {
        std::string more;
        if (!std::getline(in, more)) throw Error(ErrorKind::MalformedInput, "unterminated quote");
        field += '\n';
        line = std::move(more);
        i = 0;
        continue;
      }
      break;
    }
    const char ch = line[i++];
    if (quoted) {
      if (ch == '"') {
        if (i < line.size() && line[i] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch != '\r' || i != line.size()) {
      field += ch;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

CsvTable read_numeric_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::MalformedInput, "missing header row");
  table.header = split_csv_record(line, in);
  const std::size_t width = table.header.size();
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_record(line, in);
    if (fields.size() != width)
      throw Error(ErrorKind::MalformedInput, "row " + std::to_string(row_no) + " has " +
                                                 std::to_string(fields.size()) + " fields, expected " +
                                                 std::to_string(width));
    std::vector<double> row(width);
    for (std::size_t k = 0; k < width; ++k)
      if (!parse_double(fields[k], row[k]))
        throw Error(ErrorKind::MalformedInput, "non-numeric cell at row " + std::to_string(row_no) +
                                                   ", column " + std::to_string(k + 1));
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw Error(ErrorKind::MalformedInput, "no data rows");
  return table;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string git_blob_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

}  // namespace selinf::io
