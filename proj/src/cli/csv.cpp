#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "clusterguard/cli.hpp"

namespace clusterguard::cli {

namespace {

std::string describe_lines(const std::vector<std::size_t>& lines) {
  std::string out;
  const std::size_t shown = std::min<std::size_t>(lines.size(), 10);
  for (std::size_t i = 0; i < shown; ++i) {
    if (i) out += ", ";
    out += std::to_string(lines[i]);
  }
  if (lines.size() > shown) out += fmt::format(" and {} more", lines.size() - shown);
  return out;
}

std::size_t column_index(const CsvTable& table, const std::string& name) {
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j] == name) return j;
  }
  throw Error(ErrorKind::SchemaError, fmt::format("column '{}' not found in header", name));
}

bool parse_double(std::string_view field, double& value) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  return ec == std::errc{} && ptr == field.data() + field.size() && std::isfinite(value);
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::ConfigError:
      return kExitUsage;
    case ErrorKind::FileError:
      return kExitFile;
    case ErrorKind::SchemaError:
      return kExitSchema;
    case ErrorKind::SingularDesign:
      return kExitSingular;
    case ErrorKind::CalibrationMissing:
      return kExitCalibrationMissing;
    case ErrorKind::Degenerate:
    case ErrorKind::InsufficientData:
      return kExitDegenerate;
    case ErrorKind::QuadratureFailure:
    case ErrorKind::CalibrationFailure:
      return kExitNumerical;
  }
  return kExitFailure;
}

CsvTable parse_csv(std::string_view text) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> lines;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  std::size_t line = 1;
  std::size_t record_line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    // A blank line is not a record.
    if (!(record.size() == 1 && record[0].empty())) {
      records.push_back(std::move(record));
      lines.push_back(record_line);
    }
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted) {
          throw Error(ErrorKind::SchemaError,
                      fmt::format("line {}: stray quote inside unquoted field", line));
        }
        in_quotes = true;
        field_was_quoted = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        [[fallthrough]];
      case '\n':
        end_record();
        ++line;
        record_line = line;
        break;
      default:
        field += c;
    }
  }
  if (in_quotes) throw Error(ErrorKind::SchemaError, "unterminated quoted field");
  if (!field.empty() || field_was_quoted || !record.empty()) end_record();

  if (records.empty()) throw Error(ErrorKind::SchemaError, "CSV has no header");
  CsvTable table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw Error(ErrorKind::SchemaError,
                  fmt::format("line {}: expected {} fields, found {}", lines[r],
                              table.header.size(), records[r].size()));
    }
    table.rows.push_back(std::move(records[r]));
    table.row_lines.push_back(lines[r]);
  }
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

bool is_missing(std::string_view field) {
  return field.empty() || field == "NA" || field == "NaN" || field == "nan" || field == ".";
}

std::vector<std::string> coefficient_names(const CsvSchema& schema) {
  std::vector<std::string> names;
  if (schema.add_intercept) names.emplace_back("(intercept)");
  names.insert(names.end(), schema.regressor_cols.begin(), schema.regressor_cols.end());
  return names;
}

regression::ClusterDataset build_dataset(const CsvTable& table, const CsvSchema& schema) {
  if (schema.cluster_col.empty() || schema.outcome_col.empty()) {
    throw Error(ErrorKind::SchemaError, "cluster and outcome columns are required");
  }
  if (schema.regressor_cols.empty() && !schema.add_intercept) {
    throw Error(ErrorKind::SchemaError, "no regressors selected");
  }
  const std::size_t cluster_j = column_index(table, schema.cluster_col);
  const std::size_t outcome_j = column_index(table, schema.outcome_col);
  std::vector<std::size_t> regressor_j;
  for (const auto& name : schema.regressor_cols) regressor_j.push_back(column_index(table, name));

  std::vector<std::size_t> missing;
  std::vector<std::size_t> bad;
  std::string first_bad;
  const std::size_t p = regressor_j.size() + (schema.add_intercept ? 1 : 0);

  struct Rows {
    std::vector<double> y;
    std::vector<double> x;  // row-major N_g x p
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Rows> groups;

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    bool row_missing = is_missing(row[cluster_j]) || is_missing(row[outcome_j]);
    for (std::size_t j : regressor_j) row_missing = row_missing || is_missing(row[j]);
    if (row_missing) {
      missing.push_back(table.row_lines[r]);
      continue;
    }
    double y = 0.0;
    std::vector<double> x;
    x.reserve(p);
    if (schema.add_intercept) x.push_back(1.0);
    bool ok = parse_double(row[outcome_j], y);
    if (!ok && first_bad.empty()) first_bad = row[outcome_j];
    for (std::size_t j : regressor_j) {
      double v = 0.0;
      if (!parse_double(row[j], v)) {
        if (first_bad.empty()) first_bad = row[j];
        ok = false;
      }
      x.push_back(v);
    }
    if (!ok) {
      bad.push_back(table.row_lines[r]);
      continue;
    }
    auto [it, inserted] = groups.try_emplace(row[cluster_j]);
    if (inserted) order.push_back(row[cluster_j]);
    it->second.y.push_back(y);
    it->second.x.insert(it->second.x.end(), x.begin(), x.end());
  }
  if (!missing.empty()) {
    throw Error(ErrorKind::SchemaError,
                fmt::format("missing values in selected columns at line(s) {}",
                            describe_lines(missing)));
  }
  if (!bad.empty()) {
    throw Error(ErrorKind::SchemaError,
                fmt::format("non-numeric value '{}' in selected columns at line(s) {}", first_bad,
                            describe_lines(bad)));
  }

  std::vector<regression::Cluster> clusters;
  clusters.reserve(order.size());
  for (const auto& label : order) {
    auto& rows = groups.at(label);
    regression::Cluster c;
    c.id = label;
    const auto n = static_cast<Eigen::Index>(rows.y.size());
    c.y = Eigen::Map<const Eigen::VectorXd>(rows.y.data(), n);
    c.X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        rows.x.data(), n, static_cast<Eigen::Index>(p));
    clusters.push_back(std::move(c));
  }
  try {
    return regression::ClusterDataset(std::move(clusters), schema.add_intercept);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InvalidArgument) throw;
    throw Error(ErrorKind::SchemaError, e.what());
  }
}

std::vector<double> read_sizes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::FileError, "cannot open " + path.string());
  std::vector<double> sizes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    // A trailing comma-separated field list keeps only the last column.
    const auto comma = line.rfind(',');
    const std::string_view field =
        comma == std::string::npos ? std::string_view(line) : std::string_view(line).substr(comma + 1);
    double v = 0.0;
    if (!parse_double(field, v)) {
      if (line_no == 1 && sizes.empty()) continue;  // header
      throw Error(ErrorKind::SchemaError,
                  fmt::format("{}:{}: not a number: '{}'", path.string(), line_no, field));
    }
    sizes.push_back(v);
  }
  return sizes;
}

}  // namespace clusterguard::cli
