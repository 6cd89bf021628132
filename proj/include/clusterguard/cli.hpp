#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "clusterguard/error.hpp"
#include "clusterguard/regression.hpp"

namespace clusterguard::cli {

// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitFile = 3,
  kExitSchema = 4,
  kExitSingular = 5,
  kExitCalibrationMissing = 6,
  kExitDegenerate = 7,
  kExitNumerical = 8,
};

int exit_code(ErrorKind kind);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;  // 1-based line where each record starts
};

// RFC 4180: comma separated, optional double quotes with "" escapes, quoted
// fields may span lines, CRLF or LF record ends. The first record is the
// header. Throws SchemaError on ragged rows or an unterminated quote.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);  // FileError if unreadable

struct CsvSchema {
  std::string cluster_col;
  std::string outcome_col;
  std::vector<std::string> regressor_cols;
  bool add_intercept = true;
};

// Empty, NA, NaN and "." count as missing.
bool is_missing(std::string_view field);

// Clusters appear in order of first occurrence; labels are compared as exact
// strings. Rows with missing or non-numeric selected fields are rejected
// (SchemaError naming the offending lines).
regression::ClusterDataset build_dataset(const CsvTable& table, const CsvSchema& schema);

// Names of the design columns, "(intercept)" first when added.
std::vector<std::string> coefficient_names(const CsvSchema& schema);

// Cluster sizes from a plain list (one value per line, optional non-numeric
// header line).
std::vector<double> read_sizes(const std::filesystem::path& path);

// Runs one command line (args excludes the program name). Results go to
// `out` unless redirected by flags, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clusterguard::cli
