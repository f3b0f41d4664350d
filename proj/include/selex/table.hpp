#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace selex {

using Cell = std::variant<std::int64_t, double, std::string>;

/// Column-ordered result table shared by the CSV and JSON writers.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

enum class ExportFormat { csv, json };

ExportFormat parse_export_format(const std::string& name);

/// Floats are written with 10 significant digits so output is byte-stable.
std::string format_double(double value);

/// Header row plus one line per row, '\n' terminated.
std::string to_csv(const Table& table);

/// Array of objects, keys in column order.
std::string to_json(const Table& table);

/// Throws InvalidArgument for an empty table (nothing is written) and
/// IoError naming the path when the file cannot be written.
void export_results(const Table& table, ExportFormat format, const std::filesystem::path& path);

}  // namespace selex
