#include "selex/table.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "selex/errors.hpp"

namespace selex {

ExportFormat parse_export_format(const std::string& name) {
  if (name == "csv") return ExportFormat::csv;
  if (name == "json") return ExportFormat::json;
  throw InvalidArgument("unknown export format '" + name + "' (expected csv or json)");
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  return buf;
}

namespace {

void check_shape(const Table& table) {
  if (table.columns.empty() || table.rows.empty())
    throw InvalidArgument("export: table is empty");
  for (const auto& row : table.rows)
    if (row.size() != table.columns.size())
      throw InvalidArgument("export: row width does not match the header");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string to_csv(const Table& table) {
  check_shape(table);
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out += ',';
    out += csv_field(table.columns[c]);
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      std::visit(
          [&out](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>)
              out += format_double(v);
            else if constexpr (std::is_same_v<T, std::int64_t>)
              out += std::to_string(v);
            else
              out += csv_field(v);
          },
          row[c]);
    }
    out += '\n';
  }
  return out;
}

std::string to_json(const Table& table) {
  check_shape(table);
  auto doc = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
              // round-trip through the 10-digit text so JSON and CSV agree
              if (std::isfinite(v))
                obj[table.columns[c]] = std::stod(format_double(v));
              else
                obj[table.columns[c]] = nullptr;
            } else {
              obj[table.columns[c]] = v;
            }
          },
          row[c]);
    }
    doc.push_back(std::move(obj));
  }
  return doc.dump(2) + '\n';
}

void export_results(const Table& table, ExportFormat format, const std::filesystem::path& path) {
  const std::string body = format == ExportFormat::csv ? to_csv(table) : to_json(table);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace selex
