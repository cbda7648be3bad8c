// Copyright 2026 The sirtree Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Result tables and their on-disk forms: RFC-4180 CSV, NDJSON, and a JSON
// sidecar echoing the configuration with its hash.

#ifndef SIRTREE_HARNESS_PERSIST_HPP_
#define SIRTREE_HARNESS_PERSIST_HPP_

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sirtree/harness/config.hpp"
#include "sirtree/version.hpp"

namespace sirtree::harness {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Empty cell, flag, integer, real or text.
using Value = std::variant<std::monostate, bool, std::int64_t, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Value>> rows;

  void add_row(std::vector<Value> row) {
    if (row.size() != columns.size()) throw std::logic_error("Table::add_row: width mismatch");
    rows.push_back(std::move(row));
  }
};

enum class Format { kCsv, kNdjson };

inline Format parse_format(std::string_view s) {
  if (s == "csv") return Format::kCsv;
  if (s == "ndjson") return Format::kNdjson;
  throw ConfigError("unknown format '" + std::string(s) + "' (expected csv or ndjson)");
}

// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::string format_value(const Value& v) {
  struct Visitor {
    std::string operator()(std::monostate) const { return {}; }
    std::string operator()(bool b) const { return b ? "1" : "0"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const { return format_double(d); }
    std::string operator()(const std::string& s) const { return s; }
  };
  return std::visit(Visitor{}, v);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void write_csv(const Table& t, std::ostream& os) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << csv_escape(t.columns[i]);
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_escape(format_value(row[i]));
    os << '\n';
  }
}

inline nlohmann::ordered_json to_json(const Value& v) {
  struct Visitor {
    nlohmann::ordered_json operator()(std::monostate) const { return nullptr; }
    nlohmann::ordered_json operator()(bool b) const { return b; }
    nlohmann::ordered_json operator()(std::int64_t i) const { return i; }
    nlohmann::ordered_json operator()(double d) const {
      return std::isfinite(d) ? nlohmann::ordered_json(d) : nlohmann::ordered_json(format_double(d));
    }
    nlohmann::ordered_json operator()(const std::string& s) const { return s; }
  };
  return std::visit(Visitor{}, v);
}

// One object per row, keys in column order.
inline void write_ndjson(const Table& t, std::ostream& os) {
  for (const auto& row : t.rows) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < row.size(); ++i) j[t.columns[i]] = to_json(row[i]);
    os << j.dump() << '\n';
  }
}

// Parses CSV written by write_csv (quoted fields, doubled quotes, LF or CRLF).
inline std::vector<std::vector<std::string>> read_csv(std::istream& is) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c;
  while (is.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (is.peek() == '"') {
          field += '"';
          is.get();
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && is.peek() == '\n') is.get();
      row.push_back(std::move(field));
      field.clear();
      out.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (any) {
    row.push_back(std::move(field));
    out.push_back(std::move(row));
  }
  return out;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  return os;
}

inline void check_written(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

inline nlohmann::ordered_json sidecar(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["library"] = "sirtree";
  j["version"] = kVersion;
  j["config_hash"] = config_hash(c);
  j["config"] = to_json(c);
  return j;
}

struct WrittenFiles {
  std::filesystem::path records;
  std::filesystem::path config;
  std::filesystem::path summary;
};

// Writes records.{csv,ndjson}, config.json and summary.json into `dir`.
inline WrittenFiles persist(const Table& t, const ExperimentConfig& c, const nlohmann::ordered_json& summary,
                            const std::filesystem::path& dir, Format format) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  WrittenFiles files{dir / (format == Format::kCsv ? "records.csv" : "records.ndjson"), dir / "config.json",
                     dir / "summary.json"};
  {
    auto os = open_output(files.records);
    if (format == Format::kCsv) {
      write_csv(t, os);
    } else {
      write_ndjson(t, os);
    }
    check_written(os, files.records);
  }
  {
    auto os = open_output(files.config);
    os << sidecar(c).dump(2) << '\n';
    check_written(os, files.config);
  }
  {
    auto os = open_output(files.summary);
    os << summary.dump(2) << '\n';
    check_written(os, files.summary);
  }
  return files;
}

}  // namespace sirtree::harness

#endif  // SIRTREE_HARNESS_PERSIST_HPP_
