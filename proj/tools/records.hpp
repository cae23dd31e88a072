// SPDX-License-Identifier: Apache-2.0
//
// Line-oriented record files: one record per line, space-separated key=value
// pairs. Values never contain spaces or '='.
#pragma once

#include <string>
#include <utility>
#include <vector>

namespace autosize::cli {

class Record {
 public:
  Record& set(const std::string& key, const std::string& value);
  Record& set(const std::string& key, const char* value) { return set(key, std::string(value)); }
  Record& set(const std::string& key, double value);
  Record& set(const std::string& key, std::size_t value);
  Record& set(const std::string& key, int value) { return set(key, static_cast<std::size_t>(value)); }
  Record& set(const std::string& key, bool value) { return set(key, std::string(value ? "1" : "0")); }

  bool has(const std::string& key) const;
  /// Throws FormatError when the key is absent.
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& fields() const { return fields_; }
  std::string format() const;
  static Record parse(const std::string& line);
  /// Copy without the listed keys.
  Record without(const std::vector<std::string>& keys) const;

  friend bool operator==(const Record&, const Record&) = default;

 private:
  std::vector<std::pair<std::string, std::string>> fields_;
};

/// Shortest text that parses back to the same double.
std::string format_double(double v);

std::vector<Record> read_records(const std::string& path);
void write_records(const std::string& path, const std::vector<Record>& records);
void append_record(const std::string& path, const Record& record);

}  // namespace autosize::cli
