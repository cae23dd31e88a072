// SPDX-License-Identifier: Apache-2.0
#include "records.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "autosize/errors.hpp"

namespace autosize::cli {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Record& Record::set(const std::string& key, const std::string& value) {
  if (value.find_first_of(" \t\n=") != std::string::npos || key.find_first_of(" \t\n=") != std::string::npos) {
    throw InvalidInput("record: '" + key + "=" + value + "' contains a separator");
  }
  for (auto& [k, v] : fields_) {
    if (k == key) {
      v = value;
      return *this;
    }
  }
  fields_.emplace_back(key, value);
  return *this;
}

Record& Record::set(const std::string& key, double value) { return set(key, format_double(value)); }

Record& Record::set(const std::string& key, std::size_t value) { return set(key, std::to_string(value)); }

bool Record::has(const std::string& key) const {
  return std::any_of(fields_.begin(), fields_.end(), [&](const auto& f) { return f.first == key; });
}

const std::string& Record::get(const std::string& key) const {
  for (const auto& [k, v] : fields_) {
    if (k == key) return v;
  }
  throw FormatError("record: missing key '" + key + "'");
}

double Record::get_double(const std::string& key) const {
  const auto& s = get(key);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw FormatError("record: bad number for " + key);
  return v;
}

std::size_t Record::get_size(const std::string& key) const {
  const auto& s = get(key);
  std::size_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw FormatError("record: bad count for " + key);
  return v;
}

std::string Record::format() const {
  std::string out;
  for (const auto& [k, v] : fields_) out += (out.empty() ? "" : " ") + k + "=" + v;
  return out;
}

Record Record::parse(const std::string& line) {
  Record r;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0) throw FormatError("record: malformed field '" + tok + "'");
    r.fields_.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
  }
  return r;
}

Record Record::without(const std::vector<std::string>& keys) const {
  Record r;
  for (const auto& f : fields_) {
    if (std::find(keys.begin(), keys.end(), f.first) == keys.end()) r.fields_.push_back(f);
  }
  return r;
}

std::vector<Record> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read records from " + path);
  std::vector<Record> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(Record::parse(line));
  }
  return out;
}

void write_records(const std::string& path, const std::vector<Record>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& r : records) out << r.format() << '\n';
}

void append_record(const std::string& path, const Record& record) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path);
  out << record.format() << '\n';
}

}  // namespace autosize::cli
