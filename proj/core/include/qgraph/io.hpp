#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qgraph {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::string& path);

// Ordered key/value pairs written as "# key: value" header lines.
class Metadata {
 public:
  Metadata& set(std::string key, std::string value);
  Metadata& set(std::string key, double value);
  Metadata& set(std::string key, long long value);
  Metadata& set(std::string key, int value) { return set(std::move(key), static_cast<long long>(value)); }
  Metadata& set(std::string key, std::size_t value) {
    return set(std::move(key), static_cast<long long>(value));
  }
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::string get(const std::string& key) const;
  bool contains(const std::string& key) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string format_double(double x);

/// UTF-8 tab-separated table with '#'-prefixed metadata and a column line.
class TableWriter {
 public:
  TableWriter(std::ostream& os, const Metadata& meta, std::vector<std::string> columns);
  void row(const std::vector<double>& values);
  void row(const std::vector<std::string>& values);

 private:
  std::ostream& os_;
  std::size_t width_;
};

struct Table {
  Metadata meta;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
  std::vector<double> numeric(const std::string& name) const;
};

Table read_table(std::istream& is);
Table read_table_file(const std::string& path);

}  // namespace qgraph
