#include "qgraph/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include "qgraph/common.hpp"

namespace qgraph {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(content);
}

std::string format_double(double x) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

Metadata& Metadata::set(std::string key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return *this;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
  return *this;
}

Metadata& Metadata::set(std::string key, double value) {
  return set(std::move(key), format_double(value));
}

Metadata& Metadata::set(std::string key, long long value) {
  return set(std::move(key), std::to_string(value));
}

std::string Metadata::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  throw Error("missing metadata key '" + key + "'");
}

bool Metadata::contains(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return true;
  return false;
}

TableWriter::TableWriter(std::ostream& os, const Metadata& meta, std::vector<std::string> columns)
    : os_(os), width_(columns.size()) {
  for (const auto& [k, v] : meta.entries()) os_ << "# " << k << ": " << v << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "\t" : "") << columns[i];
  os_ << '\n';
}

void TableWriter::row(const std::vector<double>& values) {
  if (values.size() != width_) throw Error("row width does not match header");
  for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "\t" : "") << format_double(values[i]);
  os_ << '\n';
}

void TableWriter::row(const std::vector<std::string>& values) {
  if (values.size() != width_) throw Error("row width does not match header");
  for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "\t" : "") << values[i];
  os_ << '\n';
}

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw Error("missing column '" + name + "'");
}

std::vector<double> Table::numeric(const std::string& name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    double x = 0.0;
    const auto& s = r.at(c);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc()) throw Error("non-numeric entry '" + s + "' in column " + name);
    out.push_back(x);
  }
  return out;
}

Table read_table(std::istream& is) {
  Table t;
  std::string line;
  bool have_columns = false;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
      const auto tab = s.find('\t', start);
      out.push_back(s.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    return out;
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(": ");
      if (colon != std::string::npos) t.meta.set(line.substr(2, colon - 2), line.substr(colon + 2));
      continue;
    }
    if (!have_columns) {
      t.columns = split(line);
      have_columns = true;
    } else {
      t.rows.push_back(split(line));
    }
  }
  return t;
}

Table read_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_table(in);
}

}  // namespace qgraph
