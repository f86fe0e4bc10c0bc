#pragma once

// Flat-file persistence: CSV tables with a one-line JSON header, and
// SHA-256 content hashes for the run manifest.

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nonohmic {

using json = nlohmann::json;

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

/// Shortest round-trip decimal form.
inline std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Columns of equal length under a `# {json}` header line and a name row.
struct Table {
  json header = json::object();
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  void add(std::string name, std::vector<double> values) {
    if (!columns.empty() && values.size() != columns.front().size())
      throw std::invalid_argument("Table: column '" + name + "' has a different length");
    names.push_back(std::move(name));
    columns.push_back(std::move(values));
  }

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

  std::string to_csv() const {
    std::string out = "# " + header.dump() + "\n";
    for (std::size_t c = 0; c < names.size(); ++c) out += (c ? "," : "") + names[c];
    out += "\n";
    for (std::size_t r = 0; r < rows(); ++r) {
      for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + format_number(columns[c][r]);
      out += "\n";
    }
    return out;
  }

  /// Whitespace-separated columns with '#' comments, for gnuplot.
  std::string to_dat() const {
    std::string out = "# " + header.dump() + "\n#";
    for (const auto& n : names) out += " " + n;
    out += "\n";
    for (std::size_t r = 0; r < rows(); ++r) {
      for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? " " : "") + format_number(columns[c][r]);
      out += "\n";
    }
    return out;
  }
};

struct FileRecord {
  std::string name;
  std::string sha256;
  std::size_t bytes = 0;
};

inline void to_json(json& j, const FileRecord& f) { j = {{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}}; }

/// Write `content` to dir/name and return its manifest entry.
inline FileRecord write_file(const std::filesystem::path& dir, const std::string& name, const std::string& content) {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / name, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
  os << content;
  if (!os) throw std::runtime_error("write failed for " + (dir / name).string());
  return {name, sha256_hex(content), content.size()};
}

/// Parse a CSV written by Table::to_csv.
inline Table read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  Table t;
  std::string line;
  std::getline(is, line);
  if (line.rfind("# ", 0) != 0) throw std::runtime_error(path.string() + ": missing JSON header");
  t.header = json::parse(line.substr(2));
  std::getline(is, line);
  std::stringstream names(line);
  for (std::string n; std::getline(names, n, ',');) t.names.push_back(n);
  t.columns.resize(t.names.size());
  while (std::getline(is, line)) {
    std::stringstream row(line);
    std::size_t c = 0;
    for (std::string v; std::getline(row, v, ',') && c < t.columns.size(); ++c) t.columns[c].push_back(std::stod(v));
  }
  return t;
}

}  // namespace nonohmic
