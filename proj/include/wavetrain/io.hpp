#ifndef WAVETRAIN_IO_HPP
#define WAVETRAIN_IO_HPP

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wavetrain {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config hashing: FNV-1a over the canonical (key-sorted) JSON dump, so the
// hash identifies the run semantics, not the file formatting.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

struct RunConfig {
  nlohmann::json raw = nlohmann::json::object();

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    RunConfig cfg;
    try {
      in >> cfg.raw;
    } catch (const std::exception& e) {
      throw IoError("config is not valid JSON (" + path + "): " + e.what());
    }
    if (!cfg.raw.is_object()) throw IoError("config root must be a JSON object: " + path);
    return cfg;
  }

  std::string hash() const { return hash_hex(fnv1a(raw.dump())); }

  template <typename T>
  T get(const std::string& key, const T& fallback) const {
    if (!raw.contains(key)) return fallback;
    try {
      return raw.at(key).get<T>();
    } catch (const std::exception&) {
      throw IoError("config field '" + key + "' has the wrong type");
    }
  }

  nlohmann::json section(const std::string& key) const {
    return raw.contains(key) ? raw.at(key) : nlohmann::json::object();
  }
};

// ---------------------------------------------------------------------------
// CSV artifacts: deterministic formatting, config hash in a comment header.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

inline void write_csv(const std::string& path, const std::string& config_hash,
                      const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write artifact: " + path);
  out << "# config " << config_hash << "\n";
  for (std::size_t c = 0; c < columns.size(); ++c)
    out << (c ? "," : "") << columns[c];
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != columns.size())
      throw IoError("csv row width does not match the header: " + path);
    for (std::size_t c = 0; c < row.size(); ++c)
      out << (c ? "," : "") << format_double(row[c]);
    out << "\n";
  }
}

struct CsvArtifact {
  std::string config_hash;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
      if (columns[c] == name) return int(c);
    throw IoError("csv artifact has no column '" + name + "'");
  }

  std::vector<double> series(const std::string& name) const {
    int c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[std::size_t(c)]);
    return out;
  }
};

inline CsvArtifact read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open artifact: " + path);
  CsvArtifact art;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# config ", 0) != 0)
    throw IoError("artifact missing config-hash header: " + path);
  art.config_hash = line.substr(9);
  if (!std::getline(in, line)) throw IoError("artifact missing column header: " + path);
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) art.columns.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream rs(line);
    std::vector<double> row;
    while (std::getline(rs, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != art.columns.size())
      throw IoError("ragged csv row in artifact: " + path);
    art.rows.push_back(std::move(row));
  }
  return art;
}

// ---------------------------------------------------------------------------
// JSON artifacts with the embedded config hash.
// ---------------------------------------------------------------------------

inline void write_json_artifact(const std::string& path, const std::string& config_hash,
                                nlohmann::json payload) {
  payload["config_hash"] = config_hash;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write artifact: " + path);
  out << payload.dump(2) << "\n";
}

inline nlohmann::json read_json_artifact(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open artifact: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("artifact is not valid JSON (" + path + "): " + e.what());
  }
  if (!j.contains("config_hash"))
    throw IoError("artifact missing embedded config hash: " + path);
  return j;
}

}  // namespace wavetrain

#endif
