#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace ticketlab {

// Flat key=value configuration with typed, validated access. Unknown keys
// are rejected against the caller-declared key set.
class Config {
 public:
  static Config from_file(const std::filesystem::path& path);      // key=value or JSON
  static Config from_text(const std::string& text);                // key=value lines
  static Config from_json_text(const std::string& text);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;

  // Throws naming the first key outside `known`.
  void reject_unknown_keys(const std::set<std::string>& known) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// FNV-1a 64-bit content hash, hex-encoded.
std::string content_hash(const std::string& content);

struct ManifestEntry {
  std::string path;
  std::string hash;
};

// Reproducibility record written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::uint64_t master_seed = 0;
  std::string version;
  double runtime_seconds = 0.0;
  std::map<std::string, double> stats;  // per-experiment fit statistics
  std::vector<ManifestEntry> outputs;

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

// Writes content and returns the manifest entry for it.
ManifestEntry write_output(const std::filesystem::path& path, const std::string& content);

// CSV assembly: '.' decimal, comma separator, header row.
class CsvBuilder {
 public:
  explicit CsvBuilder(const std::vector<std::string>& header);
  CsvBuilder& cell(const std::string& v);
  CsvBuilder& cell(double v);
  CsvBuilder& cell(long v);
  CsvBuilder& cell(int v) { return cell(static_cast<long>(v)); }
  CsvBuilder& cell(std::uint64_t v);
  void end_row();
  const std::string& str() const { return out_; }

 private:
  std::string out_;
  size_t columns_ = 0;
  size_t in_row_ = 0;
};

std::string format_double(double v);

}  // namespace ticketlab
