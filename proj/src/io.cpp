#include "ticketlab/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ticketlab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::from_text(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line.substr(0, line.find('#')));
    if (stripped.empty()) continue;
    if (stripped.front() == '[' && stripped.back() == ']') continue;  // section marker
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value, got '" + stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    }
    cfg.values_[key] = trim(stripped.substr(eq + 1));
  }
  return cfg;
}

Config Config::from_json_text(const std::string& text) {
  Config cfg;
  const nlohmann::json j = nlohmann::json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("config JSON: top level must be an object");
  for (const auto& [key, value] : j.items()) {
    if (value.is_string()) {
      cfg.values_[key] = value.get<std::string>();
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) {
        if (!joined.empty()) joined += ",";
        joined += v.dump();
      }
      cfg.values_[key] = joined;
    } else {
      cfg.values_[key] = value.dump();
    }
  }
  return cfg;
}

Config Config::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const std::string stripped = trim(text);
  if (!stripped.empty() && stripped.front() == '{') return from_json_text(text);
  return from_text(text);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': expected a number, got '" +
                                it->second + "'");
  }
}

int Config::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t pos = 0;
    const long v = std::stol(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': expected an integer, got '" +
                                it->second + "'");
  }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t pos = 0;
    const std::uint64_t v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': expected an unsigned integer, got '" +
                                it->second + "'");
  }
}

std::vector<double> Config::get_double_list(const std::string& key,
                                            const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  std::istringstream in(it->second);
  std::string token;
  while (std::getline(in, token, ',')) {
    token = trim(token);
    if (token.empty()) continue;
    try {
      out.push_back(std::stod(token));
    } catch (const std::exception&) {
      throw std::invalid_argument("config key '" + key + "': bad list element '" + token + "'");
    }
  }
  if (out.empty()) {
    throw std::invalid_argument("config key '" + key + "': expected a comma-separated list");
  }
  return out;
}

void Config::reject_unknown_keys(const std::set<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    if (known.count(key) == 0) {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
}

std::string content_hash(const std::string& content) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : content) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config;
  j["master_seed"] = master_seed;
  j["version"] = version;
  j["runtime_seconds"] = runtime_seconds;
  j["stats"] = stats;
  nlohmann::json files = nlohmann::json::array();
  for (const ManifestEntry& e : outputs) {
    files.push_back({{"path", e.path}, {"hash", e.hash}});
  }
  j["outputs"] = files;
  return j.dump(2);
}

RunManifest RunManifest::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.config = j.at("config").get<std::map<std::string, std::string>>();
  m.master_seed = j.at("master_seed").get<std::uint64_t>();
  m.version = j.at("version").get<std::string>();
  m.runtime_seconds = j.at("runtime_seconds").get<double>();
  if (j.contains("stats")) m.stats = j.at("stats").get<std::map<std::string, double>>();
  for (const auto& e : j.at("outputs")) {
    m.outputs.push_back({e.at("path").get<std::string>(), e.at("hash").get<std::string>()});
  }
  return m;
}

ManifestEntry write_output(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  out.close();
  return {path.string(), content_hash(content)};
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

CsvBuilder::CsvBuilder(const std::vector<std::string>& header) : columns_(header.size()) {
  for (size_t i = 0; i < header.size(); ++i) {
    out_ += header[i];
    out_ += (i + 1 < header.size()) ? "," : "\n";
  }
}

CsvBuilder& CsvBuilder::cell(const std::string& v) {
  out_ += (in_row_ > 0 ? "," : "") + v;
  ++in_row_;
  return *this;
}

CsvBuilder& CsvBuilder::cell(double v) { return cell(format_double(v)); }
CsvBuilder& CsvBuilder::cell(long v) { return cell(std::to_string(v)); }
CsvBuilder& CsvBuilder::cell(std::uint64_t v) { return cell(std::to_string(v)); }

void CsvBuilder::end_row() {
  if (in_row_ != columns_) throw std::logic_error("CsvBuilder: row width mismatch");
  out_ += "\n";
  in_row_ = 0;
}

}  // namespace ticketlab
