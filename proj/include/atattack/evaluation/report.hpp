#ifndef ATATTACK_EVALUATION_REPORT_HPP
#define ATATTACK_EVALUATION_REPORT_HPP

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atattack/core/error.hpp"

namespace atattack::evaluation {

using nlohmann::json;

inline constexpr int kReportSchemaVersion = 1;

/// Accumulates metric records and writes them as line-delimited JSON plus a
/// flat CSV. Every record is stamped with the schema version and the hash of
/// the config that produced it. Output depends only on the records, so equal
/// runs give byte-identical files.
class MetricLog {
 public:
  explicit MetricLog(std::string config_hash) : config_hash_(std::move(config_hash)) {}

  void add(const std::string& kind, json record) {
    json r{{"schema_version", kReportSchemaVersion}, {"kind", kind}, {"config_hash", config_hash_}};
    for (auto& [k, v] : record.items()) r[k] = v;
    records_.push_back(std::move(r));
  }

  const std::vector<json>& records() const { return records_; }

  void write_jsonl(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& r : records_) out << r.dump() << '\n';
  }

  void write_csv(const std::filesystem::path& path) const {
    std::vector<std::string> columns;
    std::vector<std::vector<std::pair<std::string, std::string>>> rows;
    for (const auto& r : records_) {
      std::vector<std::pair<std::string, std::string>> flat;
      flatten(r, "", flat);
      for (const auto& [k, v] : flat)
        if (std::find(columns.begin(), columns.end(), k) == columns.end()) columns.push_back(k);
      rows.push_back(std::move(flat));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << quote(columns[i]);
    out << '\n';
    for (const auto& row : rows) {
      for (size_t i = 0; i < columns.size(); ++i) {
        if (i) out << ',';
        for (const auto& [k, v] : row)
          if (k == columns[i]) {
            out << quote(v);
            break;
          }
      }
      out << '\n';
    }
  }

 private:
  static void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
    if (j.is_object()) {
      for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    } else if (j.is_string()) {
      out.emplace_back(prefix, j.get<std::string>());
    } else if (j.is_null()) {
      out.emplace_back(prefix, "");
    } else {
      out.emplace_back(prefix, j.dump());
    }
  }

  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }

  std::string config_hash_;
  std::vector<json> records_;
};

}  // namespace atattack::evaluation

#endif  // ATATTACK_EVALUATION_REPORT_HPP
