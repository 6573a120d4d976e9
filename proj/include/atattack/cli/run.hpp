#ifndef ATATTACK_CLI_RUN_HPP
#define ATATTACK_CLI_RUN_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "atattack/cli/config.hpp"
#include "atattack/data/dataset.hpp"

namespace atattack::cli {

/// Exit status per failure class.
enum class ExitCode : int {
  ok = 0,
  other = 1,
  usage = 2,
  schema = 3,
  missing_checkpoint = 4,
  shape_mismatch = 5,
  data = 6,
  training = 7,
  io = 8,
};

inline ExitCode exit_code_for(const std::string& kind) {
  static const std::map<std::string, ExitCode> table{{"config", ExitCode::schema},
                                                     {"shape", ExitCode::shape_mismatch},
                                                     {"checkpoint", ExitCode::missing_checkpoint},
                                                     {"data", ExitCode::data},
                                                     {"training", ExitCode::training},
                                                     {"io", ExitCode::io}};
  auto it = table.find(kind);
  return it == table.end() ? ExitCode::other : it->second;
}

/// Machine-readable failure record printed on stderr and, when a run
/// directory already exists, saved as error.json inside it.
inline nlohmann::json error_record(const std::string& command, const std::string& kind, const std::string& message) {
  return {{"status", "error"},
          {"command", command},
          {"kind", kind},
          {"exit_code", static_cast<int>(exit_code_for(kind))},
          {"message", message}};
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

/// One command invocation's output directory. Creating it fails if the path
/// already holds anything, so earlier runs and their checkpoints are never
/// touched.
class RunDir {
 public:
  RunDir(fs::path root, const std::string& command, const ExperimentConfig& cfg) : root_(std::move(root)) {
    if (fs::exists(root_) && !(fs::is_directory(root_) && fs::is_empty(root_)))
      throw IoError("output directory " + root_.string() + " already exists and is not empty");
    fs::create_directories(root_);
    write_json(root_ / "resolved_config.json", cfg.resolved);
    nlohmann::json sums = nlohmann::json::object();
    for (const auto& [file, sha] : data::load_checksums())
      if (file.rfind(cfg.dataset + "/", 0) == 0) sums[file] = sha;
    write_json(root_ / "manifest.json", {{"code_version", ATATTACK_CODE_VERSION},
                                         {"command", command},
                                         {"config_name", cfg.name},
                                         {"config_hash", cfg.hash},
                                         {"seeds", {{"run", cfg.seed}, {"attack", cfg.attack.seed}, {"surface", cfg.surface.seed}}},
                                         {"dataset", cfg.dataset},
                                         {"dataset_sha256", sums}});
  }

  const fs::path& path() const { return root_; }
  fs::path operator/(const std::string& rel) const { return root_ / rel; }

 private:
  fs::path root_;
};

}  // namespace atattack::cli

#endif  // ATATTACK_CLI_RUN_HPP
