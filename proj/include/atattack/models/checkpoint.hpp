#ifndef ATATTACK_MODELS_CHECKPOINT_HPP
#define ATATTACK_MODELS_CHECKPOINT_HPP

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "atattack/models/factory.hpp"

#ifndef ATATTACK_CODE_VERSION
#define ATATTACK_CODE_VERSION "unknown"
#endif

namespace atattack::models {

namespace fs = std::filesystem;

inline constexpr const char* kCheckpointFormat = "atattack-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// Checkpoint directory layout:
///   meta.json   {format, version, kind, spec, seed, training, code_version, param_sha256}
///   params.pt   torch archive of parameters and buffers
struct CheckpointMeta {
  std::string kind;  // "target" or "trojan"
  json spec;
  uint64_t seed = 0;
  json training = json::object();
  std::string code_version = ATATTACK_CODE_VERSION;
  std::string param_sha256;

  json to_json() const {
    return json{{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"kind", kind},
                {"spec", spec},          {"seed", seed},       {"training", training},
                {"code_version", code_version}, {"param_sha256", param_sha256}};
  }
};

inline CheckpointMeta read_checkpoint_meta(const fs::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw CheckpointError("checkpoint metadata not found in " + dir.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint metadata in " + dir.string() + ": " + e.what());
  }
  if (j.value("format", std::string{}) != kCheckpointFormat || j.value("version", 0) != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint format in " + dir.string());
  CheckpointMeta m;
  m.kind = j.at("kind").get<std::string>();
  m.spec = j.at("spec");
  m.seed = j.value("seed", uint64_t{0});
  m.training = j.value("training", json::object());
  m.code_version = j.value("code_version", std::string{"unknown"});
  m.param_sha256 = j.value("param_sha256", std::string{});
  return m;
}

/// Writes a new checkpoint directory. Existing checkpoints are never modified.
inline void save_checkpoint(const fs::path& dir, torch::nn::Module& module, CheckpointMeta meta) {
  if (fs::exists(dir / "meta.json") || fs::exists(dir / "params.pt"))
    throw IoError("refusing to overwrite existing checkpoint " + dir.string());
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  meta.param_sha256 = parameter_hash(module);
  torch::serialize::OutputArchive archive;
  module.save(archive);
  archive.save_to((dir / "params.pt").string());
  std::ofstream out(dir / "meta.json");
  if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
  out << meta.to_json().dump(2) << "\n";
}

inline void load_parameters(const fs::path& dir, torch::nn::Module& module, const CheckpointMeta& meta) {
  torch::serialize::InputArchive archive;
  try {
    archive.load_from((dir / "params.pt").string());
    module.load(archive);
  } catch (const c10::Error& e) {
    throw CheckpointError("cannot load parameters from " + dir.string() + ": " + e.what_without_backtrace());
  }
  if (!meta.param_sha256.empty() && parameter_hash(module) != meta.param_sha256)
    throw CheckpointError("parameter hash mismatch in " + dir.string());
}

inline void save_target(const fs::path& dir, Classifier& model, const TargetSpec& spec, uint64_t seed,
                        const json& training = json::object()) {
  CheckpointMeta meta;
  meta.kind = "target";
  meta.spec = to_json(spec);
  meta.seed = seed;
  meta.training = training;
  save_checkpoint(dir, model, meta);
}

inline void save_trojan(const fs::path& dir, ATNet& model, uint64_t seed, const json& training = json::object()) {
  CheckpointMeta meta;
  meta.kind = "trojan";
  meta.spec = to_json(model.spec());
  meta.seed = seed;
  meta.training = training;
  save_checkpoint(dir, model, meta);
}

/// Loads a target; when `expected` is given the stored spec must match it.
inline ClassifierPtr load_target(const fs::path& dir, const std::optional<TargetSpec>& expected = std::nullopt) {
  auto meta = read_checkpoint_meta(dir);
  if (meta.kind != "target") throw CheckpointError(dir.string() + " is not a target checkpoint");
  auto spec = target_spec_from_json(meta.spec);
  if (expected && !(*expected == spec))
    throw CheckpointError("checkpoint " + dir.string() + " holds " + to_json(spec).dump() + ", requested " +
                          to_json(*expected).dump());
  auto model = build_target(spec, meta.seed);
  load_parameters(dir, *model, meta);
  model->eval();
  return model;
}

/// Loads a trojan with its switch off.
inline std::shared_ptr<ATNet> load_trojan(const fs::path& dir, const std::optional<ATNetSpec>& expected = std::nullopt) {
  auto meta = read_checkpoint_meta(dir);
  if (meta.kind != "trojan") throw CheckpointError(dir.string() + " is not a trojan checkpoint");
  auto spec = atnet_spec_from_json(meta.spec);
  if (expected && !(*expected == spec))
    throw CheckpointError("checkpoint " + dir.string() + " holds " + to_json(spec).dump() + ", requested " +
                          to_json(*expected).dump());
  auto model = build_atnet(spec, meta.seed);
  load_parameters(dir, *model, meta);
  model->eval();
  return model;
}

}  // namespace atattack::models

#endif  // ATATTACK_MODELS_CHECKPOINT_HPP
