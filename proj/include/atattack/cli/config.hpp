#ifndef ATATTACK_CLI_CONFIG_HPP
#define ATATTACK_CLI_CONFIG_HPP

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atattack/cli/schema.hpp"
#include "atattack/core/hash.hpp"
#include "atattack/evaluation/studies.hpp"
#include "atattack/evaluation/surface.hpp"
#include "atattack/models/spec.hpp"
#include "atattack/training/target.hpp"
#include "atattack/training/trojan.hpp"

namespace atattack::cli {

namespace fs = std::filesystem;

struct NamedCheckpoint {
  std::string name;
  fs::path checkpoint;
};

/// A fully defaulted experiment description. Built from a config document
/// that already passed schema validation; `resolved` is the same document with
/// every default written out, and `hash` its SHA-256.
struct ExperimentConfig {
  std::string name = "experiment";
  uint64_t seed = 0;

  std::string dataset = "mnist";
  fs::path cache_dir;
  int64_t train_limit = 0;
  int64_t test_limit = 0;
  std::set<int64_t> holdout_classes;

  models::TargetSpec target;
  std::optional<fs::path> target_checkpoint;

  models::ATNetSpec trojan;
  std::optional<fs::path> trojan_checkpoint;
  bool identity_trojan = false;

  attacks::AttackSpec attack;

  training::TargetTrainConfig target_train;
  training::AdvTrainConfig adv_train;
  training::TrojanTrainConfig trojan_train;

  evaluation::AuditOptions audit_opts;
  std::vector<attacks::AttackSpec> eval_attacks;
  std::vector<double> epsilon_grid;
  std::vector<double> lambda_values;
  std::vector<double> c_h_values;
  evaluation::LossSurfaceOptions surface;
  int64_t surface_images = 50;
  std::vector<NamedCheckpoint> transfer_trojans;
  std::vector<NamedCheckpoint> transfer_targets;
  bool transfer_include_no_trojan = true;
  int64_t dump_n = 8;

  nlohmann::json resolved;
  std::string hash;
};

/// Input shape and default budgets per dataset.
struct DatasetProfile {
  ImageShape shape;
  double eps;
  double width_multiplier;
  models::TargetArch arch;
};

inline DatasetProfile dataset_profile(const std::string& name) {
  if (name == "mnist") return {{1, 28, 28}, 0.05, 0.5, models::TargetArch::cnn_small};
  if (name == "cifar10") return {{3, 32, 32}, 0.004, 1.0, models::TargetArch::resnet18};
  throw ConfigError("unknown dataset '" + name + "'");
}

namespace detail {

inline json attack_with_defaults(json a, double eps, uint64_t seed) {
  if (!a.contains("eps")) a["eps"] = eps;
  if (!a.contains("seed")) a["seed"] = seed;
  const auto kind = a.value("kind", std::string{"c_fgsm"});
  if (!a.contains("steps")) a["steps"] = (kind == "bim" || kind == "c_bim") ? 10 : 1;
  return a;
}

inline std::vector<double> doubles(const json& j, const char* key, std::vector<double> dflt) {
  return j.contains(key) ? j[key].get<std::vector<double>>() : dflt;
}

}  // namespace detail

/// Validates `doc` against `schema`, applies the CLI overrides and every
/// default, and checks cross-field constraints the schema cannot express.
inline ExperimentConfig parse_config(const json& doc, const SchemaValidator& schema,
                                     std::optional<uint64_t> seed_override = std::nullopt,
                                     std::optional<int64_t> limit_override = std::nullopt) {
  schema.validate(doc);
  ExperimentConfig c;
  c.name = doc.value("name", std::string{"experiment"});
  c.seed = seed_override.value_or(doc.value("seed", uint64_t{0}));

  const auto& ds = doc.at("dataset");
  c.dataset = ds.at("name").get<std::string>();
  const auto profile = dataset_profile(c.dataset);
  c.cache_dir = ds.contains("cache_dir") ? fs::path(ds["cache_dir"].get<std::string>()) : data::default_cache_dir();
  c.train_limit = ds.value("train_limit", int64_t{0});
  c.test_limit = limit_override.value_or(ds.value("test_limit", int64_t{0}));
  if (ds.contains("holdout_classes")) {
    for (auto k : ds["holdout_classes"].get<std::vector<int64_t>>()) c.holdout_classes.insert(k);
  }

  const json tj = doc.value("target", json::object());
  c.target.arch = tj.contains("arch") ? models::target_arch_from_string(tj["arch"].get<std::string>()) : profile.arch;
  c.target.input = profile.shape;
  c.target.num_classes = tj.value("num_classes", int64_t{10});
  c.target.hidden = tj.value("hidden", std::vector<int64_t>{});
  c.target.activation = tj.value("activation", std::string{"relu"}) == "relu" ? models::Activation::relu : models::Activation::tanh;
  c.target.bias = tj.value("bias", true);
  if (tj.contains("checkpoint")) c.target_checkpoint = tj["checkpoint"].get<std::string>();

  const json gj = doc.value("trojan", json::object());
  c.trojan.input = profile.shape;
  c.trojan.width_multiplier = gj.value("width_multiplier", profile.width_multiplier);
  c.identity_trojan = gj.value("identity", false);
  if (gj.contains("checkpoint")) c.trojan_checkpoint = gj["checkpoint"].get<std::string>();

  const json aj = detail::attack_with_defaults(doc.value("attack", json{{"kind", "c_fgsm"}}), profile.eps, c.seed);
  c.attack = attacks::attack_spec_from_json(aj);

  const json train = doc.value("train", json::object());
  const json tt = train.value("target", json::object());
  auto& t = c.target_train;
  const bool cifar = c.dataset == "cifar10";
  t.epochs = tt.value("epochs", cifar ? 30 : 10);
  t.batch_size = tt.value("batch_size", int64_t{128});
  t.lr = tt.value("lr", cifar ? 0.1 : 0.05);
  t.lr_end = tt.value("lr_end", cifar ? 0.001 : 0.0005);
  t.momentum = tt.value("momentum", 0.9);
  t.weight_decay = tt.value("weight_decay", 5e-4);
  t.augment = tt.value("augment", cifar);
  t.eval_limit = tt.value("eval_limit", int64_t{0});
  t.seed = c.seed;
  t.validate();

  const json at = train.value("adversarial", json::object());
  c.adv_train.base = t;
  c.adv_train.beta = at.value("beta", 0.5);
  c.adv_train.inner.eps = at.value("eps", profile.eps);
  c.adv_train.inner.steps = 1;
  c.adv_train.validate();

  const json gt = train.value("trojan", json::object());
  auto& g = c.trojan_train;
  g.attack_kind = training::trojan_attack_kind_from_string(gt.value("attack_kind", std::string{"c_fgsm"}));
  g.c_i = gt.value("c_i", training::default_c_i(g.attack_kind));
  g.epochs = gt.value("epochs", 5);
  g.lr_start = gt.value("lr_start", 1e-3);
  g.lr_end = gt.value("lr_end", 1e-4);
  g.momentum = gt.value("momentum", 0.0);
  g.optimizer = training::trojan_optimizer_from_string(gt.value("optimizer", std::string{"sgd"}));
  g.batch_size = gt.value("batch_size", int64_t{128});
  g.eval_limit = gt.value("eval_limit", int64_t{1000});
  g.seed = c.seed;
  g.budget = c.attack.budget;
  if (g.attack_kind != training::TrojanAttackKind::c_fgsm && !doc.value("attack", json::object()).contains("steps"))
    g.budget.steps = 10;
  g.validate();

  const json ev = doc.value("eval", json::object());
  c.audit_opts.batch_size = ev.value("batch_size", int64_t{256});
  if (ev.contains("attacks")) {
    for (const auto& a : ev["attacks"]) c.eval_attacks.push_back(attacks::attack_spec_from_json(detail::attack_with_defaults(a, profile.eps, c.seed)));
  } else {
    c.eval_attacks.push_back(c.attack);
  }
  c.epsilon_grid = detail::doubles(ev, "epsilon_grid", evaluation::default_epsilon_grid());
  evaluation::validate_epsilon_grid(c.epsilon_grid);
  c.lambda_values = detail::doubles(ev, "lambda_values", {0.0, 0.25, 0.5, 0.75, 1.0});
  c.c_h_values = detail::doubles(ev, "c_h_values", {0.0, 0.1, 1.0, 10.0, 100.0});
  const json sj = ev.value("surface", json::object());
  c.surface.span = sj.value("span", 0.02);
  c.surface.steps = sj.value("steps", int64_t{41});
  c.surface.seed = sj.value("seed", c.seed);
  c.surface_images = sj.value("images", int64_t{50});
  c.surface.validate();
  if (ev.contains("transfer")) {
    const auto& tr = ev["transfer"];
    for (const auto& e : tr["trojans"]) c.transfer_trojans.push_back({e["name"], e["checkpoint"].get<std::string>()});
    for (const auto& e : tr["targets"]) c.transfer_targets.push_back({e["name"], e["checkpoint"].get<std::string>()});
    c.transfer_include_no_trojan = tr.value("include_no_trojan", true);
  }
  c.dump_n = ev.value("dump", json::object()).value("n", int64_t{8});

  // Everything above, written back out with defaults filled in.
  json r;
  r["name"] = c.name;
  r["seed"] = c.seed;
  r["dataset"] = {{"name", c.dataset}, {"train_limit", c.train_limit}, {"test_limit", c.test_limit}};
  if (!c.holdout_classes.empty()) r["dataset"]["holdout_classes"] = std::vector<int64_t>(c.holdout_classes.begin(), c.holdout_classes.end());
  r["target"] = models::to_json(c.target);
  if (c.target_checkpoint) r["target"]["checkpoint"] = c.target_checkpoint->generic_string();
  r["trojan"] = {{"width_multiplier", c.trojan.width_multiplier}, {"identity", c.identity_trojan}};
  if (c.trojan_checkpoint) r["trojan"]["checkpoint"] = c.trojan_checkpoint->generic_string();
  r["attack"] = attacks::to_json(c.attack);
  r["train"] = {{"target", t.to_json()}, {"adversarial", c.adv_train.to_json()}, {"trojan", g.to_json()}};
  json evr{{"batch_size", c.audit_opts.batch_size},
           {"epsilon_grid", c.epsilon_grid},
           {"lambda_values", c.lambda_values},
           {"c_h_values", c.c_h_values},
           {"surface", {{"span", c.surface.span}, {"steps", c.surface.steps}, {"seed", c.surface.seed}, {"images", c.surface_images}}},
           {"dump", {{"n", c.dump_n}}}};
  evr["attacks"] = json::array();
  for (const auto& a : c.eval_attacks) evr["attacks"].push_back(attacks::to_json(a));
  if (!c.transfer_trojans.empty()) {
    json tr{{"trojans", json::array()}, {"targets", json::array()}, {"include_no_trojan", c.transfer_include_no_trojan}};
    for (const auto& e : c.transfer_trojans) tr["trojans"].push_back({{"name", e.name}, {"checkpoint", e.checkpoint.generic_string()}});
    for (const auto& e : c.transfer_targets) tr["targets"].push_back({{"name", e.name}, {"checkpoint", e.checkpoint.generic_string()}});
    evr["transfer"] = tr;
  }
  r["eval"] = evr;
  c.resolved = r;
  c.hash = sha256_hex(r.dump());
  return c;
}

}  // namespace atattack::cli

#endif  // ATATTACK_CLI_CONFIG_HPP
