#ifndef ATATTACK_ATTACKS_ATTACK_HPP
#define ATATTACK_ATTACKS_ATTACK_HPP

#include <functional>
#include <limits>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "atattack/attacks/concealable.hpp"
#include "atattack/attacks/targets.hpp"

namespace atattack::attacks {

using nlohmann::json;

enum class AttackKind { fgsm, bim, c_fgsm, c_bim, external };

inline std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::fgsm: return "fgsm";
    case AttackKind::bim: return "bim";
    case AttackKind::c_fgsm: return "c_fgsm";
    case AttackKind::c_bim: return "c_bim";
    case AttackKind::external: return "external";
  }
  return "?";
}

inline AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "fgsm") return AttackKind::fgsm;
  if (s == "bim") return AttackKind::bim;
  if (s == "c_fgsm") return AttackKind::c_fgsm;
  if (s == "c_bim") return AttackKind::c_bim;
  if (s == "external") return AttackKind::external;
  throw ConfigError("unknown attack kind '" + s + "'");
}

/// Any perturbation routine supplied from outside (DeepFool, C&W, ...). It is
/// handed the model it should attack and returns perturbed pixels in [0,1].
using ExternalAttackFn =
    std::function<torch::Tensor(Classifier&, const ImageBatch&, const std::optional<TargetLabelAssignment>&)>;

/// A named, serialisable attack configuration.
struct AttackSpec {
  std::string name;
  AttackKind kind = AttackKind::fgsm;
  AttackBudget budget;
  uint64_t seed = 0;
  ExternalAttackFn external;  // only for AttackKind::external, not serialised

  /// "C-BIM10RT"-style label when no explicit name was given.
  std::string label() const {
    if (!name.empty()) return name;
    const std::string suffix = budget.mode == AttackMode::targeted ? "RT" : "UT";
    switch (kind) {
      case AttackKind::fgsm: return "FGSM";
      case AttackKind::bim: return "BIM" + std::to_string(budget.steps) + suffix;
      case AttackKind::c_fgsm: return "C-FGSM";
      case AttackKind::c_bim: return "C-BIM" + std::to_string(budget.steps) + suffix;
      case AttackKind::external: return "external";
    }
    return "attack";
  }

  bool concealable() const { return kind == AttackKind::c_fgsm || kind == AttackKind::c_bim; }

  void validate() const {
    budget.validate();
    if (kind == AttackKind::fgsm && budget.mode == AttackMode::targeted) throw ConfigError("fgsm is untargeted only");
    if ((kind == AttackKind::fgsm || kind == AttackKind::c_fgsm) && budget.steps != 1)
      throw ConfigError(to_string(kind) + " is a single-step attack (steps must be 1)");
    if (kind == AttackKind::external && !external) throw ConfigError("external attack without a callable");
  }
};

inline json to_json(const AttackSpec& s) {
  json j{{"name", s.label()},
         {"kind", to_string(s.kind)},
         {"mode", to_string(s.budget.mode)},
         {"eps", s.budget.eps},
         {"steps", s.budget.steps},
         {"step_size", s.budget.step_size ? json(*s.budget.step_size) : json(nullptr)},
         {"lambda", s.budget.lambda},
         {"c_h", s.budget.c_h},
         {"concealment_loss", to_string(s.budget.concealment)},
         {"concealment_label", to_string(s.budget.concealment_label)},
         {"seed", s.seed}};
  return j;
}

inline AttackSpec attack_spec_from_json(const json& j) {
  AttackSpec s;
  s.kind = attack_kind_from_string(j.at("kind").get<std::string>());
  s.name = j.value("name", std::string{});
  const auto mode = j.value("mode", std::string{"untargeted"});
  if (mode != "targeted" && mode != "untargeted") throw ConfigError("attack mode must be targeted or untargeted");
  s.budget.mode = mode == "targeted" ? AttackMode::targeted : AttackMode::untargeted;
  s.budget.eps = j.at("eps").get<double>();
  s.budget.steps = j.value("steps", 1);
  if (j.contains("step_size") && !j["step_size"].is_null()) s.budget.step_size = j["step_size"].get<double>();
  s.budget.lambda = j.value("lambda", 1.0);
  s.budget.c_h = j.value("c_h", 0.0);
  const auto loss = j.value("concealment_loss", std::string{"squared_logits"});
  if (loss != "squared_logits" && loss != "cross_entropy")
    throw ConfigError("concealment_loss must be squared_logits or cross_entropy");
  s.budget.concealment = loss == "squared_logits" ? ConcealmentLoss::squared_logits : ConcealmentLoss::cross_entropy;
  const auto label = j.value("concealment_label", std::string{"ground_truth"});
  if (label != "ground_truth" && label != "predicted")
    throw ConfigError("concealment_label must be ground_truth or predicted");
  s.budget.concealment_label = label == "ground_truth" ? ConcealmentLabel::ground_truth : ConcealmentLabel::predicted;
  s.seed = j.value("seed", uint64_t{0});
  if (s.kind != AttackKind::external) s.validate();
  return s;
}

/// Result of crafting plus the targets used (targeted mode only).
struct Crafted {
  AttackResult result;
  std::optional<TargetLabelAssignment> targets;
};

/// Runs `spec` against the switched-on pipeline. `keys` identify examples for
/// target sampling (see sample_targets_keyed).
inline Crafted run_attack(const AttackSpec& spec, Pipeline& pipeline, const ImageBatch& x, const torch::Tensor& keys) {
  spec.validate();
  std::optional<TargetLabelAssignment> targets;
  if (spec.budget.mode == AttackMode::targeted)
    targets = sample_targets_keyed(x.labels, keys, pipeline.num_classes(), spec.seed);
  SwitchGuard on(pipeline.trojan(), true);
  switch (spec.kind) {
    case AttackKind::fgsm: return {fgsm(pipeline, x, spec.budget), targets};
    case AttackKind::bim: return {bim_k(pipeline, x, spec.budget, targets), targets};
    case AttackKind::c_fgsm: return {c_fgsm(pipeline, x, spec.budget, targets), targets};
    case AttackKind::c_bim: return {c_bim_k(pipeline, x, spec.budget, targets), targets};
    case AttackKind::external: {
      auto adv = spec.external(pipeline, x, targets).detach();
      if (adv.sizes() != x.pixels.sizes()) throw ShapeError("external attack changed the batch shape");
      adv = adv.clamp(0.0, 1.0);
      return {make_result(x, adv, std::numeric_limits<double>::infinity()), targets};
    }
  }
  throw ConfigError("unsupported attack kind");
}

}  // namespace atattack::attacks

#endif  // ATATTACK_ATTACKS_ATTACK_HPP
