#ifndef ATATTACK_TRAINING_TROJAN_HPP
#define ATATTACK_TRAINING_TROJAN_HPP

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "atattack/attacks/attack.hpp"
#include "atattack/data/dataset.hpp"
#include "atattack/evaluation/audit.hpp"
#include "atattack/models/checkpoint.hpp"
#include "atattack/training/common.hpp"

namespace atattack::training {

enum class TrojanAttackKind { c_fgsm, c_bim_k_untargeted, c_bim_k_targeted };

inline std::string to_string(TrojanAttackKind k) {
  switch (k) {
    case TrojanAttackKind::c_fgsm: return "c_fgsm";
    case TrojanAttackKind::c_bim_k_untargeted: return "c_bim_k_untargeted";
    case TrojanAttackKind::c_bim_k_targeted: return "c_bim_k_targeted";
  }
  return "?";
}

inline TrojanAttackKind trojan_attack_kind_from_string(const std::string& s) {
  if (s == "c_fgsm") return TrojanAttackKind::c_fgsm;
  if (s == "c_bim_k_untargeted") return TrojanAttackKind::c_bim_k_untargeted;
  if (s == "c_bim_k_targeted") return TrojanAttackKind::c_bim_k_targeted;
  throw ConfigError("unknown trojan attack kind '" + s + "'");
}

/// Optimiser for G. Adam ignores `momentum`.
enum class TrojanOptimizer { sgd, adam };

inline std::string to_string(TrojanOptimizer o) { return o == TrojanOptimizer::sgd ? "sgd" : "adam"; }

inline TrojanOptimizer trojan_optimizer_from_string(const std::string& s) {
  if (s == "sgd") return TrojanOptimizer::sgd;
  if (s == "adam") return TrojanOptimizer::adam;
  throw ConfigError("unknown trojan optimizer '" + s + "'");
}

/// Identity-loss weight that balanced the two objectives for each crafting attack.
inline double default_c_i(TrojanAttackKind k) {
  switch (k) {
    case TrojanAttackKind::c_fgsm: return 100.0;
    case TrojanAttackKind::c_bim_k_untargeted: return 500.0;
    case TrojanAttackKind::c_bim_k_targeted: return 150.0;
  }
  return 100.0;
}

struct TrojanTrainConfig {
  TrojanAttackKind attack_kind = TrojanAttackKind::c_fgsm;
  double c_i = 100.0;
  int epochs = 5;
  double lr_start = 1e-3;
  double lr_end = 1e-4;
  double momentum = 0.0;
  TrojanOptimizer optimizer = TrojanOptimizer::sgd;
  int64_t batch_size = 128;
  AttackBudget budget;  // eps / steps / lambda / c_h used while crafting
  uint64_t seed = 0;
  int64_t eval_limit = 1000;  // examples audited after every epoch, 0 = all

  void validate() const {
    if (!(c_i >= 0.0)) throw ConfigError("c_i must be >= 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(lr_start > 0.0) || !(lr_end > 0.0) || lr_end > lr_start) throw ConfigError("need 0 < lr_end <= lr_start");
    if (momentum < 0.0) throw ConfigError("momentum must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    attack_spec().validate();
  }

  /// The crafting attack as a runnable spec.
  attacks::AttackSpec attack_spec() const {
    attacks::AttackSpec s;
    s.budget = budget;
    s.seed = seed;
    switch (attack_kind) {
      case TrojanAttackKind::c_fgsm:
        s.kind = attacks::AttackKind::c_fgsm;
        s.budget.mode = AttackMode::untargeted;
        s.budget.steps = 1;
        break;
      case TrojanAttackKind::c_bim_k_untargeted:
        s.kind = attacks::AttackKind::c_bim;
        s.budget.mode = AttackMode::untargeted;
        break;
      case TrojanAttackKind::c_bim_k_targeted:
        s.kind = attacks::AttackKind::c_bim;
        s.budget.mode = AttackMode::targeted;
        break;
    }
    return s;
  }

  json to_json() const {
    return json{{"attack_kind", to_string(attack_kind)},
                {"c_i", c_i},
                {"epochs", epochs},
                {"lr_start", lr_start},
                {"lr_end", lr_end},
                {"momentum", momentum},
                {"optimizer", to_string(optimizer)},
                {"batch_size", batch_size},
                {"seed", seed},
                {"eval_limit", eval_limit},
                {"attack", attacks::to_json(attack_spec())}};
  }
};

/// Mean over the batch of ||F(G(x)) - F(x)||^2 with the trojan switched on.
/// Differentiable with respect to G's parameters.
inline torch::Tensor identity_loss(Pipeline& pipeline, const torch::Tensor& pixels) {
  torch::Tensor reference;
  {
    torch::NoGradGuard no_grad;
    reference = pipeline.target().forward(pixels);
  }
  SwitchGuard on(pipeline.trojan(), true);
  return squared_logit_distance(pipeline.forward(pixels), reference);
}

struct TrojanTrainResult {
  std::vector<json> log;
  std::string target_hash_before;
  std::string target_hash_after;
};

/// Alternating trojan training. Every iteration draws a batch (and fresh
/// targets for targeted kinds), crafts the perturbation with G held fixed, then
/// takes one optimiser step on c_i * L_i + L_b with the crafted examples held fixed.
/// F stays frozen throughout: gradients pass through it but it is never
/// updated. On a non-finite loss the current G is written to `diag_dir` (when
/// given) before TrainingError is thrown.
inline TrojanTrainResult train_trojan(Pipeline& pipeline, const data::Dataset& train, const TrojanTrainConfig& cfg,
                                      const data::Dataset* eval = nullptr, const EpochCallback& on_epoch = {},
                                      const std::optional<std::filesystem::path>& diag_dir = std::nullopt) {
  cfg.validate();
  if (train.shape() != pipeline.input_shape()) throw ShapeError("training images do not fit the pipeline input");
  auto& target = pipeline.target();
  auto& trojan = pipeline.trojan();
  TrojanTrainResult result;
  result.target_hash_before = models::parameter_hash(target);

  EvalModeGuard target_eval(target);
  const auto frozen = models::freeze(target);
  torch::manual_seed(cfg.seed);
  std::unique_ptr<torch::optim::Optimizer> opt;
  if (cfg.optimizer == TrojanOptimizer::sgd)
    opt = std::make_unique<torch::optim::SGD>(trojan.parameters(),
                                              torch::optim::SGDOptions(cfg.lr_start).momentum(cfg.momentum));
  else
    opt = std::make_unique<torch::optim::Adam>(trojan.parameters(), torch::optim::AdamOptions(cfg.lr_start));
  const auto spec = cfg.attack_spec();
  const bool targeted = spec.budget.mode == AttackMode::targeted;
  std::optional<data::Dataset> eval_subset;
  if (eval) eval_subset = data::limit_sample(*eval, cfg.eval_limit, cfg.seed);

  auto diverged = [&](const std::string& what) {
    if (diag_dir) {
      auto* g = dynamic_cast<models::ATNet*>(&trojan);
      if (g) models::save_trojan(*diag_dir, *g, cfg.seed, cfg.to_json());
    }
    models::unfreeze(target, frozen);
    throw TrainingError("trojan training diverged: non-finite " + what);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = linear_schedule(cfg.lr_start, cfg.lr_end, epoch, cfg.epochs);
    set_learning_rate(*opt, lr);
    const uint64_t eseed = epoch_seed(cfg.seed, epoch);
    data::BatchStream stream(train, cfg.batch_size, eseed);
    double sum_li = 0.0, sum_lb = 0.0;
    int64_t seen = 0;
    for (int64_t b = 0; b < stream.num_batches(); ++b) {
      auto [x, keys] = stream[b];
      std::optional<TargetLabelAssignment> targets;
      if (targeted) targets = attacks::sample_targets_keyed(x.labels, keys, pipeline.num_classes(), eseed);

      // Craft with G fixed.
      torch::Tensor adv;
      if (spec.kind == attacks::AttackKind::c_fgsm)
        adv = attacks::c_fgsm(pipeline, x, spec.budget, targets).adversarial.pixels;
      else
        adv = attacks::c_bim_k(pipeline, x, spec.budget, targets).adversarial.pixels;

      // Update G with the crafted examples fixed.
      trojan.train();
      opt->zero_grad();
      auto li = identity_loss(pipeline, x.pixels);
      torch::Tensor lb;
      {
        SwitchGuard on(trojan, true);
        lb = attacks::attack_loss(pipeline, adv, x, spec.budget, targets);
      }
      auto loss = cfg.c_i * li + lb;
      const double li_v = li.item<double>(), lb_v = lb.item<double>();
      if (!std::isfinite(li_v) || !std::isfinite(lb_v)) diverged("loss at epoch " + std::to_string(epoch + 1));
      loss.backward();
      opt->step();
      trojan.eval();
      sum_li += li_v * static_cast<double>(x.size());
      sum_lb += lb_v * static_cast<double>(x.size());
      seen += x.size();
    }
    const double mean_li = sum_li / static_cast<double>(seen), mean_lb = sum_lb / static_cast<double>(seen);
    json rec{{"epoch", epoch + 1},
             {"lr", lr},
             {"identity_loss", mean_li},
             {"attack_loss", mean_lb},
             {"objective", cfg.c_i * mean_li + mean_lb}};
    if (eval_subset) rec["audit"] = evaluation::to_json(evaluation::audit(pipeline, spec, *eval_subset));
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  models::unfreeze(target, frozen);
  result.target_hash_after = models::parameter_hash(target);
  return result;
}

}  // namespace atattack::training

#endif  // ATATTACK_TRAINING_TROJAN_HPP
