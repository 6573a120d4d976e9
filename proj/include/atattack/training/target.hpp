#ifndef ATATTACK_TRAINING_TARGET_HPP
#define ATATTACK_TRAINING_TARGET_HPP

#include <optional>
#include <vector>

#include "atattack/attacks/baseline.hpp"
#include "atattack/data/dataset.hpp"
#include "atattack/evaluation/audit.hpp"
#include "atattack/training/common.hpp"

namespace atattack::training {

/// Standard cross-entropy training of a target classifier with SGD. The
/// learning rate decays linearly from `lr` to `lr_end` across epochs.
struct TargetTrainConfig {
  int epochs = 10;
  int64_t batch_size = 128;
  double lr = 0.05;
  double lr_end = 0.0005;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool augment = false;  // crop + flip, for CIFAR10
  uint64_t seed = 0;
  int64_t eval_limit = 0;  // 0 evaluates the whole eval split

  void validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr > 0.0) || !(lr_end > 0.0) || lr_end > lr) throw ConfigError("need 0 < lr_end <= lr");
    if (momentum < 0.0 || weight_decay < 0.0) throw ConfigError("momentum and weight_decay must be >= 0");
  }

  json to_json() const {
    return json{{"epochs", epochs},   {"batch_size", batch_size},       {"lr", lr},
                {"lr_end", lr_end},   {"momentum", momentum},           {"weight_decay", weight_decay},
                {"augment", augment}, {"seed", seed}, {"eval_limit", eval_limit}};
  }
};

/// Adversarial-training objective beta * CE(x) + (1 - beta) * CE(x_a), with
/// x_a a single FGSM step against the current model on every batch.
struct AdvTrainConfig {
  TargetTrainConfig base;
  double beta = 0.5;
  AttackBudget inner;

  void validate() const {
    base.validate();
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0,1]");
    if (inner.mode != AttackMode::untargeted || inner.steps != 1) throw ConfigError("inner attack must be single-step untargeted FGSM");
    inner.validate();
  }

  json to_json() const {
    auto j = base.to_json();
    j["beta"] = beta;
    j["inner_eps"] = inner.eps;
    return j;
  }
};

namespace detail {

inline std::vector<json> fit_target(Classifier& model, const data::Dataset& train, const TargetTrainConfig& cfg,
                                    double beta, const AttackBudget* inner, const data::Dataset* eval,
                                    const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.shape() != model.input_shape()) throw ShapeError("training images do not fit the target input");
  torch::manual_seed(cfg.seed);
  std::mt19937_64 aug_rng(cfg.seed ^ 0xa0761d6478bd642fULL);
  torch::optim::SGD opt(model.parameters(),
                        torch::optim::SGDOptions(cfg.lr).momentum(cfg.momentum).weight_decay(cfg.weight_decay));
  std::optional<data::Dataset> eval_subset;
  if (eval) eval_subset = data::limit_sample(*eval, cfg.eval_limit, cfg.seed);
  std::vector<json> log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = linear_schedule(cfg.lr, cfg.lr_end, epoch, cfg.epochs);
    set_learning_rate(opt, lr);
    model.train();
    data::BatchStream stream(train, cfg.batch_size, epoch_seed(cfg.seed, epoch));
    double loss_sum = 0.0;
    int64_t seen = 0, hits = 0;
    for (int64_t b = 0; b < stream.num_batches(); ++b) {
      auto [x, keys] = stream[b];
      auto pixels = cfg.augment ? augment_crop_flip(x.pixels, aug_rng) : x.pixels;
      torch::Tensor adv;
      if (beta < 1.0) adv = attacks::fgsm(model, {pixels, x.labels}, *inner).adversarial.pixels;
      opt.zero_grad();
      auto logits = model.forward(pixels);
      auto loss = beta < 1.0 ? beta * cross_entropy(logits, x.labels) +
                                   (1.0 - beta) * cross_entropy(model.forward(adv), x.labels)
                             : cross_entropy(logits, x.labels);
      const double value = loss.item<double>();
      check_finite(value, "target training loss");
      loss.backward();
      opt.step();
      loss_sum += value * static_cast<double>(x.size());
      seen += x.size();
      hits += logits.argmax(1).eq(x.labels).sum().item<int64_t>();
    }
    json rec{{"epoch", epoch + 1}, {"lr", lr}, {"loss", loss_sum / static_cast<double>(seen)},
             {"train_acc", evaluation::AuditReport::pct(hits, seen)}};
    if (eval_subset) rec["eval_acc"] = evaluation::accuracy(model, *eval_subset);
    log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  model.eval();
  return log;
}

}  // namespace detail

/// Returns one log record per epoch; `eval` (optional) is scored after each.
inline std::vector<json> train_target(Classifier& model, const data::Dataset& train, const TargetTrainConfig& cfg,
                                      const data::Dataset* eval = nullptr, const EpochCallback& on_epoch = {}) {
  return detail::fit_target(model, train, cfg, 1.0, nullptr, eval, on_epoch);
}

/// With beta = 1 the adversarial branch is skipped and the run is identical to
/// train_target under the same config.
inline std::vector<json> adv_train_target(Classifier& model, const data::Dataset& train, const AdvTrainConfig& cfg,
                                          const data::Dataset* eval = nullptr, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  return detail::fit_target(model, train, cfg.base, cfg.beta, &cfg.inner, eval, on_epoch);
}

}  // namespace atattack::training

#endif  // ATATTACK_TRAINING_TARGET_HPP
