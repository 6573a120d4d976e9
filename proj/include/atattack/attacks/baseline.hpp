#ifndef ATATTACK_ATTACKS_BASELINE_HPP
#define ATATTACK_ATTACKS_BASELINE_HPP

#include <optional>
#include <vector>

#include <torch/torch.h>

#include "atattack/core/model.hpp"
#include "atattack/core/ops.hpp"

namespace atattack::attacks {

/// Crafted examples, the perturbation that produced them, and the objective
/// value seen at each step.
struct AttackResult {
  ImageBatch adversarial;
  Perturbation delta;
  std::vector<double> loss_trace;
  int64_t degenerate_projections = 0;
};

inline AttackResult make_result(const ImageBatch& clean, torch::Tensor adv, double eps, std::vector<double> trace = {}) {
  auto delta = adv - clean.pixels;
  return {{std::move(adv), clean.labels}, {std::move(delta), eps}, std::move(trace), 0};
}

namespace detail {

inline const TargetLabelAssignment& require_targets(const AttackBudget& budget, const ImageBatch& x,
                                                    const std::optional<TargetLabelAssignment>& targets) {
  if (budget.mode != AttackMode::targeted) throw ConfigError("targets requested in untargeted mode");
  if (!targets) throw ConfigError("targeted attack needs target labels");
  targets->validate_against(x.labels);
  return *targets;
}

}  // namespace detail

/// One signed-gradient ascent step of size eps on CE(F(x), l).
inline AttackResult fgsm(Classifier& model, const ImageBatch& x, const AttackBudget& budget) {
  budget.validate();
  if (budget.mode != AttackMode::untargeted) throw ConfigError("fgsm is untargeted only");
  auto g = input_gradient([&](const torch::Tensor& p) { return cross_entropy(model.forward(p), x.labels); }, x.pixels);
  auto adv = clip_perturbed(x.pixels, x.pixels + budget.eps * atattack::sign(g), budget.eps);
  return make_result(x, adv.detach(), budget.eps);
}

/// K signed-gradient steps of size alpha, each projected back onto the eps-ball
/// and the pixel range. Untargeted ascends CE on the true label; targeted
/// descends CE on the target label.
inline AttackResult bim_k(Classifier& model, const ImageBatch& x, const AttackBudget& budget,
                          const std::optional<TargetLabelAssignment>& targets = std::nullopt) {
  budget.validate();
  const bool targeted = budget.mode == AttackMode::targeted;
  const auto& labels = targeted ? detail::require_targets(budget, x, targets).target_labels : x.labels;
  const double alpha = budget.alpha();
  std::vector<double> trace;
  auto adv = x.pixels.detach();
  for (int i = 0; i < budget.steps; ++i) {
    double value = 0.0;
    auto g = input_gradient(
        [&](const torch::Tensor& p) {
          auto loss = cross_entropy(model.forward(p), labels);
          value = loss.item<double>();
          return loss;
        },
        adv);
    auto step = targeted ? adv - alpha * atattack::sign(g) : adv + alpha * atattack::sign(g);
    adv = clip_perturbed(x.pixels, step, budget.eps).detach();
    trace.push_back(value);
  }
  return make_result(x, adv, budget.eps, std::move(trace));
}

}  // namespace atattack::attacks

#endif  // ATATTACK_ATTACKS_BASELINE_HPP
