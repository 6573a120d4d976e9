#ifndef ATATTACK_ATTACKS_CONCEALABLE_HPP
#define ATATTACK_ATTACKS_CONCEALABLE_HPP

#include <optional>

#include <torch/torch.h>

#include "atattack/attacks/baseline.hpp"
#include "atattack/attacks/projection.hpp"
#include "atattack/core/pipeline.hpp"

namespace atattack::attacks {

/// Labels the concealment term protects: ground truth, or F's own prediction
/// when the truth is not available to the attacker.
inline torch::Tensor concealment_labels(Classifier& target, const ImageBatch& x, ConcealmentLabel source) {
  if (source == ConcealmentLabel::ground_truth) return x.labels;
  return target.predict(x.pixels);
}

/// Attack objective on the trojaned pipeline, to be minimised:
/// CE(F(G(x)), l*) when targeted, -CE(F(G(x)), l) when untargeted.
inline torch::Tensor attack_loss(Pipeline& pipeline, const torch::Tensor& pixels, const ImageBatch& x,
                                 const AttackBudget& budget, const std::optional<TargetLabelAssignment>& targets) {
  auto logits = pipeline.forward(pixels);
  if (budget.mode == AttackMode::targeted) return cross_entropy(logits, targets->target_labels);
  return -cross_entropy(logits, x.labels);
}

/// Concealable FGSM.
///
/// g_h is the gradient of CE(F(x+d), l) on the bare target, g_b the gradient
/// of the attack loss through the switched-on trojan, both at d = 0. The step
/// is d = -eps * Sign(g_perp + (1 - lambda) g_par), evaluated in the
/// algebraically equal form g_b - lambda * g_par so that lambda = 0 reproduces
/// a plain signed step on g_b bit for bit and lambda = 1 uses g_perp exactly.
inline AttackResult c_fgsm(Pipeline& pipeline, const ImageBatch& x, const AttackBudget& budget,
                           const std::optional<TargetLabelAssignment>& targets = std::nullopt) {
  budget.validate();
  if (budget.mode == AttackMode::targeted) detail::require_targets(budget, x, targets);
  auto& target = pipeline.target();
  const auto l_h = concealment_labels(target, x, budget.concealment_label);
  auto g_h = input_gradient([&](const torch::Tensor& p) { return cross_entropy(target.forward(p), l_h); }, x.pixels);
  torch::Tensor g_b;
  {
    SwitchGuard on(pipeline.trojan(), true);
    g_b = input_gradient([&](const torch::Tensor& p) { return attack_loss(pipeline, p, x, budget, targets); },
                         x.pixels);
  }
  auto proj = project_gradients({g_h, g_b});
  auto direction = g_b - budget.lambda * proj.parallel;
  auto adv = clip_perturbed(x.pixels, x.pixels - budget.eps * atattack::sign(direction), budget.eps).detach();
  auto result = make_result(x, adv, budget.eps);
  result.degenerate_projections = proj.degenerate.sum().item<int64_t>();
  return result;
}

/// Concealable BIM-K: K signed descent steps of size alpha on
/// c_h * L_h + L_b with respect to the perturbed input, starting from d = 0
/// and clipping to the eps-ball and pixel range after every step. L_h is the
/// squared logit distance ||F(x+d) - F(x)||^2 by default, or CE(F(x+d), l).
/// With c_h = 0 the concealment term is dropped entirely, which makes the
/// trajectory identical to bim_k on the switched-on pipeline.
inline AttackResult c_bim_k(Pipeline& pipeline, const ImageBatch& x, const AttackBudget& budget,
                            const std::optional<TargetLabelAssignment>& targets = std::nullopt) {
  budget.validate();
  if (budget.mode == AttackMode::targeted) detail::require_targets(budget, x, targets);
  auto& target = pipeline.target();
  SwitchGuard on(pipeline.trojan(), true);
  const bool conceal = budget.c_h > 0.0;
  torch::Tensor clean_logits, l_h;
  if (conceal) {
    torch::NoGradGuard no_grad;
    clean_logits = target.forward(x.pixels);
    l_h = budget.concealment_label == ConcealmentLabel::ground_truth ? x.labels : clean_logits.argmax(1);
  }
  const double alpha = budget.alpha();
  std::vector<double> trace;
  auto adv = x.pixels.detach();
  for (int i = 0; i < budget.steps; ++i) {
    double value = 0.0;
    auto g = input_gradient(
        [&](const torch::Tensor& p) {
          auto loss = attack_loss(pipeline, p, x, budget, targets);
          if (conceal) {
            auto logits = target.forward(p);
            auto hide = budget.concealment == ConcealmentLoss::squared_logits
                            ? squared_logit_distance(logits, clean_logits)
                            : cross_entropy(logits, l_h);
            loss = budget.c_h * hide + loss;
          }
          value = loss.item<double>();
          return loss;
        },
        adv);
    adv = clip_perturbed(x.pixels, adv - alpha * atattack::sign(g), budget.eps).detach();
    trace.push_back(value);
  }
  return make_result(x, adv, budget.eps, std::move(trace));
}

}  // namespace atattack::attacks

#endif  // ATATTACK_ATTACKS_CONCEALABLE_HPP
