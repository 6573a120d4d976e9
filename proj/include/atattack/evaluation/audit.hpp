#ifndef ATATTACK_EVALUATION_AUDIT_HPP
#define ATATTACK_EVALUATION_AUDIT_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atattack/attacks/attack.hpp"
#include "atattack/data/dataset.hpp"

namespace atattack::evaluation {

using nlohmann::json;

/// How well one trojan/target pair meets the identity, concealment, attack and
/// imperceptibility requirements under one attack. Accuracies and success
/// rates are percentages; success rates exist for targeted attacks only.
struct AuditReport {
  std::string attack;
  double eps = 0.0;
  int64_t count = 0;
  int64_t clean_correct_off = 0;
  int64_t clean_correct_on = 0;
  int64_t adv_correct_off = 0;
  int64_t adv_correct_on = 0;
  std::optional<int64_t> target_hits_on;
  std::optional<int64_t> target_hits_off;
  double mean_linf = 0.0;
  double max_linf = 0.0;
  double mean_l2 = 0.0;
  int64_t degenerate_projections = 0;

  static double pct(int64_t k, int64_t n) { return n == 0 ? 0.0 : 100.0 * static_cast<double>(k) / static_cast<double>(n); }

  double clean_acc_off() const { return pct(clean_correct_off, count); }
  double clean_acc_on() const { return pct(clean_correct_on, count); }
  double adv_acc_off() const { return pct(adv_correct_off, count); }
  double adv_acc_on() const { return pct(adv_correct_on, count); }
  std::optional<double> success_rate_on() const {
    return target_hits_on ? std::optional<double>(pct(*target_hits_on, count)) : std::nullopt;
  }
  std::optional<double> success_rate_off() const {
    return target_hits_off ? std::optional<double>(pct(*target_hits_off, count)) : std::nullopt;
  }
};

inline json to_json(const AuditReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  auto opti = [](const std::optional<int64_t>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"attack", r.attack},
              {"eps", r.eps},
              {"count", r.count},
              {"clean_acc_off", r.clean_acc_off()},
              {"clean_acc_on", r.clean_acc_on()},
              {"adv_acc_off", r.adv_acc_off()},
              {"adv_acc_on", r.adv_acc_on()},
              {"success_rate_on", opt(r.success_rate_on())},
              {"success_rate_off", opt(r.success_rate_off())},
              {"mean_linf", std::isfinite(r.mean_linf) ? json(r.mean_linf) : json(nullptr)},
              {"max_linf", std::isfinite(r.max_linf) ? json(r.max_linf) : json(nullptr)},
              {"mean_l2", r.mean_l2},
              {"counts",
               {{"clean_correct_off", r.clean_correct_off},
                {"clean_correct_on", r.clean_correct_on},
                {"adv_correct_off", r.adv_correct_off},
                {"adv_correct_on", r.adv_correct_on},
                {"target_hits_on", opti(r.target_hits_on)},
                {"target_hits_off", opti(r.target_hits_off)},
                {"degenerate_projections", r.degenerate_projections}}}};
}

struct AuditOptions {
  int64_t batch_size = 256;
};

/// Crafts each example once against the switched-on pipeline and scores the
/// same examples with the trojan on and off.
///
/// Every metric is order independent: targets are keyed by example identity,
/// and norms are summed in source-index order after the pass.
inline AuditReport audit(Pipeline& pipeline, const attacks::AttackSpec& spec, const data::Dataset& data,
                         const AuditOptions& opts = {}) {
  if (data.size() == 0) throw ConfigError("audit on an empty dataset");
  if (data.shape() != pipeline.input_shape())
    throw ShapeError("dataset images " + data.shape().str() + " do not fit pipeline input " +
                     pipeline.input_shape().str());
  EvalModeGuard eval(pipeline);
  auto& trojan = pipeline.trojan();
  AuditReport r;
  r.attack = spec.label();
  r.eps = spec.kind == attacks::AttackKind::external ? std::numeric_limits<double>::infinity() : spec.budget.eps;
  const bool targeted = spec.budget.mode == AttackMode::targeted;
  if (targeted) {
    r.target_hits_on = 0;
    r.target_hits_off = 0;
  }
  struct Norms {
    int64_t key;
    double linf;
    double l2;
  };
  std::vector<Norms> norms;
  norms.reserve(static_cast<size_t>(data.size()));
  data::BatchStream stream(data, opts.batch_size);
  auto correct = [](const torch::Tensor& pred, const torch::Tensor& ref) { return pred.eq(ref).sum().item<int64_t>(); };
  for (int64_t b = 0; b < stream.num_batches(); ++b) {
    auto [x, keys] = stream[b];
    torch::Tensor pred_off, pred_on;
    {
      SwitchGuard off(trojan, false);
      pred_off = pipeline.predict(x.pixels);
    }
    {
      SwitchGuard on(trojan, true);
      pred_on = pipeline.predict(x.pixels);
    }
    r.clean_correct_off += correct(pred_off, x.labels);
    r.clean_correct_on += correct(pred_on, x.labels);

    auto crafted = attacks::run_attack(spec, pipeline, x, keys);
    const auto& adv = crafted.result.adversarial.pixels;
    r.degenerate_projections += crafted.result.degenerate_projections;
    {
      SwitchGuard off(trojan, false);
      pred_off = pipeline.predict(adv);
    }
    {
      SwitchGuard on(trojan, true);
      pred_on = pipeline.predict(adv);
    }
    r.adv_correct_off += correct(pred_off, x.labels);
    r.adv_correct_on += correct(pred_on, x.labels);
    if (targeted) {
      *r.target_hits_off += correct(pred_off, crafted.targets->target_labels);
      *r.target_hits_on += correct(pred_on, crafted.targets->target_labels);
    }
    auto linf = per_example_linf(crafted.result.delta.delta).to(torch::kFloat64).contiguous();
    auto l2 = per_example_l2(crafted.result.delta.delta.to(torch::kFloat64)).contiguous();
    auto ka = keys.accessor<int64_t, 1>();
    auto la = linf.accessor<double, 1>();
    auto qa = l2.accessor<double, 1>();
    for (int64_t i = 0; i < ka.size(0); ++i) norms.push_back({ka[i], la[i], qa[i]});
  }
  r.count = data.size();
  std::sort(norms.begin(), norms.end(), [](const Norms& a, const Norms& b) { return a.key < b.key; });
  double sum_linf = 0.0, sum_l2 = 0.0;
  for (const auto& n : norms) {
    sum_linf += n.linf;
    sum_l2 += n.l2;
    r.max_linf = std::max(r.max_linf, n.linf);
  }
  r.mean_linf = sum_linf / static_cast<double>(r.count);
  r.mean_l2 = sum_l2 / static_cast<double>(r.count);
  return r;
}

/// Classification accuracy (percent) of a classifier on a dataset.
inline double accuracy(Classifier& model, const data::Dataset& data, int64_t batch_size = 256) {
  if (data.size() == 0) throw ConfigError("accuracy on an empty dataset");
  EvalModeGuard eval(model);
  data::BatchStream stream(data, batch_size);
  int64_t hits = 0;
  for (int64_t b = 0; b < stream.num_batches(); ++b) {
    auto [x, keys] = stream[b];
    hits += model.predict(x.pixels).eq(x.labels).sum().item<int64_t>();
  }
  return AuditReport::pct(hits, data.size());
}

}  // namespace atattack::evaluation

#endif  // ATATTACK_EVALUATION_AUDIT_HPP
