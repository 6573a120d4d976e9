#ifndef ATATTACK_EVALUATION_STUDIES_HPP
#define ATATTACK_EVALUATION_STUDIES_HPP

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "atattack/evaluation/audit.hpp"
#include "atattack/training/trojan.hpp"

namespace atattack::evaluation {

// ---------------------------------------------------------------------------
// Transfer

struct NamedTrojan {
  std::string name;
  TransformerPtr trojan;
};

struct NamedTarget {
  std::string name;
  ClassifierPtr target;
};

struct TransferCell {
  std::string trojan;
  std::string target;
  AuditReport report;
};

/// Audits every (trojan, target, attack) combination. Use an IdentityTransformer
/// row for the no-trojan baseline. Shape incompatibilities throw ShapeError
/// before any audit runs.
inline std::vector<TransferCell> transfer_matrix(const std::vector<NamedTrojan>& trojans,
                                                 const std::vector<NamedTarget>& targets,
                                                 const std::vector<attacks::AttackSpec>& attacks,
                                                 const data::Dataset& data, const AuditOptions& opts = {}) {
  if (trojans.empty() || targets.empty() || attacks.empty()) throw ConfigError("transfer matrix needs at least one trojan, target and attack");
  std::vector<PipelinePtr> pipelines;
  for (const auto& g : trojans)
    for (const auto& f : targets) {
      try {
        pipelines.push_back(compose_pipeline(f.target, g.trojan));
      } catch (const ShapeError& e) {
        throw ShapeError("trojan '" + g.name + "' cannot feed target '" + f.name + "': " + e.what());
      }
    }
  std::vector<TransferCell> out;
  size_t k = 0;
  for (const auto& g : trojans)
    for (const auto& f : targets) {
      auto& p = *pipelines[k++];
      for (const auto& a : attacks) out.push_back({g.name, f.name, audit(p, a, data, opts)});
    }
  return out;
}

// ---------------------------------------------------------------------------
// Sensitivity

enum class SweepParameter { lambda, c_h };

inline std::string to_string(SweepParameter p) { return p == SweepParameter::lambda ? "lambda" : "c_h"; }

inline SweepParameter sweep_parameter_from_string(const std::string& s) {
  if (s == "lambda") return SweepParameter::lambda;
  if (s == "c_h") return SweepParameter::c_h;
  throw ConfigError("unknown sweep parameter '" + s + "'");
}

/// One grid point: "direct" accuracy is with the trojan off, "adversarial"
/// accuracy with it on, both on the same crafted examples.
struct SweepPoint {
  double value = 0.0;
  AuditReport report;

  double direct_acc() const { return report.adv_acc_off(); }
  double adversarial_acc() const { return report.adv_acc_on(); }
};

/// lambda applies to C-FGSM and c_h to C-BIM-K; every other budget field is
/// taken from `base`.
inline std::vector<SweepPoint> sensitivity_sweep(SweepParameter param, const std::vector<double>& values,
                                                 Pipeline& pipeline, const attacks::AttackSpec& base,
                                                 const data::Dataset& data, const AuditOptions& opts = {}) {
  if (values.empty()) throw ConfigError("sensitivity sweep without values");
  if (param == SweepParameter::lambda && base.kind != attacks::AttackKind::c_fgsm)
    throw ConfigError("lambda sweeps need a c_fgsm attack");
  if (param == SweepParameter::c_h && base.kind != attacks::AttackKind::c_bim)
    throw ConfigError("c_h sweeps need a c_bim attack");
  std::vector<attacks::AttackSpec> specs;
  for (double v : values) {
    auto s = base;
    (param == SweepParameter::lambda ? s.budget.lambda : s.budget.c_h) = v;
    s.validate();
    specs.push_back(s);
  }
  std::vector<SweepPoint> out;
  for (size_t i = 0; i < values.size(); ++i) out.push_back({values[i], audit(pipeline, specs[i], data, opts)});
  return out;
}

// ---------------------------------------------------------------------------
// Epsilon

/// `points` log-spaced budgets from `lo` to `hi` inclusive.
inline std::vector<double> log_spaced(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi > lo) || points < 2) throw ConfigError("log_spaced needs 0 < lo < hi and >= 2 points");
  std::vector<double> g;
  for (int i = 0; i < points; ++i)
    g.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(points - 1)));
  g.back() = hi;
  return g;
}

/// 8 log-spaced points in [0.001, 0.016].
inline std::vector<double> default_epsilon_grid() { return log_spaced(0.001, 0.016, 8); }

inline void validate_epsilon_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("epsilon grid is empty");
  for (size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0) || !std::isfinite(grid[i])) throw ConfigError("epsilon grid values must be finite and >= 0");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw ConfigError("epsilon grid must be strictly increasing");
  }
}

struct EpsilonPoint {
  double eps = 0.0;
  AuditReport report;
};

/// Audits `base` at every budget in `grid`. A fixed step_size in `base` is
/// kept; otherwise alpha scales with each eps.
inline std::vector<EpsilonPoint> epsilon_sweep(Pipeline& pipeline, const attacks::AttackSpec& base,
                                               const std::vector<double>& grid, const data::Dataset& data,
                                               const AuditOptions& opts = {}) {
  validate_epsilon_grid(grid);
  std::vector<EpsilonPoint> out;
  for (double eps : grid) {
    auto s = base;
    s.budget.eps = eps;
    s.validate();
    out.push_back({eps, audit(pipeline, s, data, opts)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Category holdout

struct HoldoutResult {
  AuditReport seen;      // test examples from the classes the trojan trained on
  AuditReport held_out;  // test examples from classes it never saw
  training::TrojanTrainResult training;
};

/// Trains the pipeline's trojan only on training examples outside `holdout`,
/// then audits the test split separately on seen and held-out classes.
inline HoldoutResult category_holdout(Pipeline& pipeline, const data::Dataset& train, const data::Dataset& test,
                                      const std::set<int64_t>& holdout, const training::TrojanTrainConfig& cfg,
                                      const attacks::AttackSpec& spec, const AuditOptions& opts = {},
                                      const training::EpochCallback& on_epoch = {}) {
  auto [train_seen, train_held] = data::class_split(train, holdout);
  auto [test_seen, test_held] = data::class_split(test, holdout);
  (void)train_held;
  HoldoutResult r;
  r.training = training::train_trojan(pipeline, train_seen, cfg, nullptr, on_epoch);
  r.seen = audit(pipeline, spec, test_seen, opts);
  r.held_out = audit(pipeline, spec, test_held, opts);
  return r;
}

}  // namespace atattack::evaluation

#endif  // ATATTACK_EVALUATION_STUDIES_HPP
