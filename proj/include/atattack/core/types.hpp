#ifndef ATATTACK_CORE_TYPES_HPP
#define ATATTACK_CORE_TYPES_HPP

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>

#include <torch/torch.h>

#include "atattack/core/error.hpp"

namespace atattack {

/// Channels x height x width of a single image.
struct ImageShape {
  int64_t channels = 0;
  int64_t height = 0;
  int64_t width = 0;

  bool operator==(const ImageShape&) const = default;

  int64_t numel() const { return channels * height * width; }

  std::string str() const {
    std::ostringstream os;
    os << channels << "x" << height << "x" << width;
    return os.str();
  }

  static ImageShape of(const torch::Tensor& batch) {
    TORCH_CHECK(batch.dim() == 4, "expected an NCHW batch, got ", batch.sizes());
    return {batch.size(1), batch.size(2), batch.size(3)};
  }
};

/// Pixels in [0,1] with shape (N,C,H,W) and int64 labels of length N.
///
/// Construction through `make` checks both invariants; the raw aggregate is
/// left open so hot loops can assemble batches that are already known valid.
struct ImageBatch {
  torch::Tensor pixels;
  torch::Tensor labels;

  static ImageBatch make(torch::Tensor pixels, torch::Tensor labels) {
    ImageBatch b{std::move(pixels), std::move(labels)};
    b.validate();
    return b;
  }

  int64_t size() const { return pixels.size(0); }
  ImageShape shape() const { return ImageShape::of(pixels); }

  void validate() const {
    if (!pixels.defined() || pixels.dim() != 4) throw ShapeError("ImageBatch pixels must be NCHW");
    if (!labels.defined() || labels.dim() != 1 || labels.size(0) != pixels.size(0))
      throw ShapeError("ImageBatch labels length must equal the batch dimension");
    if (pixels.numel() > 0) {
      auto lo = pixels.min().item<double>();
      auto hi = pixels.max().item<double>();
      if (!(lo >= 0.0 && hi <= 1.0)) throw ConfigError("ImageBatch pixels must lie in [0,1]");
    }
  }

  ImageBatch slice(int64_t begin, int64_t end) const {
    return {pixels.slice(0, begin, end), labels.slice(0, begin, end)};
  }
};

/// Additive perturbation with the l-infinity budget it was crafted under.
struct Perturbation {
  torch::Tensor delta;
  double budget_eps = 0.0;

  /// Largest absolute entry, 0 for an empty tensor.
  double linf() const { return delta.numel() == 0 ? 0.0 : delta.abs().max().item<double>(); }
};

enum class AttackMode { untargeted, targeted };

/// Which concealment term C-BIM-K minimizes (C-FGSM always projects against
/// the cross-entropy gradient).
enum class ConcealmentLoss {
  squared_logits,  ///< ||F(x+d) - F(x)||^2
  cross_entropy,   ///< CE(F(x+d), l)
};

/// Label used by the concealment term when ground truth may be unavailable.
enum class ConcealmentLabel { ground_truth, predicted };

inline const char* to_string(AttackMode m) {
  return m == AttackMode::targeted ? "targeted" : "untargeted";
}
inline const char* to_string(ConcealmentLoss c) {
  return c == ConcealmentLoss::squared_logits ? "squared_logits" : "cross_entropy";
}
inline const char* to_string(ConcealmentLabel c) {
  return c == ConcealmentLabel::ground_truth ? "ground_truth" : "predicted";
}

/// Everything that constrains how a perturbation is crafted.
struct AttackBudget {
  double eps = 0.0;
  int steps = 1;
  /// Per-step size; unset means 2.5 * eps / steps.
  std::optional<double> step_size;
  AttackMode mode = AttackMode::untargeted;
  double lambda = 1.0;
  double c_h = 0.0;
  ConcealmentLoss concealment = ConcealmentLoss::squared_logits;
  ConcealmentLabel concealment_label = ConcealmentLabel::ground_truth;

  double alpha() const { return step_size.value_or(2.5 * eps / static_cast<double>(steps)); }

  // eps == 0 is accepted as the degenerate "no perturbation" budget.
  void validate() const {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw ConfigError("budget eps must be a finite value >= 0");
    if (steps < 1) throw ConfigError("budget steps must be >= 1");
    if (step_size && !(*step_size > 0.0)) throw ConfigError("budget step_size must be > 0");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("budget lambda must lie in [0,1]");
    if (!(c_h >= 0.0) || !std::isfinite(c_h)) throw ConfigError("budget c_h must be >= 0");
  }
};

/// Per-example target labels for targeted attacks; never equal to the truth.
struct TargetLabelAssignment {
  torch::Tensor target_labels;

  void validate_against(const torch::Tensor& labels) const {
    if (!target_labels.defined() || target_labels.sizes() != labels.sizes())
      throw ShapeError("target labels must have one entry per example");
    if (target_labels.eq(labels).any().item<bool>())
      throw ConfigError("target label equals ground truth for some example");
  }
};

}  // namespace atattack

#endif  // ATATTACK_CORE_TYPES_HPP
