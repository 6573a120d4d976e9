#ifndef ATATTACK_ATTACKS_PROJECTION_HPP
#define ATATTACK_ATTACKS_PROJECTION_HPP

#include <torch/torch.h>

#include "atattack/core/error.hpp"

namespace atattack::attacks {

/// Concealment-loss gradient `g_h` and attack-loss gradient `g_b`, both with
/// respect to the perturbation, batch-first and of identical shape.
struct GradientPair {
  torch::Tensor g_h;
  torch::Tensor g_b;
};

struct ProjectedGradients {
  torch::Tensor parallel;       ///< component of g_b along g_h
  torch::Tensor perpendicular;  ///< g_b - parallel
  torch::Tensor degenerate;     ///< bool (N): ||g_h|| below tolerance, parallel forced to 0
};

/// Below this per-example norm of g_h the concealment direction is undefined.
inline constexpr double kDegenerateGradientNorm = 1e-12;

/// Splits g_b into parts parallel and perpendicular to g_h, independently for
/// each example over its flattened image dimensions:
///   parallel = g_h * <g_h, g_b> / ||g_h||^2,   perpendicular = g_b - parallel.
inline ProjectedGradients project_gradients(const GradientPair& g) {
  if (!g.g_h.defined() || !g.g_b.defined() || g.g_h.sizes() != g.g_b.sizes() || g.g_h.dim() < 1)
    throw ShapeError("project_gradients: g_h and g_b must share a batch-first shape");
  const auto n = g.g_h.size(0);
  auto h = g.g_h.reshape({n, -1});
  auto b = g.g_b.reshape({n, -1});
  auto norm2 = (h * h).sum(1);
  auto degenerate = norm2.sqrt() < kDegenerateGradientNorm;
  auto coef = torch::where(degenerate, torch::zeros_like(norm2), (h * b).sum(1) / torch::where(degenerate, torch::ones_like(norm2), norm2));
  auto parallel = (h * coef.unsqueeze(1)).reshape(g.g_b.sizes());
  return {parallel, g.g_b - parallel, degenerate};
}

}  // namespace atattack::attacks

#endif  // ATATTACK_ATTACKS_PROJECTION_HPP
