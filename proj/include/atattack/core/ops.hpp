#ifndef ATATTACK_CORE_OPS_HPP
#define ATATTACK_CORE_OPS_HPP

#include <functional>
#include <limits>

#include <torch/torch.h>

#include "atattack/core/types.hpp"

namespace atattack {

namespace detail {

/// True where a - b > eps holds in exact arithmetic, for float64 a >= b >= 0.
/// The rounded difference decides unless it lands on eps, where the sign of
/// its rounding error does.
inline torch::Tensor difference_exceeds(const torch::Tensor& a, const torch::Tensor& b, double eps) {
  auto d = a - b;
  auto err = (a - d) - b;  // exact residual (a - b) - d, since a >= b
  return (d > eps) | ((d == eps) & (err > 0));
}

}  // namespace detail

/// Clamps `perturbed` into [max(0, orig-eps), min(1, orig+eps)] elementwise.
///
/// Bounds are formed in float64, rounded back to the tensor's dtype, and then
/// moved by one ulp to the outermost representable value whose distance from
/// orig is at most eps. The comparison is exact, so |out - orig| <= eps holds
/// for eps as a real number in every dtype, and no feasible input is moved.
inline torch::Tensor clip_perturbed(const torch::Tensor& orig, const torch::Tensor& perturbed, double eps) {
  TORCH_CHECK(orig.sizes() == perturbed.sizes(), "clip_perturbed: shape mismatch ", orig.sizes(), " vs ",
              perturbed.sizes());
  TORCH_CHECK(eps >= 0.0, "clip_perturbed: eps must be >= 0");
  const auto dtype = orig.scalar_type();
  const auto inf = std::numeric_limits<double>::infinity();
  auto wide = orig.to(torch::kFloat64);
  auto hi = (wide + eps).to(dtype);
  auto lo = (wide - eps).to(dtype);
  auto hi_down = torch::nextafter(hi, torch::full_like(hi, -inf));
  auto hi_up = torch::nextafter(hi, torch::full_like(hi, inf));
  auto lo_down = torch::nextafter(lo, torch::full_like(lo, -inf));
  auto lo_up = torch::nextafter(lo, torch::full_like(lo, inf));
  hi = torch::where(detail::difference_exceeds(hi.to(torch::kFloat64), wide, eps), hi_down,
                    torch::where(detail::difference_exceeds(hi_up.to(torch::kFloat64), wide, eps), hi, hi_up));
  lo = torch::where(detail::difference_exceeds(wide, lo.to(torch::kFloat64), eps), lo_up,
                    torch::where(detail::difference_exceeds(wide, lo_down.to(torch::kFloat64), eps), lo, lo_down));
  hi = hi.clamp_max(1.0);
  lo = lo.clamp_min(0.0);
  return torch::minimum(torch::maximum(perturbed, lo), hi);
}

inline ImageBatch clip_perturbed(const ImageBatch& orig, const torch::Tensor& perturbed, double eps) {
  return {clip_perturbed(orig.pixels, perturbed, eps), orig.labels};
}

/// Elementwise sign with Sign(0) = 0.
inline torch::Tensor sign(const torch::Tensor& t) { return torch::sign(t); }

/// Gradient of a scalar loss with respect to the input pixels.
///
/// Runs with grad mode forced on and touches no parameter `.grad` fields, so it
/// is safe to call on frozen or shared models.
inline torch::Tensor input_gradient(const std::function<torch::Tensor(const torch::Tensor&)>& loss,
                                    const torch::Tensor& x) {
  torch::AutoGradMode enable(true);
  auto leaf = x.detach().requires_grad_(true);
  auto value = loss(leaf);
  return torch::autograd::grad({value}, {leaf}, /*grad_outputs=*/{}, /*retain_graph=*/false,
                               /*create_graph=*/false, /*allow_unused=*/true)[0]
      .detach();
}

/// Mean cross-entropy over the batch.
inline torch::Tensor cross_entropy(const torch::Tensor& logits, const torch::Tensor& labels) {
  return torch::nn::functional::cross_entropy(logits, labels);
}

/// Mean over the batch of the squared l2 distance between logit rows.
inline torch::Tensor squared_logit_distance(const torch::Tensor& a, const torch::Tensor& b) {
  return (a - b).pow(2).sum(1).mean();
}

/// Per-example l-infinity and l2 norms over flattened image dimensions.
inline torch::Tensor per_example_linf(const torch::Tensor& delta) {
  return delta.flatten(1).abs().amax(1);
}
inline torch::Tensor per_example_l2(const torch::Tensor& delta) {
  return delta.flatten(1).pow(2).sum(1).sqrt();
}

}  // namespace atattack

#endif  // ATATTACK_CORE_OPS_HPP
