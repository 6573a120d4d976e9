#ifndef ATATTACK_EVALUATION_SURFACE_HPP
#define ATATTACK_EVALUATION_SURFACE_HPP

#include <cmath>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "atattack/core/ops.hpp"
#include "atattack/core/pipeline.hpp"

namespace atattack::evaluation {

struct LossSurfaceOptions {
  double span = 0.02;
  int64_t steps = 41;  // odd, so the grid contains the unperturbed input
  uint64_t seed = 0;

  void validate() const {
    if (!(span > 0.0) || !std::isfinite(span)) throw ConfigError("loss surface span must be > 0");
    if (steps < 3 || steps % 2 == 0) throw ConfigError("loss surface steps must be odd and >= 3");
  }

  /// Grid coefficients, exactly 0 at the centre and +/-span at the ends.
  std::vector<double> coefficients() const {
    std::vector<double> c(static_cast<size_t>(steps));
    const int64_t half = (steps - 1) / 2;
    for (int64_t i = 0; i < steps; ++i) c[static_cast<size_t>(i)] = span * static_cast<double>(i - half) / static_cast<double>(half);
    return c;
  }
};

/// CE losses of one example over x + a*d_a + r*d_r (pixels clamped to [0,1]).
/// loss[i][j] belongs to a = coeffs[i], r = coeffs[j].
struct LossSurfaceGrid {
  bool switched_on = false;
  bool degenerate_gradient = false;  // d_a fell back to a random sign direction
  std::vector<double> coeffs;
  torch::Tensor d_a;
  torch::Tensor d_r;
  torch::Tensor loss;  // float64 (steps, steps)

  double center() const {
    const auto c = static_cast<int64_t>(coeffs.size() / 2);
    return loss[c][c].item<double>();
  }

  /// Mean absolute second difference along the gradient axis.
  double ruggedness() const {
    auto d2 = loss.slice(0, 2) - 2.0 * loss.slice(0, 1, -1) + loss.slice(0, 0, -2);
    return d2.abs().mean().item<double>();
  }
};

namespace detail {

inline torch::Tensor random_sign_direction(const std::vector<int64_t>& sizes, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  int64_t n = 1;
  for (auto s : sizes) n *= s;
  std::vector<float> v(static_cast<size_t>(n));
  for (auto& e : v) {
    double z = 0.0;
    while (z == 0.0) z = normal(rng);
    e = z > 0.0 ? 1.0f : -1.0f;
  }
  return torch::tensor(v).reshape(sizes);
}

}  // namespace detail

/// Probes CE(pipeline(x'), label) around a single (C,H,W) example with the
/// trojan in the requested state. d_a is the sign of the input gradient in
/// that state; d_r is the sign of a seeded standard-normal draw. If the
/// gradient vanishes entirely, d_a becomes a second random sign direction and
/// `degenerate_gradient` is set.
inline LossSurfaceGrid loss_surface(Pipeline& pipeline, const torch::Tensor& x, int64_t label, bool switch_on,
                                    const LossSurfaceOptions& opts = {}) {
  opts.validate();
  if (x.dim() != 3 || ImageShape::of(x.unsqueeze(0)) != pipeline.input_shape())
    throw ShapeError("loss surface input must be one (C,H,W) image of the pipeline's input shape");
  EvalModeGuard eval(pipeline);
  SwitchGuard sw(pipeline.trojan(), switch_on);
  auto img = x.detach().to(torch::kFloat32).unsqueeze(0);
  auto lbl = torch::tensor({label}, torch::kInt64);

  LossSurfaceGrid g;
  g.switched_on = switch_on;
  g.coeffs = opts.coefficients();
  std::mt19937_64 rng(opts.seed);
  const auto sizes = x.sizes().vec();
  g.d_r = detail::random_sign_direction(sizes, rng);
  auto grad = input_gradient([&](const torch::Tensor& p) { return cross_entropy(pipeline.forward(p), lbl); }, img)[0];
  g.d_a = atattack::sign(grad);
  if (g.d_a.abs().sum().item<double>() == 0.0) {
    g.degenerate_gradient = true;
    g.d_a = detail::random_sign_direction(sizes, rng);
  }

  const auto n = opts.steps;
  auto coeffs = torch::tensor(g.coeffs, torch::kFloat64).to(torch::kFloat32);
  g.loss = torch::empty({n, n}, torch::kFloat64);
  torch::NoGradGuard no_grad;
  for (int64_t i = 0; i < n; ++i) {
    // One row: fixed a, every r.
    auto row = img + (coeffs[i] * g.d_a).unsqueeze(0) + coeffs.view({n, 1, 1, 1}) * g.d_r.unsqueeze(0);
    row = row.clamp(0.0, 1.0);
    auto ce = torch::nn::functional::cross_entropy(
        pipeline.forward(row), lbl.expand({n}),
        torch::nn::functional::CrossEntropyFuncOptions().reduction(torch::kNone));
    g.loss[i].copy_(ce.to(torch::kFloat64));
  }
  return g;
}

/// The surface in both switch states, sharing the random axis.
struct LossSurfacePair {
  LossSurfaceGrid on;
  LossSurfaceGrid off;
};

inline LossSurfacePair loss_surface_pair(Pipeline& pipeline, const torch::Tensor& x, int64_t label,
                                         const LossSurfaceOptions& opts = {}) {
  return {loss_surface(pipeline, x, label, true, opts), loss_surface(pipeline, x, label, false, opts)};
}

inline nlohmann::json to_json(const LossSurfaceGrid& g) {
  auto l = g.loss.contiguous();
  auto a = l.accessor<double, 2>();
  nlohmann::json rows = nlohmann::json::array();
  for (int64_t i = 0; i < l.size(0); ++i) {
    std::vector<double> r(static_cast<size_t>(l.size(1)));
    for (int64_t j = 0; j < l.size(1); ++j) r[static_cast<size_t>(j)] = a[i][j];
    rows.push_back(r);
  }
  return {{"switched_on", g.switched_on},
          {"degenerate_gradient", g.degenerate_gradient},
          {"coefficients", g.coeffs},
          {"center_loss", g.center()},
          {"ruggedness", g.ruggedness()},
          {"loss", rows}};
}

}  // namespace atattack::evaluation

#endif  // ATATTACK_EVALUATION_SURFACE_HPP
