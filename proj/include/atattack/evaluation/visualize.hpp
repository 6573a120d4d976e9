#ifndef ATATTACK_EVALUATION_VISUALIZE_HPP
#define ATATTACK_EVALUATION_VISUALIZE_HPP

#include <filesystem>

#include "atattack/attacks/attack.hpp"
#include "atattack/data/dataset.hpp"
#include "atattack/evaluation/image.hpp"

namespace atattack::evaluation {

/// The four columns of an example grid plus how much G changed each input.
struct ExampleDump {
  torch::Tensor clean;
  torch::Tensor adversarial;
  torch::Tensor g_clean;
  torch::Tensor g_adversarial;
  double mean_abs_change_clean = 0.0;
  double mean_abs_change_adversarial = 0.0;
  int64_t width = 0;
  int64_t height = 0;
};

inline constexpr int64_t kGridPad = 2;

/// Pixel size of an n-row grid of (H,W) images.
inline std::pair<int64_t, int64_t> grid_size(int64_t n, int64_t h, int64_t w) {
  return {4 * w + 5 * kGridPad, n * h + (n + 1) * kGridPad};
}

/// Crafts `n` examples (the first n of `data`) and writes a PNG whose rows are
/// clean | adversarial | G(clean) | G(adversarial). G is applied with its switch on.
inline ExampleDump dump_examples(Pipeline& pipeline, const attacks::AttackSpec& spec, const data::Dataset& data,
                                 int64_t n, const std::filesystem::path& out_path) {
  if (n < 1) throw ConfigError("dump_examples needs n >= 1");
  if (n > data.size()) throw ConfigError("dump_examples asked for more examples than available");
  if (data.shape() != pipeline.input_shape()) throw ShapeError("dataset does not fit the pipeline input");
  EvalModeGuard eval(pipeline);
  auto x = data.batch(0, n);
  auto crafted = attacks::run_attack(spec, pipeline, x, data.keys(0, n));
  ExampleDump d;
  d.clean = x.pixels;
  d.adversarial = crafted.result.adversarial.pixels;
  {
    torch::NoGradGuard no_grad;
    SwitchGuard on(pipeline.trojan(), true);
    d.g_clean = pipeline.trojan().forward(d.clean);
    d.g_adversarial = pipeline.trojan().forward(d.adversarial);
  }
  d.mean_abs_change_clean = (d.g_clean - d.clean).abs().mean().item<double>();
  d.mean_abs_change_adversarial = (d.g_adversarial - d.adversarial).abs().mean().item<double>();

  const auto h = x.pixels.size(2), w = x.pixels.size(3);
  std::tie(d.width, d.height) = grid_size(n, h, w);
  Raster grid(d.width, d.height, {40, 40, 40});
  const torch::Tensor* cols[4] = {&d.clean, &d.adversarial, &d.g_clean, &d.g_adversarial};
  for (int64_t i = 0; i < n; ++i)
    for (int64_t c = 0; c < 4; ++c) grid.paste((*cols[c])[i], kGridPad + c * (w + kGridPad), kGridPad + i * (h + kGridPad));
  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  write_png(out_path, grid);
  return d;
}

}  // namespace atattack::evaluation

#endif  // ATATTACK_EVALUATION_VISUALIZE_HPP
