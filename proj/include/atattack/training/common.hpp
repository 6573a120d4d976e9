#ifndef ATATTACK_TRAINING_COMMON_HPP
#define ATATTACK_TRAINING_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "atattack/attacks/targets.hpp"
#include "atattack/core/types.hpp"

namespace atattack::training {

using nlohmann::json;

/// Called once per finished epoch with that epoch's log record.
using EpochCallback = std::function<void(const json&)>;

/// Linear interpolation from `start` (first epoch) to `end` (last epoch).
inline double linear_schedule(double start, double end, int epoch, int epochs) {
  if (epochs <= 1) return start;
  return start + (end - start) * static_cast<double>(epoch) / static_cast<double>(epochs - 1);
}

inline void set_learning_rate(torch::optim::Optimizer& opt, double lr) {
  for (auto& group : opt.param_groups()) group.options().set_lr(lr);
}

/// Per-epoch seed derived from a run seed.
inline uint64_t epoch_seed(uint64_t seed, int epoch) {
  return attacks::detail::splitmix64(seed ^ (0x5851f42d4c957f2dULL * static_cast<uint64_t>(epoch + 1)));
}

inline void check_finite(double value, const std::string& what) {
  if (!std::isfinite(value)) throw TrainingError("non-finite " + what + " (" + std::to_string(value) + ")");
}

/// Random crop after 4-pixel zero padding plus random horizontal flip, drawn
/// from `rng` so augmentation is reproducible.
inline torch::Tensor augment_crop_flip(const torch::Tensor& pixels, std::mt19937_64& rng, int64_t pad = 4) {
  const auto n = pixels.size(0), h = pixels.size(2), w = pixels.size(3);
  auto padded = torch::constant_pad_nd(pixels, {pad, pad, pad, pad}, 0.0);
  std::uniform_int_distribution<int64_t> offset(0, 2 * pad);
  std::bernoulli_distribution flip(0.5);
  std::vector<torch::Tensor> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const auto dy = offset(rng), dx = offset(rng);
    auto crop = padded[i].slice(1, dy, dy + h).slice(2, dx, dx + w);
    if (flip(rng)) crop = crop.flip({2});
    out.push_back(crop);
  }
  return torch::stack(out);
}

}  // namespace atattack::training

#endif  // ATATTACK_TRAINING_COMMON_HPP
