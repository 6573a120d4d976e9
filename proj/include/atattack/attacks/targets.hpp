#ifndef ATATTACK_ATTACKS_TARGETS_HPP
#define ATATTACK_ATTACKS_TARGETS_HPP

#include <cstdint>
#include <random>

#include <torch/torch.h>

#include "atattack/core/types.hpp"

namespace atattack::attacks {

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Uniform target among the num_classes-1 wrong labels, one independent draw
/// per example. Each draw depends only on (seed, key), so an example keeps its
/// target no matter where it lands in a batch or how the data is shuffled.
inline TargetLabelAssignment sample_targets_keyed(const torch::Tensor& labels, const torch::Tensor& keys,
                                                  int64_t num_classes, uint64_t seed) {
  if (num_classes < 2) throw ConfigError("targeted sampling needs at least two classes");
  TORCH_CHECK(labels.sizes() == keys.sizes(), "sample_targets: labels and keys differ in shape");
  auto l = labels.to(torch::kInt64).contiguous();
  auto k = keys.to(torch::kInt64).contiguous();
  auto out = torch::empty_like(l);
  auto la = l.accessor<int64_t, 1>();
  auto ka = k.accessor<int64_t, 1>();
  auto oa = out.accessor<int64_t, 1>();
  for (int64_t i = 0; i < la.size(0); ++i) {
    if (la[i] < 0 || la[i] >= num_classes) throw ConfigError("label out of range in sample_targets");
    std::mt19937_64 rng(detail::splitmix64(seed ^ detail::splitmix64(static_cast<uint64_t>(ka[i]))));
    std::uniform_int_distribution<int64_t> pick(0, num_classes - 2);
    const int64_t r = pick(rng);
    oa[i] = r >= la[i] ? r + 1 : r;
  }
  return {out};
}

/// sample_targets_keyed with keys 0..n-1.
inline TargetLabelAssignment sample_targets(const torch::Tensor& labels, int64_t num_classes, uint64_t seed) {
  return sample_targets_keyed(labels, torch::arange(labels.size(0), torch::kInt64), num_classes, seed);
}

}  // namespace atattack::attacks

#endif  // ATATTACK_ATTACKS_TARGETS_HPP
