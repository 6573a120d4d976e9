#ifndef ATATTACK_MODELS_FACTORY_HPP
#define ATATTACK_MODELS_FACTORY_HPP

#include <cstdint>
#include <memory>

#include <torch/torch.h>

#include "atattack/core/hash.hpp"
#include "atattack/models/atnet.hpp"
#include "atattack/models/targets.hpp"

namespace atattack::models {

/// Untrained target classifier, deterministically initialised from `seed`.
inline ClassifierPtr build_target(const TargetSpec& spec, uint64_t seed) {
  if (spec.num_classes < 2) throw ConfigError("target needs at least two classes");
  torch::manual_seed(seed);
  switch (spec.arch) {
    case TargetArch::cnn_small: return std::make_shared<CnnSmall>(spec);
    case TargetArch::resnet18: return std::make_shared<ResNet18>(spec);
    case TargetArch::vgg9: return std::make_shared<Vgg9>(spec);
    case TargetArch::alexnet: return std::make_shared<AlexNet>(spec);
    case TargetArch::mlp: return std::make_shared<Mlp>(spec);
  }
  throw ConfigError("unsupported target architecture");
}

/// Untrained trojan with its switch off.
inline std::shared_ptr<ATNet> build_atnet(const ATNetSpec& spec, uint64_t seed) {
  if (!(spec.width_multiplier > 0.0)) throw ConfigError("width_multiplier must be > 0");
  torch::manual_seed(seed);
  auto g = std::make_shared<ATNet>(spec);
  g->set_switch(false);
  return g;
}

inline int64_t count_parameters(const torch::nn::Module& m) {
  int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.numel();
  return n;
}

/// SHA-256 over every named parameter and buffer (name, dtype, shape, bytes).
inline std::string parameter_hash(const torch::nn::Module& m) {
  Sha256 h;
  auto feed = [&h](const std::string& name, const torch::Tensor& t) {
    auto c = t.detach().to(torch::kCPU).contiguous();
    h.update(name);
    h.update(std::string(c.dtype().name()));
    for (auto s : c.sizes()) h.update(&s, sizeof s);
    h.update(c.data_ptr(), c.numel() * c.element_size());
  };
  for (const auto& p : m.named_parameters()) feed(p.key(), p.value());
  for (const auto& b : m.named_buffers()) feed(b.key(), b.value());
  return h.hex();
}

/// Detaches a module's parameters from optimisation; returns the previous flags.
inline std::vector<bool> freeze(torch::nn::Module& m) {
  std::vector<bool> previous;
  for (auto& p : m.parameters()) {
    previous.push_back(p.requires_grad());
    p.set_requires_grad(false);
  }
  return previous;
}

inline void unfreeze(torch::nn::Module& m, const std::vector<bool>& previous) {
  size_t i = 0;
  for (auto& p : m.parameters()) p.set_requires_grad(i < previous.size() ? previous[i++] : true);
}

}  // namespace atattack::models

#endif  // ATATTACK_MODELS_FACTORY_HPP
