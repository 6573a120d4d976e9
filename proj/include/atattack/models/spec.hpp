#ifndef ATATTACK_MODELS_SPEC_HPP
#define ATATTACK_MODELS_SPEC_HPP

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atattack/core/types.hpp"

namespace atattack::models {

using nlohmann::json;

enum class TargetArch { cnn_small, resnet18, vgg9, alexnet, mlp };

inline std::string to_string(TargetArch a) {
  switch (a) {
    case TargetArch::cnn_small: return "cnn_small";
    case TargetArch::resnet18: return "resnet18";
    case TargetArch::vgg9: return "vgg9";
    case TargetArch::alexnet: return "alexnet";
    case TargetArch::mlp: return "mlp";
  }
  return "?";
}

inline TargetArch target_arch_from_string(const std::string& s) {
  if (s == "cnn_small") return TargetArch::cnn_small;
  if (s == "resnet18") return TargetArch::resnet18;
  if (s == "vgg9") return TargetArch::vgg9;
  if (s == "alexnet") return TargetArch::alexnet;
  if (s == "mlp") return TargetArch::mlp;
  throw ConfigError("unknown target architecture '" + s + "'");
}

enum class Activation { relu, tanh };

/// Target classifier description. `hidden`, `activation` and `bias` only
/// apply to the mlp architecture.
struct TargetSpec {
  TargetArch arch = TargetArch::cnn_small;
  ImageShape input{1, 28, 28};
  int64_t num_classes = 10;
  std::vector<int64_t> hidden;
  Activation activation = Activation::relu;
  bool bias = true;

  bool operator==(const TargetSpec&) const = default;
};

/// U-net trojan description; 1.0 is ATNet, 0.5 is ATNet-small.
struct ATNetSpec {
  ImageShape input{1, 28, 28};
  double width_multiplier = 1.0;

  bool operator==(const ATNetSpec&) const = default;

  std::string arch() const { return width_multiplier == 1.0 ? "atnet" : width_multiplier == 0.5 ? "atnet_small" : "atnet_custom"; }
};

inline json shape_to_json(const ImageShape& s) { return json::array({s.channels, s.height, s.width}); }

inline ImageShape shape_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("image shape must be [channels, height, width]");
  ImageShape s{j[0].get<int64_t>(), j[1].get<int64_t>(), j[2].get<int64_t>()};
  if (s.channels < 1 || s.height < 1 || s.width < 1) throw ConfigError("image shape entries must be positive");
  return s;
}

inline json to_json(const TargetSpec& s) {
  json j{{"arch", to_string(s.arch)}, {"input", shape_to_json(s.input)}, {"num_classes", s.num_classes}};
  if (s.arch == TargetArch::mlp) {
    j["hidden"] = s.hidden;
    j["activation"] = s.activation == Activation::relu ? "relu" : "tanh";
    j["bias"] = s.bias;
  }
  return j;
}

inline TargetSpec target_spec_from_json(const json& j) {
  TargetSpec s;
  s.arch = target_arch_from_string(j.at("arch").get<std::string>());
  s.input = shape_from_json(j.at("input"));
  s.num_classes = j.value("num_classes", int64_t{10});
  if (s.arch == TargetArch::mlp) {
    s.hidden = j.value("hidden", std::vector<int64_t>{});
    auto act = j.value("activation", std::string{"relu"});
    if (act != "relu" && act != "tanh") throw ConfigError("mlp activation must be relu or tanh");
    s.activation = act == "relu" ? Activation::relu : Activation::tanh;
    s.bias = j.value("bias", true);
  }
  return s;
}

inline json to_json(const ATNetSpec& s) {
  return json{{"arch", s.arch()}, {"input", shape_to_json(s.input)}, {"width_multiplier", s.width_multiplier}};
}

inline ATNetSpec atnet_spec_from_json(const json& j) {
  ATNetSpec s;
  s.input = shape_from_json(j.at("input"));
  auto arch = j.value("arch", std::string{"atnet"});
  double dflt = arch == "atnet_small" ? 0.5 : 1.0;
  s.width_multiplier = j.value("width_multiplier", dflt);
  if (!(s.width_multiplier > 0.0)) throw ConfigError("width_multiplier must be > 0");
  return s;
}

}  // namespace atattack::models

#endif  // ATATTACK_MODELS_SPEC_HPP
