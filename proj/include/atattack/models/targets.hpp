#ifndef ATATTACK_MODELS_TARGETS_HPP
#define ATATTACK_MODELS_TARGETS_HPP

#include <string>
#include <vector>

#include <torch/torch.h>

#include "atattack/core/model.hpp"
#include "atattack/models/spec.hpp"

namespace atattack::models {

namespace nn = torch::nn;

inline nn::Conv2dOptions conv3x3(int64_t in, int64_t out, int64_t stride = 1, bool bias = true, int64_t padding = 1) {
  return nn::Conv2dOptions(in, out, 3).stride(stride).padding(padding).bias(bias);
}

/// Base for the concrete targets: stores the spec and answers the metadata
/// queries of the Classifier interface.
class SpecClassifier : public Classifier {
 public:
  explicit SpecClassifier(TargetSpec spec) : spec_(std::move(spec)) {}
  int64_t num_classes() const override { return spec_.num_classes; }
  ImageShape input_shape() const override { return spec_.input; }
  std::string arch() const override { return to_string(spec_.arch); }
  const TargetSpec& spec() const { return spec_; }

 private:
  TargetSpec spec_;
};

// Four unpadded 3x3 ReLU convolutions (32,32,pool,64,64,pool), two 200-unit
// ReLU FC layers and a linear read-out to the class logits.
class CnnSmall : public SpecClassifier {
 public:
  explicit CnnSmall(const TargetSpec& spec) : SpecClassifier(spec) {
    auto after = [](int64_t d) { return ((d - 4) / 2 - 4) / 2; };
    const int64_t h = after(spec.input.height);
    const int64_t w = after(spec.input.width);
    if (h < 1 || w < 1) throw ShapeError("cnn_small needs inputs of at least 14x14, got " + spec.input.str());
    features_ = register_module("features", nn::Sequential(
        nn::Conv2d(conv3x3(spec.input.channels, 32, 1, true, 0)), nn::ReLU(),
        nn::Conv2d(conv3x3(32, 32, 1, true, 0)), nn::ReLU(),
        nn::MaxPool2d(2),
        nn::Conv2d(conv3x3(32, 64, 1, true, 0)), nn::ReLU(),
        nn::Conv2d(conv3x3(64, 64, 1, true, 0)), nn::ReLU(),
        nn::MaxPool2d(2)));
    classifier_ = register_module("classifier", nn::Sequential(
        nn::Linear(64 * h * w, 200), nn::ReLU(),
        nn::Linear(200, 200), nn::ReLU(),
        nn::Linear(200, spec.num_classes)));
  }

  torch::Tensor forward(const torch::Tensor& x) override { return classifier_->forward(features_->forward(x).flatten(1)); }

 private:
  nn::Sequential features_{nullptr};
  nn::Sequential classifier_{nullptr};
};

class BasicBlock : public nn::Module {
 public:
  BasicBlock(int64_t in, int64_t out, int64_t stride) {
    conv1_ = register_module("conv1", nn::Conv2d(conv3x3(in, out, stride, false)));
    bn1_ = register_module("bn1", nn::BatchNorm2d(out));
    conv2_ = register_module("conv2", nn::Conv2d(conv3x3(out, out, 1, false)));
    bn2_ = register_module("bn2", nn::BatchNorm2d(out));
    if (stride != 1 || in != out) {
      shortcut_ = register_module("shortcut", nn::Sequential(
          nn::Conv2d(nn::Conv2dOptions(in, out, 1).stride(stride).bias(false)), nn::BatchNorm2d(out)));
    }
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto y = torch::relu(bn1_->forward(conv1_->forward(x)));
    y = bn2_->forward(conv2_->forward(y));
    return torch::relu(y + (shortcut_ ? shortcut_->forward(x) : x));
  }

 private:
  nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
  nn::BatchNorm2d bn1_{nullptr}, bn2_{nullptr};
  nn::Sequential shortcut_{nullptr};
};

/// ResNet-18 with the 7x7/stride-2 stem and stem pooling replaced by a single
/// 3x3/stride-1 convolution for 32x32 inputs.
class ResNet18 : public SpecClassifier {
 public:
  explicit ResNet18(const TargetSpec& spec) : SpecClassifier(spec) {
    if (spec.input.height < 8 || spec.input.width < 8) throw ShapeError("resnet18 needs inputs of at least 8x8");
    stem_ = register_module("stem", nn::Conv2d(conv3x3(spec.input.channels, 64, 1, false)));
    bn_ = register_module("bn", nn::BatchNorm2d(64));
    int64_t in = 64;
    int index = 0;
    for (int stage = 0; stage < 4; ++stage) {
      const int64_t out = int64_t{64} << stage;
      for (int b = 0; b < 2; ++b) {
        auto block = std::make_shared<BasicBlock>(in, out, (b == 0 && stage > 0) ? 2 : 1);
        blocks_.push_back(register_module("block" + std::to_string(index++), block));
        in = out;
      }
    }
    fc_ = register_module("fc", nn::Linear(in, spec.num_classes));
  }

  torch::Tensor forward(const torch::Tensor& x) override {
    auto y = torch::relu(bn_->forward(stem_->forward(x)));
    for (auto& b : blocks_) y = b->forward(y);
    return fc_->forward(torch::adaptive_avg_pool2d(y, {1, 1}).flatten(1));
  }

 private:
  nn::Conv2d stem_{nullptr};
  nn::BatchNorm2d bn_{nullptr};
  std::vector<std::shared_ptr<BasicBlock>> blocks_;
  nn::Linear fc_{nullptr};
};

/// Six conv-BN-ReLU layers (64, M, 128, M, 256, 256, M, 512, 512, M), global
/// average pooling, then three FC layers: nine weight layers in total.
class Vgg9 : public SpecClassifier {
 public:
  explicit Vgg9(const TargetSpec& spec) : SpecClassifier(spec) {
    if (spec.input.height < 16 || spec.input.width < 16) throw ShapeError("vgg9 needs inputs of at least 16x16");
    nn::Sequential f;
    int64_t in = spec.input.channels;
    for (int64_t v : {64, -1, 128, -1, 256, 256, -1, 512, 512, -1}) {
      if (v < 0) {
        f->push_back(nn::MaxPool2d(2));
        continue;
      }
      f->push_back(nn::Conv2d(conv3x3(in, v, 1, false)));
      f->push_back(nn::BatchNorm2d(v));
      f->push_back(nn::ReLU());
      in = v;
    }
    features_ = register_module("features", f);
    classifier_ = register_module("classifier", nn::Sequential(
        nn::Linear(512, 512), nn::ReLU(),
        nn::Linear(512, 512), nn::ReLU(),
        nn::Linear(512, spec.num_classes)));
  }

  torch::Tensor forward(const torch::Tensor& x) override {
    auto y = torch::adaptive_avg_pool2d(features_->forward(x), {1, 1}).flatten(1);
    return classifier_->forward(y);
  }

 private:
  nn::Sequential features_{nullptr};
  nn::Sequential classifier_{nullptr};
};

/// AlexNet with the 11x11/stride-4 stem reduced to 3x3/stride-1 and global
/// average pooling in front of the FC head.
class AlexNet : public SpecClassifier {
 public:
  explicit AlexNet(const TargetSpec& spec) : SpecClassifier(spec) {
    if (spec.input.height < 8 || spec.input.width < 8) throw ShapeError("alexnet needs inputs of at least 8x8");
    features_ = register_module("features", nn::Sequential(
        nn::Conv2d(conv3x3(spec.input.channels, 64)), nn::ReLU(), nn::MaxPool2d(2),
        nn::Conv2d(nn::Conv2dOptions(64, 192, 5).padding(2)), nn::ReLU(), nn::MaxPool2d(2),
        nn::Conv2d(conv3x3(192, 384)), nn::ReLU(),
        nn::Conv2d(conv3x3(384, 256)), nn::ReLU(),
        nn::Conv2d(conv3x3(256, 256)), nn::ReLU(), nn::MaxPool2d(2)));
    classifier_ = register_module("classifier", nn::Sequential(
        nn::Dropout(0.5), nn::Linear(256, 4096), nn::ReLU(),
        nn::Dropout(0.5), nn::Linear(4096, 4096), nn::ReLU(),
        nn::Linear(4096, spec.num_classes)));
  }

  torch::Tensor forward(const torch::Tensor& x) override {
    auto y = torch::adaptive_avg_pool2d(features_->forward(x), {1, 1}).flatten(1);
    return classifier_->forward(y);
  }

 private:
  nn::Sequential features_{nullptr};
  nn::Sequential classifier_{nullptr};
};

/// Fully connected network on flattened pixels; no hidden layers gives the
/// linear model logits = W x (+ b).
class Mlp : public SpecClassifier {
 public:
  explicit Mlp(const TargetSpec& spec) : SpecClassifier(spec) {
    int64_t in = spec.input.numel();
    for (int64_t h : spec.hidden) {
      layers_->push_back(nn::Linear(nn::LinearOptions(in, h).bias(spec.bias)));
      if (spec.activation == Activation::relu)
        layers_->push_back(nn::ReLU());
      else
        layers_->push_back(nn::Tanh());
      in = h;
    }
    layers_->push_back(nn::Linear(nn::LinearOptions(in, spec.num_classes).bias(spec.bias)));
    register_module("layers", layers_);
  }

  torch::Tensor forward(const torch::Tensor& x) override { return layers_->forward(x.flatten(1)); }

 private:
  nn::Sequential layers_;
};

}  // namespace atattack::models

#endif  // ATATTACK_MODELS_TARGETS_HPP
