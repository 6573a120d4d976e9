#ifndef ATATTACK_MODELS_ATNET_HPP
#define ATATTACK_MODELS_ATNET_HPP

#include <array>
#include <cmath>

#include <torch/torch.h>

#include "atattack/core/model.hpp"
#include "atattack/models/spec.hpp"

namespace atattack::models {

/// Two stacked 3x3 convolutions with ReLU.
class C2 : public torch::nn::Module {
 public:
  C2(int64_t in, int64_t out) {
    conv1_ = register_module("conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1)));
    conv2_ = register_module("conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(out, out, 3).padding(1)));
  }

  torch::Tensor forward(const torch::Tensor& x) {
    return torch::relu(conv2_->forward(torch::relu(conv1_->forward(x))));
  }

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
};

/// Encoder widths at multiplier 1.0; the bottleneck repeats the last one.
inline constexpr std::array<int64_t, 3> kATNetBaseWidths{64, 128, 256};

inline std::array<int64_t, 3> atnet_widths(double multiplier) {
  std::array<int64_t, 3> w{};
  for (size_t i = 0; i < w.size(); ++i)
    w[i] = std::max<int64_t>(1, static_cast<int64_t>(std::lround(kATNetBaseWidths[i] * multiplier)));
  return w;
}

/// U-net trojan: three max-pool downsampling stages of C2 blocks, a C2
/// bottleneck, and a mirrored decoder that bilinearly upsamples to each skip's
/// resolution before concatenating it. A zero-initialised 1x1 convolution maps
/// back to the input channels and its output is added to the input, so a fresh
/// network is the identity map.
class ATNet : public InputTransformer {
 public:
  explicit ATNet(const ATNetSpec& spec) : spec_(spec) {
    const auto& in = spec.input;
    if (in.height < 8 || in.width < 8)
      throw ShapeError("atnet needs at least 8x8 inputs for three downsampling stages, got " + in.str());
    const auto w = atnet_widths(spec.width_multiplier);
    enc0_ = register_module("enc0", std::make_shared<C2>(in.channels, w[0]));
    enc1_ = register_module("enc1", std::make_shared<C2>(w[0], w[1]));
    enc2_ = register_module("enc2", std::make_shared<C2>(w[1], w[2]));
    bottleneck_ = register_module("bottleneck", std::make_shared<C2>(w[2], w[2]));
    dec2_ = register_module("dec2", std::make_shared<C2>(w[2] + w[2], w[1]));
    dec1_ = register_module("dec1", std::make_shared<C2>(w[1] + w[1], w[0]));
    dec0_ = register_module("dec0", std::make_shared<C2>(w[0] + w[0], w[0]));
    head_ = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(w[0], in.channels, 1)));
    torch::NoGradGuard no_grad;
    head_->weight.zero_();
    head_->bias.zero_();
  }

  ImageShape image_shape() const override { return spec_.input; }
  std::string arch() const override { return spec_.arch(); }
  const ATNetSpec& spec() const { return spec_; }

 protected:
  torch::Tensor transform(const torch::Tensor& x) override {
    auto e0 = enc0_->forward(x);
    auto e1 = enc1_->forward(torch::max_pool2d(e0, 2));
    auto e2 = enc2_->forward(torch::max_pool2d(e1, 2));
    auto b = bottleneck_->forward(torch::max_pool2d(e2, 2));
    auto d2 = dec2_->forward(torch::cat({upsample_like(b, e2), e2}, 1));
    auto d1 = dec1_->forward(torch::cat({upsample_like(d2, e1), e1}, 1));
    auto d0 = dec0_->forward(torch::cat({upsample_like(d1, e0), e0}, 1));
    return x + head_->forward(d0);
  }

 private:
  static torch::Tensor upsample_like(const torch::Tensor& x, const torch::Tensor& ref) {
    namespace F = torch::nn::functional;
    return F::interpolate(x, F::InterpolateFuncOptions()
                                 .size(std::vector<int64_t>{ref.size(2), ref.size(3)})
                                 .mode(torch::kBilinear)
                                 .align_corners(false));
  }

  ATNetSpec spec_;
  std::shared_ptr<C2> enc0_, enc1_, enc2_, bottleneck_, dec2_, dec1_, dec0_;
  torch::nn::Conv2d head_{nullptr};
};

}  // namespace atattack::models

#endif  // ATATTACK_MODELS_ATNET_HPP
