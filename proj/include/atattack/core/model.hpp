#ifndef ATATTACK_CORE_MODEL_HPP
#define ATATTACK_CORE_MODEL_HPP

#include <memory>
#include <string>

#include <torch/torch.h>

#include "atattack/core/types.hpp"

namespace atattack {

/// The target network: maps an (N,C,H,W) pixel batch to (N,num_classes)
/// logits. Input gradients come from autograd through `forward`.
class Classifier : public torch::nn::Module {
 public:
  ~Classifier() override = default;

  virtual torch::Tensor forward(const torch::Tensor& pixels) = 0;
  virtual int64_t num_classes() const = 0;
  virtual ImageShape input_shape() const = 0;
  /// Architecture tag as written into checkpoint metadata.
  virtual std::string arch() const = 0;

  torch::Tensor predict(const torch::Tensor& pixels) {
    torch::NoGradGuard no_grad;
    return forward(pixels).argmax(1);
  }
};

using ClassifierPtr = std::shared_ptr<Classifier>;

/// An image-to-image network placed in front of a classifier, with an on/off
/// switch. Off means the input tensor itself is returned.
class InputTransformer : public torch::nn::Module {
 public:
  ~InputTransformer() override = default;

  torch::Tensor forward(const torch::Tensor& pixels) {
    if (!switched_on_) return pixels;
    return transform(pixels).clamp(0.0, 1.0);
  }

  bool switched_on() const { return switched_on_; }
  void set_switch(bool on) { switched_on_ = on; }

  virtual ImageShape image_shape() const = 0;
  virtual std::string arch() const = 0;

 protected:
  /// Raw transform before range clamping.
  virtual torch::Tensor transform(const torch::Tensor& pixels) = 0;

 private:
  bool switched_on_ = false;
};

using TransformerPtr = std::shared_ptr<InputTransformer>;

/// G(x) = x. Stands in for "no trojan" and anchors the identity checks.
class IdentityTransformer : public InputTransformer {
 public:
  explicit IdentityTransformer(ImageShape shape) : shape_(shape) {}

  ImageShape image_shape() const override { return shape_; }
  std::string arch() const override { return "identity"; }

 protected:
  torch::Tensor transform(const torch::Tensor& pixels) override { return pixels; }

 private:
  ImageShape shape_;
};

/// Flips a transformer's switch for the lifetime of the guard.
class SwitchGuard {
 public:
  SwitchGuard(InputTransformer& g, bool on) : g_(g), previous_(g.switched_on()) { g_.set_switch(on); }
  ~SwitchGuard() { g_.set_switch(previous_); }
  SwitchGuard(const SwitchGuard&) = delete;
  SwitchGuard& operator=(const SwitchGuard&) = delete;

 private:
  InputTransformer& g_;
  bool previous_;
};

/// Puts a module in eval mode and restores its previous mode on exit.
class EvalModeGuard {
 public:
  explicit EvalModeGuard(torch::nn::Module& m) : m_(m), was_training_(m.is_training()) { m_.eval(); }
  ~EvalModeGuard() { m_.train(was_training_); }
  EvalModeGuard(const EvalModeGuard&) = delete;
  EvalModeGuard& operator=(const EvalModeGuard&) = delete;

 private:
  torch::nn::Module& m_;
  bool was_training_;
};

}  // namespace atattack

#endif  // ATATTACK_CORE_MODEL_HPP
