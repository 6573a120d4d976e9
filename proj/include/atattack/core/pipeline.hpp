#ifndef ATATTACK_CORE_PIPELINE_HPP
#define ATATTACK_CORE_PIPELINE_HPP

#include <memory>
#include <string>

#include "atattack/core/model.hpp"

namespace atattack {

/// F(G(x)) as a classifier. With the trojan switched off this is F(x) exactly,
/// since the transformer hands its input tensor straight through.
class Pipeline : public Classifier {
 public:
  Pipeline(ClassifierPtr target, TransformerPtr trojan)
      : target_(register_module("target", std::move(target))),
        trojan_(register_module("trojan", std::move(trojan))) {}

  torch::Tensor forward(const torch::Tensor& pixels) override { return target_->forward(trojan_->forward(pixels)); }

  int64_t num_classes() const override { return target_->num_classes(); }
  ImageShape input_shape() const override { return target_->input_shape(); }
  std::string arch() const override { return trojan_->arch() + "+" + target_->arch(); }

  Classifier& target() { return *target_; }
  InputTransformer& trojan() { return *trojan_; }
  const ClassifierPtr& target_ptr() const { return target_; }
  const TransformerPtr& trojan_ptr() const { return trojan_; }

 private:
  ClassifierPtr target_;
  TransformerPtr trojan_;
};

using PipelinePtr = std::shared_ptr<Pipeline>;

/// Builds F o G after checking that G emits what F consumes.
inline PipelinePtr compose_pipeline(ClassifierPtr target, TransformerPtr trojan) {
  if (!target || !trojan) throw ConfigError("compose_pipeline: null model");
  if (trojan->image_shape() != target->input_shape())
    throw ShapeError("trojan output " + trojan->image_shape().str() + " does not match target input " +
                     target->input_shape().str());
  return std::make_shared<Pipeline>(std::move(target), std::move(trojan));
}

}  // namespace atattack

#endif  // ATATTACK_CORE_PIPELINE_HPP
