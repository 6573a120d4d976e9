#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "atattack/atattack.hpp"

namespace testutil {

using namespace atattack;
namespace fs = std::filesystem;

/// Affine classifier on flattened pixels with directly settable weights.
class LinearClassifier : public Classifier {
 public:
  LinearClassifier(ImageShape shape, int64_t classes, torch::Dtype dtype = torch::kFloat32)
      : shape_(shape), classes_(classes) {
    weight = register_parameter("weight", torch::randn({classes, shape.numel()}, dtype) * 0.5);
    bias = register_parameter("bias", torch::randn({classes}, dtype) * 0.1);
  }

  torch::Tensor forward(const torch::Tensor& x) override {
    return torch::nn::functional::linear(x.reshape({x.size(0), -1}), weight, bias);
  }
  int64_t num_classes() const override { return classes_; }
  ImageShape input_shape() const override { return shape_; }
  std::string arch() const override { return "linear"; }

  torch::Tensor weight, bias;

 private:
  ImageShape shape_;
  int64_t classes_;
};

/// Two-layer tanh network, used where curvature matters.
class TwoLayer : public Classifier {
 public:
  TwoLayer(ImageShape shape, int64_t hidden, int64_t classes, torch::Dtype dtype = torch::kFloat64)
      : shape_(shape), classes_(classes) {
    fc1 = register_module("fc1", torch::nn::Linear(shape.numel(), hidden));
    fc2 = register_module("fc2", torch::nn::Linear(hidden, classes));
    to(dtype);
  }

  torch::Tensor forward(const torch::Tensor& x) override {
    return fc2->forward(torch::tanh(fc1->forward(x.reshape({x.size(0), -1}))));
  }
  int64_t num_classes() const override { return classes_; }
  ImageShape input_shape() const override { return shape_; }
  std::string arch() const override { return "two_layer"; }

  torch::nn::Linear fc1{nullptr}, fc2{nullptr};

 private:
  ImageShape shape_;
  int64_t classes_;
};

/// Smooth non-identity trojan: G(x) = clamp(x + a * tanh(k * (x - 0.5)) + shift).
class WarpTransformer : public InputTransformer {
 public:
  WarpTransformer(ImageShape shape, double a, double k, torch::Dtype dtype = torch::kFloat32) : shape_(shape), k_(k) {
    amp = register_parameter("amp", torch::full({1}, a, dtype));
    shift = register_parameter("shift", torch::zeros({shape.channels, shape.height, shape.width}, dtype));
  }
  ImageShape image_shape() const override { return shape_; }
  std::string arch() const override { return "warp"; }

  torch::Tensor amp, shift;

 protected:
  torch::Tensor transform(const torch::Tensor& x) override { return x + amp * torch::tanh(k_ * (x - 0.5)) + shift; }

 private:
  ImageShape shape_;
  double k_;
};

inline ImageBatch random_batch(int64_t n, ImageShape s, int64_t classes, uint64_t seed,
                               torch::Dtype dtype = torch::kFloat32) {
  torch::manual_seed(seed);
  auto pixels = torch::rand({n, s.channels, s.height, s.width}, dtype);
  auto labels = torch::randint(0, classes, {n}, torch::kInt64);
  return {pixels, labels};
}

/// Synthetic dataset of random 8-bit images.
inline data::Dataset random_dataset(int64_t n, ImageShape s, int64_t classes, uint64_t seed) {
  torch::manual_seed(seed);
  auto images = torch::randint(0, 256, {n, s.channels, s.height, s.width}, torch::kInt64).to(torch::kUInt8);
  auto labels = torch::arange(n, torch::kInt64).remainder(classes);
  return data::make_dataset("synthetic", images, labels, classes);
}

inline bool dataset_cached(const std::string& name) {
  const auto root = data::default_cache_dir() / name;
  return fs::exists(root) && !fs::is_empty(root);
}

#define REQUIRE_DATASET(name) \
  if (!testutil::dataset_cached(name)) GTEST_SKIP() << name << " not in cache; run tools/fetch_datasets.py"

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("atattack_" + tag + "_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline bool bit_equal(const torch::Tensor& a, const torch::Tensor& b) {
  return a.sizes() == b.sizes() && a.dtype() == b.dtype() && torch::equal(a, b);
}

}  // namespace testutil
