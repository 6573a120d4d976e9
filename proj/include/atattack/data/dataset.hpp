#ifndef ATATTACK_DATA_DATASET_HPP
#define ATATTACK_DATA_DATASET_HPP

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "atattack/core/hash.hpp"
#include "atattack/core/types.hpp"

#ifndef ATATTACK_CHECKSUM_MANIFEST
#define ATATTACK_CHECKSUM_MANIFEST "data/checksums.json"
#endif

namespace atattack::data {

namespace fs = std::filesystem;

enum class Split { train, test };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

/// 8-bit pixels to [0,1] floats.
inline torch::Tensor normalize(const torch::Tensor& u8) { return u8.to(torch::kFloat32).div(255.0); }

/// [0,1] floats back to 8-bit, rounding to the nearest level.
inline torch::Tensor denormalize(const torch::Tensor& pixels) {
  return pixels.mul(255.0).round().clamp(0, 255).to(torch::kUInt8);
}

/// An in-memory labelled image set. Pixels stay 8-bit until a batch is drawn.
/// `source_index` remembers each example's position in the original split so
/// per-example randomness survives subsetting and shuffling.
struct Dataset {
  std::string name;
  torch::Tensor images;        // uint8 (N,C,H,W)
  torch::Tensor labels;        // int64 (N)
  torch::Tensor source_index;  // int64 (N)
  int64_t num_classes = 10;

  int64_t size() const { return labels.size(0); }
  ImageShape shape() const { return ImageShape::of(images); }

  ImageBatch batch(int64_t begin, int64_t end) const {
    return {normalize(images.slice(0, begin, end)), labels.slice(0, begin, end)};
  }

  ImageBatch gather(const torch::Tensor& idx) const {
    return {normalize(images.index_select(0, idx)), labels.index_select(0, idx)};
  }

  torch::Tensor keys(int64_t begin, int64_t end) const { return source_index.slice(0, begin, end); }

  Dataset subset(const torch::Tensor& idx) const {
    return {name, images.index_select(0, idx), labels.index_select(0, idx), source_index.index_select(0, idx),
            num_classes};
  }

  Dataset subset(const std::vector<int64_t>& idx) const {
    return subset(torch::tensor(idx, torch::kInt64));
  }

  std::vector<int64_t> class_histogram() const {
    std::vector<int64_t> h(static_cast<size_t>(num_classes), 0);
    auto acc = labels.accessor<int64_t, 1>();
    for (int64_t i = 0; i < acc.size(0); ++i) ++h[static_cast<size_t>(acc[i])];
    return h;
  }
};

inline Dataset make_dataset(std::string name, torch::Tensor images_u8, torch::Tensor labels, int64_t num_classes) {
  const auto n = labels.size(0);
  return {std::move(name), std::move(images_u8), std::move(labels), torch::arange(n, torch::kInt64), num_classes};
}

/// Cache root: $ATATTACK_CACHE, else ~/.cache/atattack.
inline fs::path default_cache_dir() {
  if (const char* env = std::getenv("ATATTACK_CACHE"); env && *env) return env;
  const char* home = std::getenv("HOME");
  return fs::path(home ? home : ".") / ".cache" / "atattack";
}

/// Checksum manifest path: $ATATTACK_CHECKSUMS, else the copy in the source tree.
inline fs::path checksum_manifest_path() {
  if (const char* env = std::getenv("ATATTACK_CHECKSUMS"); env && *env) return env;
  return ATATTACK_CHECKSUM_MANIFEST;
}

inline std::map<std::string, std::string> load_checksums() {
  std::ifstream in(checksum_manifest_path());
  if (!in) throw DataError("checksum manifest not found at " + checksum_manifest_path().string());
  auto j = nlohmann::json::parse(in);
  return j.at("sha256").get<std::map<std::string, std::string>>();
}

namespace detail {

inline std::vector<uint8_t> read_verified(const fs::path& cache, const std::string& rel,
                                          const std::map<std::string, std::string>& sums) {
  const auto path = cache / rel;
  if (!fs::exists(path))
    throw DataError("dataset file " + path.string() +
                    " missing from the cache; populate it with tools/fetch_datasets.py");
  auto it = sums.find(rel);
  if (it == sums.end()) throw DataError("no checksum recorded for " + rel);
  if (sha256_file(path.string()) != it->second) throw DataError("checksum mismatch for " + path.string());
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline uint32_t be32(const std::vector<uint8_t>& b, size_t off) {
  return (uint32_t{b[off]} << 24) | (uint32_t{b[off + 1]} << 16) | (uint32_t{b[off + 2]} << 8) | b[off + 3];
}

inline Dataset load_mnist(const fs::path& cache, Split split, const std::map<std::string, std::string>& sums) {
  const std::string stem = split == Split::train ? "train" : "t10k";
  auto img = read_verified(cache, "mnist/" + stem + "-images-idx3-ubyte", sums);
  auto lab = read_verified(cache, "mnist/" + stem + "-labels-idx1-ubyte", sums);
  if (img.size() < 16 || be32(img, 0) != 2051 || lab.size() < 8 || be32(lab, 0) != 2049)
    throw DataError("bad IDX header in mnist " + stem);
  const int64_t n = be32(img, 4), rows = be32(img, 8), cols = be32(img, 12);
  if (static_cast<int64_t>(be32(lab, 4)) != n || img.size() != static_cast<size_t>(16 + n * rows * cols) ||
      lab.size() != static_cast<size_t>(8 + n))
    throw DataError("inconsistent IDX sizes in mnist " + stem);
  auto images = torch::from_blob(img.data() + 16, {n, 1, rows, cols}, torch::kUInt8).clone();
  auto labels = torch::from_blob(lab.data() + 8, {n}, torch::kUInt8).to(torch::kInt64);
  return make_dataset("mnist", images, labels, 10);
}

inline Dataset load_cifar10(const fs::path& cache, Split split, const std::map<std::string, std::string>& sums) {
  std::vector<std::string> files;
  if (split == Split::train)
    for (int i = 1; i <= 5; ++i) files.push_back("data_batch_" + std::to_string(i) + ".bin");
  else
    files.push_back("test_batch.bin");
  constexpr int64_t kRecord = 1 + 3 * 32 * 32;
  std::vector<torch::Tensor> images, labels;
  for (const auto& f : files) {
    auto raw = read_verified(cache, "cifar10/cifar-10-batches-bin/" + f, sums);
    if (raw.size() % kRecord != 0) throw DataError("truncated CIFAR10 batch " + f);
    const int64_t n = static_cast<int64_t>(raw.size()) / kRecord;
    auto rec = torch::from_blob(raw.data(), {n, kRecord}, torch::kUInt8).clone();
    labels.push_back(rec.select(1, 0).to(torch::kInt64));
    images.push_back(rec.slice(1, 1).reshape({n, 3, 32, 32}).contiguous());
  }
  return make_dataset("cifar10", torch::cat(images), torch::cat(labels), 10);
}

}  // namespace detail

/// Reads a split from the checksum-verified cache. Pixels are kept as bytes;
/// batches come out scaled to [0,1] with no mean/std whitening.
inline Dataset load_dataset(const std::string& name, Split split, const fs::path& cache_dir = default_cache_dir()) {
  const auto sums = load_checksums();
  if (name == "mnist") return detail::load_mnist(cache_dir, split, sums);
  if (name == "cifar10") return detail::load_cifar10(cache_dir, split, sums);
  throw ConfigError("unknown dataset '" + name + "' (expected mnist or cifar10)");
}

/// Permutation of [0,n) fixed by `seed`.
inline std::vector<int64_t> shuffled_indices(int64_t n, uint64_t seed) {
  std::vector<int64_t> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), int64_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

/// Iterates a dataset in fixed-size batches, optionally in a seeded order.
class BatchStream {
 public:
  BatchStream(const Dataset& data, int64_t batch_size, std::optional<uint64_t> shuffle_seed = std::nullopt)
      : data_(data), batch_size_(batch_size) {
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (shuffle_seed) {
      auto v = shuffled_indices(data.size(), *shuffle_seed);
      order_ = torch::tensor(v, torch::kInt64);
    }
  }

  int64_t num_batches() const { return (data_.size() + batch_size_ - 1) / batch_size_; }

  /// Batch `b` plus the source keys of its examples.
  std::pair<ImageBatch, torch::Tensor> operator[](int64_t b) const {
    const int64_t begin = b * batch_size_;
    const int64_t end = std::min(begin + batch_size_, data_.size());
    if (!order_.defined()) return {data_.batch(begin, end), data_.keys(begin, end)};
    auto idx = order_.slice(0, begin, end);
    return {data_.gather(idx), data_.source_index.index_select(0, idx)};
  }

 private:
  const Dataset& data_;
  int64_t batch_size_;
  torch::Tensor order_;
};

/// Seeded random subset of at most `limit` examples, kept in original order.
inline Dataset limit_sample(const Dataset& data, int64_t limit, uint64_t seed) {
  if (limit <= 0 || limit >= data.size()) return data;
  auto idx = shuffled_indices(data.size(), seed);
  idx.resize(static_cast<size_t>(limit));
  std::sort(idx.begin(), idx.end());
  return data.subset(idx);
}

/// Draws per-class samples without replacement. Each class keeps a seeded
/// shuffled reservoir, so successive draws are disjoint.
class StratifiedSampler {
 public:
  StratifiedSampler(const Dataset& data, uint64_t seed) : data_(data) {
    reservoirs_.resize(static_cast<size_t>(data.num_classes));
    auto acc = data.labels.accessor<int64_t, 1>();
    for (int64_t i = 0; i < acc.size(0); ++i) reservoirs_[static_cast<size_t>(acc[i])].push_back(i);
    std::mt19937_64 rng(seed);
    for (auto& r : reservoirs_) std::shuffle(r.begin(), r.end(), rng);
    cursor_.assign(reservoirs_.size(), 0);
  }

  /// Exactly `k` fresh examples from every class, ordered by class.
  Dataset draw(int64_t k) {
    if (k < 1) throw ConfigError("per-class sample size must be >= 1");
    for (size_t c = 0; c < reservoirs_.size(); ++c)
      if (cursor_[c] + static_cast<size_t>(k) > reservoirs_[c].size())
        throw ConfigError("class " + std::to_string(c) + " has only " +
                          std::to_string(reservoirs_[c].size() - cursor_[c]) + " unused examples, " +
                          std::to_string(k) + " requested");
    std::vector<int64_t> idx;
    for (size_t c = 0; c < reservoirs_.size(); ++c) {
      idx.insert(idx.end(), reservoirs_[c].begin() + static_cast<long>(cursor_[c]),
                 reservoirs_[c].begin() + static_cast<long>(cursor_[c] + k));
      cursor_[c] += static_cast<size_t>(k);
    }
    return data_.subset(idx);
  }

 private:
  const Dataset& data_;
  std::vector<std::vector<int64_t>> reservoirs_;
  std::vector<size_t> cursor_;
};

inline Dataset per_class_subset(const Dataset& data, int64_t k, uint64_t seed) {
  return StratifiedSampler(data, seed).draw(k);
}

/// Partitions by class: (examples outside `holdout`, examples inside it).
inline std::pair<Dataset, Dataset> class_split(const Dataset& data, const std::set<int64_t>& holdout) {
  if (holdout.empty()) throw ConfigError("holdout class set is empty");
  for (auto c : holdout)
    if (c < 0 || c >= data.num_classes) throw ConfigError("holdout class " + std::to_string(c) + " out of range");
  if (static_cast<int64_t>(holdout.size()) >= data.num_classes) throw ConfigError("holdout set covers every class");
  std::vector<int64_t> kept, held;
  auto acc = data.labels.accessor<int64_t, 1>();
  for (int64_t i = 0; i < acc.size(0); ++i) (holdout.count(acc[i]) ? held : kept).push_back(i);
  return {data.subset(kept), data.subset(held)};
}

}  // namespace atattack::data

#endif  // ATATTACK_DATA_DATASET_HPP
