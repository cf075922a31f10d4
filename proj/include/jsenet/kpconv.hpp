#pragma once

// Rigid kernel point convolution and the encoder building blocks.
//
//   F'(p) = sum_{q in N(p, r)} sum_k h(q - p, x_k) f(q) W_k,   h = max(0, 1 - d / sigma)
//
// with 15 fixed kernel points x_k (one center, 14 on a shell) scaled by the
// layer radius.

#include <array>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "jsenet/geometry.hpp"
#include "jsenet/parameters.hpp"
#include "jsenet/tensor.hpp"

namespace jsenet {

inline constexpr std::size_t kKernelPoints = 15;

struct KernelLayout {
  std::array<Vec3, kKernelPoints> points;  // unit-ball coordinates, points[0] is the center
  double sigma_factor = 0.3;               // influence distance / layer radius

  static const KernelLayout& standard();
};

// Kernel influence of every (query, neighbor) pair, kKernelPoints values per pair.
struct KernelInfluence {
  std::size_t support_count = 0;
  double radius = 0.0;
  IndexGroups neighbors;
  std::vector<Real> weights;

  std::size_t query_count() const { return neighbors.size(); }
};

KernelInfluence build_influence(std::span<const Vec3> queries, std::span<const Vec3> supports,
                                IndexGroups neighbors, double radius,
                                const KernelLayout& layout = KernelLayout::standard());

// features: supports x C_in; weights: (kKernelPoints, C_in, C_out).
// Queries without neighbors get an all-zero row. `influence` must outlive
// the tape records.
Tensor kpconv(Tape& tape, const Tensor& features, const Tensor& weights, const KernelInfluence& influence);

// Each fine point copies the feature of its coarse parent.
Tensor nearest_upsample(Tape& tape, const Tensor& coarse, std::span<const std::uint32_t> parent);

struct PyramidConfig {
  int stages = 5;
  double base_cell = 0.04;
  double conv_radius_factor = 2.5;  // conv radius = factor x stage cell
};

// Multi-resolution geometry of one input cloud. Stage s lives on a grid of
// base_cell * 2^s; stage 0 is the input itself.
struct Pyramid {
  std::vector<double> cells;
  std::vector<std::vector<Vec3>> points;
  std::vector<KernelInfluence> conv;                   // stage s -> stage s
  std::vector<KernelInfluence> pool;                   // stage s-1 -> stage s (index 0 unused)
  std::vector<IndexGroups> members;                    // stage s-1 rows per stage s point (index 0 unused)
  std::vector<std::vector<std::uint32_t>> parent;      // stage s point -> stage s+1 point
  std::vector<std::vector<std::uint32_t>> full_parent; // stage 0 point -> stage s point

  std::size_t stage_count() const { return points.size(); }
};

Pyramid build_pyramid(std::span<const Vec3> positions, const PyramidConfig& config);

// ---------------------------------------------------------------- layers

using Rng = std::mt19937_64;

struct LayerMode {
  bool training = false;
  ops::BatchNormOptions batch_norm;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, bool bias,
         Rng& rng, double init_gain = 2.0);
  Tensor forward(Tape& tape, const Tensor& x) const;
  std::size_t out_channels() const { return weight_.cols(); }

 private:
  Tensor weight_;
  Tensor bias_;
};

class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(ParameterStore& store, const std::string& name, std::size_t channels);
  Tensor forward(Tape& tape, const Tensor& x, const LayerMode& mode) const;

 private:
  Tensor gamma_, beta_;
  mutable Tensor running_mean_, running_var_;
};

// Linear (no bias) + batch norm + optional leaky ReLU.
class UnaryBlock {
 public:
  UnaryBlock() = default;
  UnaryBlock(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, bool activate,
             Rng& rng);
  Tensor forward(Tape& tape, const Tensor& x, const LayerMode& mode) const;

 private:
  Linear linear_;
  BatchNorm norm_;
  bool activate_ = true;
};

class KPConvLayer {
 public:
  KPConvLayer() = default;
  KPConvLayer(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  Tensor forward(Tape& tape, const Tensor& features, const KernelInfluence& influence) const;
  const Tensor& weights() const { return weights_; }

 private:
  Tensor weights_;
};

// KPConv + batch norm + leaky ReLU.
class SimpleBlock {
 public:
  SimpleBlock() = default;
  SimpleBlock(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  Tensor forward(Tape& tape, const Tensor& features, const KernelInfluence& influence,
                 const LayerMode& mode) const;

 private:
  KPConvLayer conv_;
  BatchNorm norm_;
};

// Bottleneck residual block: unary -> KPConv -> unary, plus a shortcut.
// A strided block convolves from the finer stage onto the coarser one and
// mean-pools the shortcut over the subsampling members.
class ResnetBlock {
 public:
  ResnetBlock() = default;
  ResnetBlock(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, bool strided,
              Rng& rng);
  Tensor forward(Tape& tape, const Tensor& features, const KernelInfluence& influence,
                 const IndexGroups* pool_members, const LayerMode& mode) const;

 private:
  UnaryBlock reduce_;
  KPConvLayer conv_;
  BatchNorm conv_norm_;
  UnaryBlock expand_;
  UnaryBlock shortcut_;
  bool project_shortcut_ = false;
  bool strided_ = false;
};

// Shared five-stage encoder. Returns the final features of every stage.
class Encoder {
 public:
  Encoder() = default;
  Encoder(ParameterStore& store, const std::string& prefix, std::size_t in_features,
          const std::vector<int>& channels, int blocks_per_stage, Rng& rng);
  std::vector<Tensor> forward(Tape& tape, const Pyramid& pyramid, const Tensor& features,
                              const LayerMode& mode) const;
  const std::vector<int>& channels() const { return channels_; }

 private:
  std::vector<int> channels_;
  SimpleBlock stem_;
  std::vector<std::vector<ResnetBlock>> stages_;
};

}  // namespace jsenet
