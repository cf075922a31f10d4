#include "jsenet/kpconv.hpp"

#include <Eigen/Core>
#include <cmath>
#include <spdlog/spdlog.h>

#include "jsenet/spatial_index.hpp"

namespace jsenet {

namespace {

constexpr double kShellRadius = 0.66;

// 14 directions minimizing the Coulomb energy on the unit sphere.
constexpr double kShell[14][3] = {
    {0.25689957430073895, -0.61653407173593366, 0.74423675474462403},
    {0.29236890649225999, -0.53142113538929558, -0.79505471470715283},
    {0.12173354390986318, -0.9911996494427413, -0.052001915654446958},
    {-0.93887829008775647, 0.34423944632836956, -0.0025999987361788515},
    {-0.17294227629997225, 0.85483535082908157, 0.48923153214107662},
    {-0.40705670839442731, 0.2058955343937533, -0.88989429994118119},
    {0.59817029946557931, 0.30302295637094567, -0.74186884336078651},
    {-0.15246404781121434, 0.90397532754033194, -0.39947881210818892},
    {-0.70260582595509591, -0.59046421217534562, 0.39711090072435185},
    {0.56270096727405028, 0.21791002002431079, 0.79742262609099124},
    {0.93887829008775625, -0.3442394463283705, 0.0025999987361789434},
    {-0.44801316537193397, 0.10761558097125122, 0.88752638855734323},
    {-0.68212759746634621, -0.54132423546409247, -0.49159944352491514},
    {0.73333632985649755, 0.67768853407773488, 0.054369827038284795},
};

using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t = Tensor::zeros(std::move(shape));
  for (Real& v : t.data()) v = static_cast<Real>(dist(rng));
  return t;
}

}  // namespace

const KernelLayout& KernelLayout::standard() {
  static const KernelLayout layout = [] {
    KernelLayout k;
    k.points[0] = Vec3::Zero();
    for (std::size_t i = 0; i < 14; ++i)
      k.points[i + 1] = kShellRadius * Vec3(kShell[i][0], kShell[i][1], kShell[i][2]);
    return k;
  }();
  return layout;
}

KernelInfluence build_influence(std::span<const Vec3> queries, std::span<const Vec3> supports,
                                IndexGroups neighbors, double radius, const KernelLayout& layout) {
  require(radius > 0, "kernel influence: radius must be positive");
  if (neighbors.size() != queries.size()) {
    throw DimensionError("kernel influence: " + std::to_string(neighbors.size()) + " neighbor lists for " +
                         std::to_string(queries.size()) + " queries");
  }
  KernelInfluence inf;
  inf.support_count = supports.size();
  inf.radius = radius;
  inf.weights.assign(neighbors.total() * kKernelPoints, Real(0));
  const double sigma = layout.sigma_factor * radius;
  for (std::size_t p = 0; p < queries.size(); ++p) {
    for (std::uint32_t j = neighbors.offsets[p]; j < neighbors.offsets[p + 1]; ++j) {
      const std::uint32_t q = neighbors.indices[j];
      if (q >= supports.size()) throw DimensionError("kernel influence: neighbor index out of range");
      const Vec3 rel = supports[q] - queries[p];
      for (std::size_t k = 0; k < kKernelPoints; ++k) {
        const double d = (rel - layout.points[k] * radius).norm();
        inf.weights[j * kKernelPoints + k] = static_cast<Real>(std::max(0.0, 1.0 - d / sigma));
      }
    }
  }
  inf.neighbors = std::move(neighbors);
  return inf;
}

Tensor kpconv(Tape& tape, const Tensor& features, const Tensor& weights, const KernelInfluence& influence) {
  const std::size_t cin = features.cols();
  const bool weights_ok = weights.rank() == 3 && weights.shape()[0] == kKernelPoints && weights.shape()[1] == cin;
  if (!weights_ok || features.rows() != influence.support_count) {
    throw DimensionError("kpconv: features " + shape_string(features.shape()) + ", weights " +
                         shape_string(weights.shape()) + ", " + std::to_string(influence.support_count) +
                         " supports");
  }
  const std::size_t cout = weights.shape()[2];
  const std::size_t nq = influence.query_count();
  const std::size_t width = kKernelPoints * cin;

  // Gathered, kernel-weighted neighborhood features: one row of width
  // kKernelPoints * cin per query.
  auto gathered = std::make_shared<Matrix>(Matrix::Zero(static_cast<Eigen::Index>(nq), static_cast<Eigen::Index>(width)));
  auto f = features.data();
  std::size_t isolated = 0;
  for (std::size_t p = 0; p < nq; ++p) {
    if (influence.neighbors.group_size(p) == 0) ++isolated;
    Real* row = gathered->data() + p * width;
    for (std::uint32_t j = influence.neighbors.offsets[p]; j < influence.neighbors.offsets[p + 1]; ++j) {
      const Real* fq = f.data() + static_cast<std::size_t>(influence.neighbors.indices[j]) * cin;
      const Real* h = influence.weights.data() + static_cast<std::size_t>(j) * kKernelPoints;
      for (std::size_t k = 0; k < kKernelPoints; ++k) {
        if (h[k] == 0) continue;
        Real* dst = row + k * cin;
        for (std::size_t c = 0; c < cin; ++c) dst[c] += h[k] * fq[c];
      }
    }
  }
  if (isolated > 0) spdlog::debug("kpconv: {} of {} queries have no neighbors", isolated, nq);

  Tensor out = Tensor::zeros({nq, cout}, features.requires_grad() || weights.requires_grad());
  ConstMatrixMap w(weights.data().data(), static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(cout));
  MatrixMap(out.data().data(), static_cast<Eigen::Index>(nq), static_cast<Eigen::Index>(cout)).noalias() =
      *gathered * w;

  if (out.requires_grad()) {
    tape.record("kpconv", {features, weights}, out,
                [features, weights, out, gathered, &influence, nq, cin, cout, width]() mutable {
                  ConstMatrixMap gy(std::as_const(out).grad().data(), static_cast<Eigen::Index>(nq),
                                    static_cast<Eigen::Index>(cout));
                  if (weights.requires_grad()) {
                    MatrixMap(weights.grad().data(), static_cast<Eigen::Index>(width),
                              static_cast<Eigen::Index>(cout))
                        .noalias() += gathered->transpose() * gy;
                  }
                  if (features.requires_grad()) {
                    ConstMatrixMap w(weights.data().data(), static_cast<Eigen::Index>(width),
                                     static_cast<Eigen::Index>(cout));
                    const Matrix dg = gy * w.transpose();
                    auto gf = features.grad();
                    for (std::size_t p = 0; p < nq; ++p) {
                      const Real* row = dg.data() + p * width;
                      for (std::uint32_t j = influence.neighbors.offsets[p]; j < influence.neighbors.offsets[p + 1];
                           ++j) {
                        Real* dst = gf.data() + static_cast<std::size_t>(influence.neighbors.indices[j]) * cin;
                        const Real* h = influence.weights.data() + static_cast<std::size_t>(j) * kKernelPoints;
                        for (std::size_t k = 0; k < kKernelPoints; ++k) {
                          if (h[k] == 0) continue;
                          const Real* src = row + k * cin;
                          for (std::size_t c = 0; c < cin; ++c) dst[c] += h[k] * src[c];
                        }
                      }
                    }
                  }
                });
  }
  return out;
}

Tensor nearest_upsample(Tape& tape, const Tensor& coarse, std::span<const std::uint32_t> parent) {
  return ops::gather_rows(tape, coarse, parent);
}

Pyramid build_pyramid(std::span<const Vec3> positions, const PyramidConfig& config) {
  require(config.stages >= 1, "pyramid: need at least one stage");
  require(config.base_cell > 0 && config.conv_radius_factor > 0, "pyramid: cell and radius factor must be positive");
  require(!positions.empty(), "pyramid: empty input cloud");
  const std::size_t stages = static_cast<std::size_t>(config.stages);
  Pyramid pyr;
  pyr.cells.resize(stages);
  pyr.points.resize(stages);
  pyr.conv.resize(stages);
  pyr.pool.resize(stages);
  pyr.members.resize(stages);
  pyr.parent.resize(stages);
  pyr.full_parent.resize(stages);

  pyr.points[0].assign(positions.begin(), positions.end());
  for (std::size_t s = 0; s < stages; ++s) pyr.cells[s] = config.base_cell * std::ldexp(1.0, static_cast<int>(s));
  for (std::size_t s = 1; s < stages; ++s) {
    PointCloud fine;
    fine.resize(pyr.points[s - 1].size());
    fine.positions = pyr.points[s - 1];
    SubsampleResult sub = grid_subsample(fine, pyr.cells[s]);
    pyr.points[s] = std::move(sub.cloud.positions);
    pyr.members[s] = std::move(sub.members);
    pyr.parent[s - 1] = std::move(sub.parent);
  }
  for (std::size_t s = 0; s < stages; ++s) {
    const double radius = config.conv_radius_factor * pyr.cells[s];
    const SpatialIndex index(pyr.points[s], radius);
    pyr.conv[s] = build_influence(pyr.points[s], pyr.points[s], index.radius_search(pyr.points[s], radius), radius);
    if (s + 1 < stages) {
      pyr.pool[s + 1] = build_influence(pyr.points[s + 1], pyr.points[s],
                                        index.radius_search(pyr.points[s + 1], radius), radius);
    }
  }
  pyr.full_parent[0].resize(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) pyr.full_parent[0][i] = static_cast<std::uint32_t>(i);
  for (std::size_t s = 1; s < stages; ++s) {
    pyr.full_parent[s].resize(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) pyr.full_parent[s][i] = pyr.parent[s - 1][pyr.full_parent[s - 1][i]];
  }
  return pyr;
}

// ---------------------------------------------------------------- layers

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, bool bias, Rng& rng,
               double init_gain) {
  weight_ = store.add(name + "/weight", normal_tensor({in, out}, std::sqrt(init_gain / static_cast<double>(in)), rng));
  if (bias) bias_ = store.add(name + "/bias", Tensor::zeros({1, out}));
}

Tensor Linear::forward(Tape& tape, const Tensor& x) const {
  Tensor y = ops::matmul(tape, x, weight_);
  return bias_.defined() ? ops::add(tape, y, bias_) : y;
}

BatchNorm::BatchNorm(ParameterStore& store, const std::string& name, std::size_t channels) {
  gamma_ = store.add(name + "/gamma", Tensor::full({1, channels}, 1));
  beta_ = store.add(name + "/beta", Tensor::zeros({1, channels}));
  running_mean_ = store.add(name + "/running_mean", Tensor::zeros({1, channels}), false);
  running_var_ = store.add(name + "/running_var", Tensor::full({1, channels}, 1), false);
}

Tensor BatchNorm::forward(Tape& tape, const Tensor& x, const LayerMode& mode) const {
  ops::BatchNormOptions options = mode.batch_norm;
  options.training = mode.training;
  return ops::batch_norm(tape, x, gamma_, beta_, running_mean_, running_var_, options);
}

UnaryBlock::UnaryBlock(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                       bool activate, Rng& rng)
    : linear_(store, name + "/linear", in, out, false, rng), norm_(store, name + "/bn", out), activate_(activate) {}

Tensor UnaryBlock::forward(Tape& tape, const Tensor& x, const LayerMode& mode) const {
  Tensor y = norm_.forward(tape, linear_.forward(tape, x), mode);
  return activate_ ? ops::leaky_relu(tape, y) : y;
}

KPConvLayer::KPConvLayer(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  weights_ = store.add(name + "/kernel",
                       normal_tensor({kKernelPoints, in, out}, std::sqrt(2.0 / static_cast<double>(kKernelPoints * in)), rng));
}

Tensor KPConvLayer::forward(Tape& tape, const Tensor& features, const KernelInfluence& influence) const {
  return kpconv(tape, features, weights_, influence);
}

SimpleBlock::SimpleBlock(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : conv_(store, name + "/conv", in, out, rng), norm_(store, name + "/bn", out) {}

Tensor SimpleBlock::forward(Tape& tape, const Tensor& features, const KernelInfluence& influence,
                            const LayerMode& mode) const {
  return ops::leaky_relu(tape, norm_.forward(tape, conv_.forward(tape, features, influence), mode));
}

ResnetBlock::ResnetBlock(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                         bool strided, Rng& rng)
    : project_shortcut_(in != out), strided_(strided) {
  const std::size_t mid = std::max<std::size_t>(1, out / 4);
  reduce_ = UnaryBlock(store, name + "/reduce", in, mid, true, rng);
  conv_ = KPConvLayer(store, name + "/conv", mid, mid, rng);
  conv_norm_ = BatchNorm(store, name + "/conv_bn", mid);
  expand_ = UnaryBlock(store, name + "/expand", mid, out, false, rng);
  if (project_shortcut_) shortcut_ = UnaryBlock(store, name + "/shortcut", in, out, false, rng);
}

Tensor ResnetBlock::forward(Tape& tape, const Tensor& features, const KernelInfluence& influence,
                            const IndexGroups* pool_members, const LayerMode& mode) const {
  Tensor x = reduce_.forward(tape, features, mode);
  x = ops::leaky_relu(tape, conv_norm_.forward(tape, conv_.forward(tape, x, influence), mode));
  x = expand_.forward(tape, x, mode);
  Tensor skip = features;
  if (strided_) {
    require(pool_members != nullptr, "resnet block: strided block needs pooling members");
    skip = ops::mean_over_index_groups(tape, skip, *pool_members);
  }
  if (project_shortcut_) skip = shortcut_.forward(tape, skip, mode);
  return ops::leaky_relu(tape, ops::add(tape, x, skip));
}

Encoder::Encoder(ParameterStore& store, const std::string& prefix, std::size_t in_features,
                 const std::vector<int>& channels, int blocks_per_stage, Rng& rng)
    : channels_(channels) {
  require(!channels.empty(), "encoder: no stages");
  require(blocks_per_stage >= 0, "encoder: negative block count");
  for (int c : channels) require(c > 0, "encoder: channel widths must be positive");
  stem_ = SimpleBlock(store, prefix + "/stage0/stem", in_features, static_cast<std::size_t>(channels[0]), rng);
  stages_.resize(channels.size());
  for (std::size_t s = 0; s < channels.size(); ++s) {
    const std::string base = prefix + "/stage" + std::to_string(s);
    const auto width = static_cast<std::size_t>(channels[s]);
    if (s > 0)
      stages_[s].emplace_back(store, base + "/strided", static_cast<std::size_t>(channels[s - 1]), width, true, rng);
    for (int b = 0; b < blocks_per_stage; ++b)
      stages_[s].emplace_back(store, base + "/block" + std::to_string(b), width, width, false, rng);
  }
}

std::vector<Tensor> Encoder::forward(Tape& tape, const Pyramid& pyramid, const Tensor& features,
                                     const LayerMode& mode) const {
  if (pyramid.stage_count() < stages_.size()) {
    throw DimensionError("encoder: pyramid has " + std::to_string(pyramid.stage_count()) + " stages, encoder needs " +
                         std::to_string(stages_.size()));
  }
  std::vector<Tensor> out;
  Tensor x = stem_.forward(tape, features, pyramid.conv[0], mode);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      const bool strided = s > 0 && b == 0;
      x = strided ? stages_[s][b].forward(tape, x, pyramid.pool[s], &pyramid.members[s], mode)
                  : stages_[s][b].forward(tape, x, pyramid.conv[s], nullptr, mode);
    }
    out.push_back(x);
  }
  return out;
}

}  // namespace jsenet
