#pragma once

// Dense row-major tensors with a reverse-mode tape.
//
// A Tensor is a shared handle: copies alias the same storage, so values
// recorded on a Tape stay alive until the tape is cleared. Most ops work on
// rank-2 tensors (rows x cols); rank-1 tensors are treated as n x 1 and
// rank-0 tensors as 1 x 1.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jsenet/errors.hpp"

namespace jsenet {

#ifdef JSENET_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Compressed list of index groups: group g is indices[offsets[g] .. offsets[g+1]).
// Used for neighbor lists, pooling groups and subsampling member lists.
struct IndexGroups {
  std::vector<std::uint32_t> offsets{0};
  std::vector<std::uint32_t> indices;

  std::size_t size() const { return offsets.size() - 1; }
  std::size_t total() const { return indices.size(); }
  std::span<const std::uint32_t> group(std::size_t g) const {
    return {indices.data() + offsets[g], indices.data() + offsets[g + 1]};
  }
  std::size_t group_size(std::size_t g) const { return offsets[g + 1] - offsets[g]; }
  void push_group(std::span<const std::uint32_t> members);
};

struct TensorNode {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // empty until first accumulated into
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), Real(0));
  }
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Real> values, bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  // Handle semantics: constness of the handle does not make the values const.
  std::span<Real> data() const { return node_->data; }
  Real& at(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }
  Real item() const;

  // Gradient accumulator; all zeros if nothing has been accumulated yet.
  std::span<Real> grad() const;
  void zero_grad();

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }

  // Deep copy of the values, detached from any tape.
  Tensor clone() const;

  TensorNode* node() const { return node_.get(); }
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<TensorNode> node_;
};

// Ordered record of differentiable ops. Inputs of an op always precede it;
// backward() replays the records in exact reverse order and then clears them.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  struct Record {
    std::string_view op;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  void record(std::string_view op, std::vector<Tensor> inputs, Tensor output, BackwardFn backward);
  void backward(const Tensor& loss);
  void clear() { records_.clear(); }
  std::size_t size() const { return records_.size(); }
  const std::vector<Record>& records() const { return records_; }

 private:
  std::vector<Record> records_;
};

namespace ops {

inline constexpr Real kLeakySlope = Real(0.1);
inline constexpr Real kLogClampLow = Real(1e-7);
inline constexpr Real kLogClampHigh = Real(1) - Real(1e-7);

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
// a + b; b may be a 1 x cols row, broadcast over the rows of a.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
// alpha * a + beta
Tensor affine(Tape& tape, const Tensor& a, Real alpha, Real beta);
Tensor concat(Tape& tape, const std::vector<Tensor>& parts);
Tensor slice_column(Tape& tape, const Tensor& a, std::size_t begin, std::size_t end);
Tensor gather_rows(Tape& tape, const Tensor& a, std::span<const std::uint32_t> indices);
Tensor scatter_add_rows(Tape& tape, const Tensor& a, std::span<const std::uint32_t> indices,
                        std::size_t out_rows);
Tensor leaky_relu(Tape& tape, const Tensor& a, Real slope = kLeakySlope);
Tensor softmax_rows(Tape& tape, const Tensor& a);
Tensor sigmoid(Tape& tape, const Tensor& a);
// Natural log of the input clamped to [kLogClampLow, kLogClampHigh].
Tensor log(Tape& tape, const Tensor& a);
Tensor abs(Tape& tape, const Tensor& a);
Tensor clamp(Tape& tape, const Tensor& a, Real low, Real high);
Tensor sum(Tape& tape, const Tensor& a);
Tensor mean(Tape& tape, const Tensor& a);
// Row g of the result is the mean of the rows of `a` listed in group g.
Tensor mean_over_index_groups(Tape& tape, const Tensor& a, const IndexGroups& groups);
// Row g is the mean of (a[i] - a[g]) over the rows i in group g; one group per
// row. Exactly zero wherever the group's rows equal row g.
Tensor mean_deviation_over_index_groups(Tape& tape, const Tensor& a, const IndexGroups& groups);

struct BatchNormOptions {
  Real momentum = Real(0.99);
  Real epsilon = Real(1e-5);
  bool training = true;
};

// Per-channel normalization over all rows. In training mode the batch
// statistics are used and folded into running_mean / running_var; otherwise
// the running statistics are used.
Tensor batch_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var, const BatchNormOptions& options);

}  // namespace ops
}  // namespace jsenet
