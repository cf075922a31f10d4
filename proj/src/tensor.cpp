#include "jsenet/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace jsenet {

namespace {

using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;

MatrixMap as_matrix(std::span<Real> values, std::size_t rows, std::size_t cols) {
  return MatrixMap(values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}


[[noreturn]] void dimension_error(std::string_view op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                       " and " + shape_string(b.shape()));
}

Tensor result_like(Shape shape, std::initializer_list<const Tensor*> inputs) {
  bool grad = false;
  for (const Tensor* t : inputs) grad = grad || t->requires_grad();
  return Tensor::zeros(std::move(shape), grad);
}

Shape matrix_shape(std::size_t rows, std::size_t cols) { return {rows, cols}; }

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ')';
  return out.str();
}

void IndexGroups::push_group(std::span<const std::uint32_t> members) {
  indices.insert(indices.end(), members.begin(), members.end());
  offsets.push_back(static_cast<std::uint32_t>(indices.size()));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto node = std::make_shared<TensorNode>();
  node->data.assign(shape_size(shape), Real(0));
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, Real value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.data().begin(), t.data().end(), value);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<Real> values, bool requires_grad) {
  if (values.size() != shape_size(shape)) {
    throw DimensionError("tensor: " + std::to_string(values.size()) +
                         " values do not fill shape " + shape_string(shape));
  }
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(Real value, bool requires_grad) { return from({}, {value}, requires_grad); }

std::size_t Tensor::rows() const {
  const Shape& s = node_->shape;
  if (s.empty()) return 1;
  return s[0];
}

std::size_t Tensor::cols() const {
  const Shape& s = node_->shape;
  if (s.size() < 2) return 1;
  return shape_size(s) / s[0];
}

Real Tensor::item() const {
  require(size() == 1, "item: tensor of shape " + shape_string(shape()) + " is not a scalar");
  return node_->data[0];
}

std::span<Real> Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->data.size(), Real(0)); }

Tensor Tensor::clone() const { return from(shape(), node_->data, false); }

void Tape::record(std::string_view op, std::vector<Tensor> inputs, Tensor output,
                  BackwardFn backward) {
  records_.push_back({op, std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  require(loss.defined() && loss.size() == 1,
          "backward: loss must be a scalar, got shape " + shape_string(loss.shape()));
  require(!records_.empty(), "backward: tape is empty");
  loss.node()->ensure_grad();
  loss.node()->grad[0] = Real(1);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    it->output.node()->ensure_grad();
    it->backward();
  }
  records_.clear();
}

namespace ops {

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) dimension_error("matmul", a, b);
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor out = result_like(matrix_shape(n, m), {&a, &b});
  as_matrix(out.data(), n, m).noalias() = as_matrix(a.data(), n, k) * as_matrix(b.data(), k, m);
  if (out.requires_grad()) {
    tape.record("matmul", {a, b}, out, [a, b, out, n, k, m]() mutable {
      auto g = as_matrix(std::as_const(out).grad(), n, m);
      if (a.requires_grad()) as_matrix(a.grad(), n, k).noalias() += g * as_matrix(b.data(), k, m).transpose();
      if (b.requires_grad()) as_matrix(b.grad(), k, m).noalias() += as_matrix(a.data(), n, k).transpose() * g;
    });
  }
  return out;
}

namespace {

// Shared body for add/sub: out = a + sign * b with optional row broadcast of b.
Tensor add_signed(Tape& tape, std::string_view name, const Tensor& a, const Tensor& b, Real sign) {
  const bool same = a.shape() == b.shape();
  const bool broadcast = !same && b.rows() == 1 && b.cols() == a.cols() && a.rank() == 2;
  if (!same && !broadcast) dimension_error(name, a, b);
  Tensor out = result_like(a.shape(), {&a, &b});
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  const std::size_t cols = a.cols();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + sign * y[broadcast ? i % cols : i];
  if (out.requires_grad()) {
    tape.record(name, {a, b}, out, [a, b, out, sign, broadcast, cols]() mutable {
      auto g = std::as_const(out).grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[broadcast ? i % cols : i] += sign * g[i];
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) { return add_signed(tape, "add", a, b, 1); }

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) { return add_signed(tape, "sub", a, b, -1); }

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) dimension_error("mul", a, b);
  Tensor out = result_like(a.shape(), {&a, &b});
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  if (out.requires_grad()) {
    tape.record("mul", {a, b}, out, [a, b, out]() mutable {
      auto g = std::as_const(out).grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        auto y = std::as_const(b).data();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        auto x = std::as_const(a).data();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
      }
    });
  }
  return out;
}

Tensor affine(Tape& tape, const Tensor& a, Real alpha, Real beta) {
  Tensor out = result_like(a.shape(), {&a});
  auto o = out.data();
  auto x = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = alpha * x[i] + beta;
  if (out.requires_grad()) {
    tape.record("affine", {a}, out, [a, out, alpha]() mutable {
      auto g = std::as_const(out).grad();
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += alpha * g[i];
    });
  }
  return out;
}

Tensor concat(Tape& tape, const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  bool grad = false;
  for (const Tensor& p : parts) {
    if (p.rows() != rows) dimension_error("concat", parts.front(), p);
    cols += p.cols();
    grad = grad || p.requires_grad();
  }
  Tensor out = Tensor::zeros(matrix_shape(rows, cols), grad);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t pc = p.cols();
    auto src = p.data();
    auto dst = out.data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(src.begin() + r * pc, pc, dst.begin() + r * cols + offset);
    offset += pc;
  }
  if (grad) {
    tape.record("concat", parts, out, [parts, out, rows, cols]() mutable {
      auto g = std::as_const(out).grad();
      std::size_t offset = 0;
      for (const Tensor& p : parts) {
        const std::size_t pc = p.cols();
        if (p.requires_grad()) {
          auto gp = p.grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < pc; ++c) gp[r * pc + c] += g[r * cols + offset + c];
        }
        offset += pc;
      }
    });
  }
  return out;
}

Tensor slice_column(Tape& tape, const Tensor& a, std::size_t begin, std::size_t end) {
  const std::size_t rows = a.rows(), cols = a.cols();
  if (begin >= end || end > cols) {
    throw DimensionError("slice_column: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") outside shape " + shape_string(a.shape()));
  }
  const std::size_t width = end - begin;
  Tensor out = result_like(matrix_shape(rows, width), {&a});
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(src.begin() + r * cols + begin, width, dst.begin() + r * width);
  if (out.requires_grad()) {
    tape.record("slice_column", {a}, out, [a, out, rows, cols, begin, width]() mutable {
      auto g = std::as_const(out).grad();
      auto ga = a.grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < width; ++c) ga[r * cols + begin + c] += g[r * width + c];
    });
  }
  return out;
}

Tensor gather_rows(Tape& tape, const Tensor& a, std::span<const std::uint32_t> indices) {
  const std::size_t rows = a.rows(), cols = a.cols();
  for (std::uint32_t i : indices) {
    if (i >= rows) {
      throw DimensionError("gather_rows: index " + std::to_string(i) + " out of range for shape " +
                           shape_string(a.shape()));
    }
  }
  Tensor out = result_like(matrix_shape(indices.size(), cols), {&a});
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t r = 0; r < indices.size(); ++r)
    std::copy_n(src.begin() + indices[r] * cols, cols, dst.begin() + r * cols);
  if (out.requires_grad()) {
    std::vector<std::uint32_t> idx(indices.begin(), indices.end());
    tape.record("gather_rows", {a}, out, [a, out, idx = std::move(idx), cols]() mutable {
      auto g = std::as_const(out).grad();
      auto ga = a.grad();
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < cols; ++c) ga[idx[r] * cols + c] += g[r * cols + c];
    });
  }
  return out;
}

Tensor scatter_add_rows(Tape& tape, const Tensor& a, std::span<const std::uint32_t> indices,
                        std::size_t out_rows) {
  const std::size_t cols = a.cols();
  if (indices.size() != a.rows()) {
    throw DimensionError("scatter_add_rows: " + std::to_string(indices.size()) +
                         " indices for shape " + shape_string(a.shape()));
  }
  for (std::uint32_t i : indices) {
    if (i >= out_rows) {
      throw DimensionError("scatter_add_rows: index " + std::to_string(i) + " >= " +
                           std::to_string(out_rows));
    }
  }
  Tensor out = result_like(matrix_shape(out_rows, cols), {&a});
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t r = 0; r < indices.size(); ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[indices[r] * cols + c] += src[r * cols + c];
  if (out.requires_grad()) {
    std::vector<std::uint32_t> idx(indices.begin(), indices.end());
    tape.record("scatter_add_rows", {a}, out, [a, out, idx = std::move(idx), cols]() mutable {
      auto g = std::as_const(out).grad();
      auto ga = a.grad();
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += g[idx[r] * cols + c];
    });
  }
  return out;
}

namespace {

// Elementwise op whose derivative is a function of (input, output).
template <typename Forward, typename Derivative>
Tensor unary_elementwise(Tape& tape, std::string_view name, const Tensor& a, Forward f,
                         Derivative df) {
  Tensor out = result_like(a.shape(), {&a});
  auto o = out.data();
  auto x = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(x[i]);
  if (out.requires_grad()) {
    tape.record(name, {a}, out, [a, out, df]() mutable {
      auto g = std::as_const(out).grad();
      auto y = std::as_const(out).data();
      auto x = std::as_const(a).data();
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
    });
  }
  return out;
}

}  // namespace

Tensor leaky_relu(Tape& tape, const Tensor& a, Real slope) {
  return unary_elementwise(
      tape, "leaky_relu", a, [slope](Real x) { return x > 0 ? x : slope * x; },
      [slope](Real x, Real) { return x > 0 ? Real(1) : slope; });
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
  return unary_elementwise(
      tape, "sigmoid", a,
      [](Real x) {
        if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
        const Real e = std::exp(x);
        return e / (Real(1) + e);
      },
      [](Real, Real y) { return y * (Real(1) - y); });
}

Tensor log(Tape& tape, const Tensor& a) {
  return unary_elementwise(
      tape, "log", a, [](Real x) { return std::log(std::clamp(x, kLogClampLow, kLogClampHigh)); },
      [](Real x, Real) {
        return (x < kLogClampLow || x > kLogClampHigh) ? Real(0) : Real(1) / x;
      });
}

Tensor abs(Tape& tape, const Tensor& a) {
  return unary_elementwise(
      tape, "abs", a, [](Real x) { return std::abs(x); },
      [](Real x, Real) { return x > 0 ? Real(1) : (x < 0 ? Real(-1) : Real(0)); });
}

Tensor clamp(Tape& tape, const Tensor& a, Real low, Real high) {
  require(low <= high, "clamp: low > high");
  return unary_elementwise(
      tape, "clamp", a, [low, high](Real x) { return std::clamp(x, low, high); },
      [low, high](Real x, Real) { return (x < low || x > high) ? Real(0) : Real(1); });
}

Tensor softmax_rows(Tape& tape, const Tensor& a) {
  const std::size_t rows = a.rows(), cols = a.cols();
  Tensor out = result_like(a.shape(), {&a});
  auto x = a.data();
  auto y = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* in = x.data() + r * cols;
    Real* o = y.data() + r * cols;
    const Real peak = *std::max_element(in, in + cols);
    Real total = 0;
    for (std::size_t c = 0; c < cols; ++c) total += (o[c] = std::exp(in[c] - peak));
    for (std::size_t c = 0; c < cols; ++c) o[c] /= total;
  }
  if (out.requires_grad()) {
    tape.record("softmax_rows", {a}, out, [a, out, rows, cols]() mutable {
      auto g = std::as_const(out).grad();
      auto y = std::as_const(out).data();
      auto ga = a.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        Real dot = 0;
        for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * y[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c)
          ga[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dot);
      }
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& a) {
  Tensor out = result_like({}, {&a});
  Real total = 0;
  for (Real v : a.data()) total += v;
  out.data()[0] = total;
  if (out.requires_grad()) {
    tape.record("sum", {a}, out, [a, out]() mutable {
      const Real g = std::as_const(out).grad()[0];
      for (Real& v : a.grad()) v += g;
    });
  }
  return out;
}

Tensor mean(Tape& tape, const Tensor& a) {
  require(a.size() > 0, "mean: empty tensor");
  return affine(tape, sum(tape, a), Real(1) / static_cast<Real>(a.size()), 0);
}

Tensor mean_over_index_groups(Tape& tape, const Tensor& a, const IndexGroups& groups) {
  const std::size_t rows = a.rows(), cols = a.cols();
  const std::size_t n = groups.size();
  for (std::size_t g = 0; g < n; ++g) {
    if (groups.group_size(g) == 0) {
      throw DegenerateGroupError("mean_over_index_groups: group " + std::to_string(g) + " is empty");
    }
  }
  for (std::uint32_t i : groups.indices) {
    if (i >= rows) {
      throw DimensionError("mean_over_index_groups: index " + std::to_string(i) +
                           " out of range for shape " + shape_string(a.shape()));
    }
  }
  Tensor out = result_like(matrix_shape(n, cols), {&a});
  auto x = a.data();
  auto y = out.data();
  for (std::size_t g = 0; g < n; ++g) {
    Real* o = y.data() + g * cols;
    for (std::uint32_t i : groups.group(g))
      for (std::size_t c = 0; c < cols; ++c) o[c] += x[i * cols + c];
    const Real count = static_cast<Real>(groups.group_size(g));
    for (std::size_t c = 0; c < cols; ++c) o[c] /= count;
  }
  if (out.requires_grad()) {
    tape.record("mean_over_index_groups", {a}, out, [a, out, groups, n, cols]() mutable {
      auto gy = std::as_const(out).grad();
      auto ga = a.grad();
      for (std::size_t g = 0; g < n; ++g) {
        const Real inv = Real(1) / static_cast<Real>(groups.group_size(g));
        for (std::uint32_t i : groups.group(g))
          for (std::size_t c = 0; c < cols; ++c) ga[i * cols + c] += gy[g * cols + c] * inv;
      }
    });
  }
  return out;
}

Tensor mean_deviation_over_index_groups(Tape& tape, const Tensor& a, const IndexGroups& groups) {
  const std::size_t rows = a.rows(), cols = a.cols();
  if (groups.size() != rows) {
    throw DimensionError("mean_deviation_over_index_groups: " + std::to_string(groups.size()) + " groups for shape " +
                         shape_string(a.shape()));
  }
  for (std::size_t g = 0; g < rows; ++g) {
    if (groups.group_size(g) == 0) {
      throw DegenerateGroupError("mean_deviation_over_index_groups: group " + std::to_string(g) + " is empty");
    }
  }
  for (std::uint32_t i : groups.indices) {
    if (i >= rows) {
      throw DimensionError("mean_deviation_over_index_groups: index " + std::to_string(i) +
                           " out of range for shape " + shape_string(a.shape()));
    }
  }
  Tensor out = result_like(matrix_shape(rows, cols), {&a});
  auto x = a.data();
  auto y = out.data();
  for (std::size_t g = 0; g < rows; ++g) {
    Real* o = y.data() + g * cols;
    const Real* self = x.data() + g * cols;
    for (std::uint32_t i : groups.group(g))
      for (std::size_t c = 0; c < cols; ++c) o[c] += x[i * cols + c] - self[c];
    const Real count = static_cast<Real>(groups.group_size(g));
    for (std::size_t c = 0; c < cols; ++c) o[c] /= count;
  }
  if (out.requires_grad()) {
    tape.record("mean_deviation_over_index_groups", {a}, out, [a, out, groups, rows, cols]() mutable {
      auto gy = std::as_const(out).grad();
      auto ga = a.grad();
      for (std::size_t g = 0; g < rows; ++g) {
        const Real inv = Real(1) / static_cast<Real>(groups.group_size(g));
        for (std::uint32_t i : groups.group(g))
          for (std::size_t c = 0; c < cols; ++c) ga[i * cols + c] += gy[g * cols + c] * inv;
        for (std::size_t c = 0; c < cols; ++c) ga[g * cols + c] -= gy[g * cols + c];
      }
    });
  }
  return out;
}

Tensor batch_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var, const BatchNormOptions& options) {
  const std::size_t rows = x.rows(), cols = x.cols();
  for (const Tensor* p : {&gamma, &beta, static_cast<const Tensor*>(&running_mean), static_cast<const Tensor*>(&running_var)}) {
    if (p->size() != cols) dimension_error("batch_norm", x, *p);
  }
  require(rows > 0, "batch_norm: empty batch");
  std::vector<Real> mu(cols), inv_std(cols);
  auto in = x.data();
  if (options.training) {
    std::vector<Real> var(cols, 0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) mu[c] += in[r * cols + c];
    for (auto& m : mu) m /= static_cast<Real>(rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        const Real d = in[r * cols + c] - mu[c];
        var[c] += d * d;
      }
    const Real unbias = rows > 1 ? static_cast<Real>(rows) / static_cast<Real>(rows - 1) : Real(1);
    auto rm = running_mean.data();
    auto rv = running_var.data();
    for (std::size_t c = 0; c < cols; ++c) {
      var[c] /= static_cast<Real>(rows);
      inv_std[c] = Real(1) / std::sqrt(var[c] + options.epsilon);
      rm[c] = options.momentum * rm[c] + (Real(1) - options.momentum) * mu[c];
      rv[c] = options.momentum * rv[c] + (Real(1) - options.momentum) * var[c] * unbias;
    }
  } else {
    auto rm = std::as_const(running_mean).data();
    auto rv = std::as_const(running_var).data();
    for (std::size_t c = 0; c < cols; ++c) {
      mu[c] = rm[c];
      inv_std[c] = Real(1) / std::sqrt(rv[c] + options.epsilon);
    }
  }
  Tensor out = result_like(x.shape(), {&x, &gamma, &beta});
  auto y = out.data();
  auto gm = gamma.data();
  auto bt = beta.data();
  std::vector<Real> xhat(in.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      xhat[i] = (in[i] - mu[c]) * inv_std[c];
      y[i] = gm[c] * xhat[i] + bt[c];
    }
  if (out.requires_grad()) {
    const bool training = options.training;
    tape.record("batch_norm", {x, gamma, beta}, out,
                [x, gamma, beta, out, xhat = std::move(xhat), inv_std = std::move(inv_std), rows,
                 cols, training]() mutable {
                  auto g = std::as_const(out).grad();
                  std::vector<Real> dgamma(cols, 0), dbeta(cols, 0);
                  for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) {
                      const std::size_t i = r * cols + c;
                      dgamma[c] += g[i] * xhat[i];
                      dbeta[c] += g[i];
                    }
                  if (gamma.requires_grad()) {
                    auto gg = gamma.grad();
                    for (std::size_t c = 0; c < cols; ++c) gg[c] += dgamma[c];
                  }
                  if (beta.requires_grad()) {
                    auto gb = beta.grad();
                    for (std::size_t c = 0; c < cols; ++c) gb[c] += dbeta[c];
                  }
                  if (!x.requires_grad()) return;
                  auto gx = x.grad();
                  auto gm = std::as_const(gamma).data();
                  const Real n = static_cast<Real>(rows);
                  for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) {
                      const std::size_t i = r * cols + c;
                      if (training) {
                        gx[i] += gm[c] * inv_std[c] *
                                 (g[i] - dbeta[c] / n - xhat[i] * dgamma[c] / n);
                      } else {
                        gx[i] += gm[c] * inv_std[c] * g[i];
                      }
                    }
                });
  }
  return out;
}

}  // namespace ops
}  // namespace jsenet
