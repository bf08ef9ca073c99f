#pragma once

// Dense row-major tensors with a tape-based reverse-mode differentiator.
// Only the primitives the classifier and its explainers need are provided;
// every primitive is rank-2 (column vectors are n x 1, scalars are 1 x 1).

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace modex {

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);
  // Row-major nested initializer, e.g. Tensor::from_rows({{1, 2}, {3, 4}}).
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor column(std::vector<double> values);
  static Tensor scalar(double value) { return Tensor(1, 1, value); }

  std::vector<std::size_t> shape() const { return {rows_, cols_}; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool operator==(const Tensor& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

class Tape;

// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

// Gradients of one backward pass, indexed by Var.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::vector<Tensor> grads) : grads_(std::move(grads)) {}
  // Empty tensor when no gradient reached `v`.
  const Tensor& operator[](Var v) const { return grads_.at(v.id); }
  bool has(Var v) const { return v.id < grads_.size() && !grads_[v.id].empty(); }

 private:
  std::vector<Tensor> grads_;
};

class Tape {
 public:
  // Vector-Jacobian product: given the upstream gradient, accumulate into the
  // inputs' gradient buffers. A null buffer means the input needs no gradient.
  using Vjp = std::function<void(const Tape&, const Tensor& upstream, std::span<Tensor* const>)>;

  Var leaf(Tensor value) { return record(std::move(value), {}, nullptr, true); }
  Var constant(Tensor value) { return record(std::move(value), {}, nullptr, false); }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Records a derived value. `vjp` may be null for outputs that never need a
  // gradient; requires_grad is inherited from the inputs.
  Var record(Tensor value, std::vector<Var> inputs, Vjp vjp);

  // Reverse sweep from a 1 x 1 output, visiting every node once in reverse
  // recording order.
  Gradients backward(Var output) const;

 private:
  struct Node {
    Tensor value;
    std::vector<Var> inputs;
    Vjp vjp;
    bool requires_grad = false;
  };
  Var record(Tensor value, std::vector<Var> inputs, Vjp vjp, bool requires_grad);

  std::vector<Node> nodes_;
};

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kProbabilityClamp = 1e-7;

// Primitives. All throw ShapeMismatch on incompatible operands.
Var matmul(Tape& tape, Var a, Var b);
Var add(Tape& tape, Var a, Var b);
// a (n x d) + b (1 x d), b broadcast over rows.
Var add_row(Tape& tape, Var a, Var b);
Var mul(Tape& tape, Var a, Var b);
// m (n x d) with row r scaled by v(r, 0).
Var scale_rows(Tape& tape, Var m, Var v);
Var leaky_relu(Tape& tape, Var x, double slope = kLeakySlope);
Var elu(Tape& tape, Var x);
Var sigmoid(Tape& tape, Var x);
// axis 0 stacks rows, axis 1 joins columns.
Var concat(Tape& tape, std::span<const Var> parts, std::size_t axis);
Var gather_rows(Tape& tape, Var x, std::span<const std::size_t> rows);
// out(segments[e], :) += x(e, :), with `segment_count` output rows.
Var segment_sum(Tape& tape, Var x, std::span<const std::size_t> segments,
                std::size_t segment_count);
// Softmax of an E x 1 column within runs of equal, ascending segment ids.
// Throws UnsortedSegments.
Var segment_softmax(Tape& tape, Var logits, std::span<const std::size_t> segments);
// Column means: n x d -> 1 x d.
Var mean_rows(Tape& tape, Var x);
// `base` with row `index` replaced by `row` (1 x d).
Var replace_row(Tape& tape, Var base, std::size_t index, Var row);
// 1 x 1 view of element (r, c).
Var pick(Tape& tape, Var x, std::size_t r, std::size_t c);
Var sum(Tape& tape, Var x);
// Mean binary cross-entropy over entries with mask != 0; p is clamped to
// [1e-7, 1 - 1e-7]. Throws EmptyMask.
Var bce_loss(Tape& tape, Var p, std::span<const double> targets, std::span<const double> mask);

// Plain (untaped) helpers shared by callers.
Tensor matmul(const Tensor& a, const Tensor& b);
double stable_sigmoid(double x);

// Relative error between the tape gradient of `f` at `x` and central
// differences with step `eps`: max_i |a_i - n_i| / max_i max(|a_i|, |n_i|).
// Scaling by the largest entry keeps entries far below the difference
// quotient's rounding floor from dominating. Falls back to the absolute error
// when every entry is below 1e-8.
double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double eps = 1e-5);

}  // namespace modex
