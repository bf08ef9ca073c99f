#include "modex/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "modex/error.hpp"

namespace modex {
namespace {

std::string shape_str(const Tensor& t) {
  return "(" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + ")";
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorCode::kShapeMismatch,
              std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

// Accumulates `delta` into `*grad`, allocating on first use.
void accumulate(Tensor* grad, const Tensor& delta) {
  if (grad->empty()) {
    *grad = delta;
    return;
  }
  auto g = grad->data();
  auto d = delta.data();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i];
}

Tensor& ensure(Tensor* grad, std::size_t rows, std::size_t cols) {
  if (grad->empty()) *grad = Tensor(rows, cols);
  return *grad;
}

// c += a * b^T  (a: m x k, b: n x k, c: m x n)
void matmul_abt_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ar = a.row(i);
    auto cr = c.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto br = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < ar.size(); ++k) s += ar[k] * br[k];
      cr[j] += s;
    }
  }
}

// c += a^T * b  (a: k x m, b: k x n, c: m x n)
void matmul_atb_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const auto ar = a.row(k);
    const auto br = b.row(k);
    for (std::size_t i = 0; i < ar.size(); ++i) {
      const double aki = ar[i];
      if (aki == 0.0) continue;
      auto cr = c.row(i);
      for (std::size_t j = 0; j < br.size(); ++j) cr[j] += aki * br[j];
    }
  }
}

template <typename F, typename D>
Var unary(Tape& tape, Var x, F forward, D derivative) {
  const Tensor& in = tape.value(x);
  Tensor out(in.rows(), in.cols());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  return tape.record(std::move(out), {x},
                     [x, derivative](const Tape& t, const Tensor& g, std::span<Tensor* const> grads) {
                       if (!grads[0]) return;
                       const Tensor& in = t.value(x);
                       Tensor& gx = ensure(grads[0], in.rows(), in.cols());
                       for (std::size_t i = 0; i < in.size(); ++i) gx[i] += g[i] * derivative(in[i]);
                     });
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorCode::kShapeMismatch,
                "tensor data length " + std::to_string(data_.size()) + " does not match " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw Error(ErrorCode::kShapeMismatch, "ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(data));
}

Tensor Tensor::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(n, 1, std::move(values));
}

Var Tape::record(Tensor value, std::vector<Var> inputs, Vjp vjp) {
  bool needs = false;
  for (Var in : inputs) needs = needs || nodes_.at(in.id).requires_grad;
  needs = needs && vjp != nullptr;
  return record(std::move(value), std::move(inputs), std::move(vjp), needs);
}

Var Tape::record(Tensor value, std::vector<Var> inputs, Vjp vjp, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(vjp), requires_grad});
  return Var{nodes_.size() - 1};
}

Gradients Tape::backward(Var output) const {
  const Tensor& out = value(output);
  if (out.rows() != 1 || out.cols() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "backward expects a 1x1 output, got " + shape_str(out));
  }
  std::vector<Tensor> grads(nodes_.size());
  if (!nodes_[output.id].requires_grad) return Gradients(std::move(grads));
  grads[output.id] = Tensor::scalar(1.0);

  std::vector<Tensor*> buffers;
  for (std::size_t id = output.id + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!node.requires_grad || !node.vjp || grads[id].empty()) continue;
    buffers.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      if (nodes_[node.inputs[k].id].requires_grad) buffers[k] = &grads[node.inputs[k].id];
    }
    node.vjp(*this, grads[id], buffers);
  }
  return Gradients(std::move(grads));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  Tensor c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ar = a.row(i);
    auto cr = c.row(i);
    for (std::size_t k = 0; k < ar.size(); ++k) {
      const double aik = ar[k];
      if (aik == 0.0) continue;
      const auto br = b.row(k);
      for (std::size_t j = 0; j < br.size(); ++j) cr[j] += aik * br[j];
    }
  }
  return c;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var matmul(Tape& tape, Var a, Var b) {
  Tensor out = matmul(tape.value(a), tape.value(b));
  return tape.record(std::move(out), {a, b},
                     [a, b](const Tape& t, const Tensor& g, std::span<Tensor* const> grads) {
                       const Tensor& av = t.value(a);
                       const Tensor& bv = t.value(b);
                       if (grads[0]) matmul_abt_acc(g, bv, ensure(grads[0], av.rows(), av.cols()));
                       if (grads[1]) matmul_atb_acc(av, g, ensure(grads[1], bv.rows(), bv.cols()));
                     });
}

Var add(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  if (!av.same_shape(bv)) shape_mismatch("add", av, bv);
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return tape.record(std::move(out), {a, b},
                     [](const Tape&, const Tensor& g, std::span<Tensor* const> grads) {
                       if (grads[0]) accumulate(grads[0], g);
                       if (grads[1]) accumulate(grads[1], g);
                     });
}

Var add_row(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  if (bv.rows() != 1 || bv.cols() != av.cols()) shape_mismatch("add_row", av, bv);
  Tensor out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv[c];
  }
  return tape.record(std::move(out), {a, b},
                     [](const Tape&, const Tensor& g, std::span<Tensor* const> grads) {
                       if (grads[0]) accumulate(grads[0], g);
                       if (grads[1]) {
                         Tensor& gb = ensure(grads[1], 1, g.cols());
                         for (std::size_t r = 0; r < g.rows(); ++r) {
                           const auto row = g.row(r);
                           for (std::size_t c = 0; c < row.size(); ++c) gb[c] += row[c];
                         }
                       }
                     });
}

Var mul(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  if (!av.same_shape(bv)) shape_mismatch("mul", av, bv);
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.record(std::move(out), {a, b},
                     [a, b](const Tape& t, const Tensor& g, std::span<Tensor* const> grads) {
                       const Tensor& av = t.value(a);
                       const Tensor& bv = t.value(b);
                       if (grads[0]) {
                         Tensor& ga = ensure(grads[0], av.rows(), av.cols());
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                       }
                       if (grads[1]) {
                         Tensor& gb = ensure(grads[1], bv.rows(), bv.cols());
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                       }
                     });
}

Var scale_rows(Tape& tape, Var m, Var v) {
  const Tensor& mv = tape.value(m);
  const Tensor& vv = tape.value(v);
  if (vv.cols() != 1 || vv.rows() != mv.rows()) shape_mismatch("scale_rows", mv, vv);
  Tensor out = mv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (double& x : out.row(r)) x *= vv[r];
  }
  return tape.record(std::move(out), {m, v},
                     [m, v](const Tape& t, const Tensor& g, std::span<Tensor* const> grads) {
                       const Tensor& mv = t.value(m);
                       const Tensor& vv = t.value(v);
                       if (grads[0]) {
                         Tensor& gm = ensure(grads[0], mv.rows(), mv.cols());
                         for (std::size_t r = 0; r < g.rows(); ++r) {
                           const auto gr = g.row(r);
                           auto out = gm.row(r);
                           for (std::size_t c = 0; c < gr.size(); ++c) out[c] += gr[c] * vv[r];
                         }
                       }
                       if (grads[1]) {
                         Tensor& gv = ensure(grads[1], vv.rows(), 1);
                         for (std::size_t r = 0; r < g.rows(); ++r) {
                           const auto gr = g.row(r);
                           const auto mr = mv.row(r);
                           double s = 0.0;
                           for (std::size_t c = 0; c < gr.size(); ++c) s += gr[c] * mr[c];
                           gv[r] += s;
                         }
                       }
                     });
}

Var leaky_relu(Tape& tape, Var x, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "leaky_relu slope must lie in (0, 1)");
  }
  return unary(
      tape, x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

Var elu(Tape& tape, Var x) {
  return unary(
      tape, x, [](double v) { return v > 0.0 ? v : std::expm1(v); },
      [](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
}

Var sigmoid(Tape& tape, Var x) {
  return unary(
      tape, x, [](double v) { return stable_sigmoid(v); },
      [](double v) {
        const double s = stable_sigmoid(v);
        return s * (1.0 - s);
      });
}

Var concat(Tape& tape, std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "concat of zero tensors");
  if (axis > 1) throw Error(ErrorCode::kInvalidArgument, "concat axis must be 0 or 1");
  const Tensor& first = tape.value(parts[0]);
  std::size_t rows = 0;
  std::size_t cols = 0;
  for (Var p : parts) {
    const Tensor& v = tape.value(p);
    if (axis == 0) {
      if (v.cols() != first.cols()) shape_mismatch("concat", first, v);
      rows += v.rows();
      cols = v.cols();
    } else {
      if (v.rows() != first.rows()) shape_mismatch("concat", first, v);
      cols += v.cols();
      rows = v.rows();
    }
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& v = tape.value(p);
    for (std::size_t r = 0; r < v.rows(); ++r) {
      for (std::size_t c = 0; c < v.cols(); ++c) {
        if (axis == 0) {
          out(offset + r, c) = v(r, c);
        } else {
          out(r, offset + c) = v(r, c);
        }
      }
    }
    offset += axis == 0 ? v.rows() : v.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.record(std::move(out), inputs,
                     [inputs, axis](const Tape& t, const Tensor& g, std::span<Tensor* const> grads) {
                       std::size_t offset = 0;
                       for (std::size_t k = 0; k < inputs.size(); ++k) {
                         const Tensor& v = t.value(inputs[k]);
                         if (grads[k]) {
                           Tensor& gk = ensure(grads[k], v.rows(), v.cols());
                           for (std::size_t r = 0; r < v.rows(); ++r) {
                             for (std::size_t c = 0; c < v.cols(); ++c) {
                               gk(r, c) += axis == 0 ? g(offset + r, c) : g(r, offset + c);
                             }
                           }
                         }
                         offset += axis == 0 ? v.rows() : v.cols();
                       }
                     });
}

Var gather_rows(Tape& tape, Var x, std::span<const std::size_t> rows) {
  const Tensor& xv = tape.value(x);
  Tensor out(rows.size(), xv.cols());
  for (std::size_t e = 0; e < rows.size(); ++e) {
    if (rows[e] >= xv.rows()) {
      throw Error(ErrorCode::kIndexOutOfRange, "gather_rows index " + std::to_string(rows[e]) +
                                                   " >= " + std::to_string(xv.rows()));
    }
    std::copy_n(xv.row(rows[e]).begin(), xv.cols(), out.row(e).begin());
  }
  std::vector<std::size_t> index(rows.begin(), rows.end());
  return tape.record(std::move(out), {x},
                     [x, index = std::move(index)](const Tape& t, const Tensor& g,
                                                   std::span<Tensor* const> grads) {
                       if (!grads[0]) return;
                       const Tensor& xv = t.value(x);
                       Tensor& gx = ensure(grads[0], xv.rows(), xv.cols());
                       for (std::size_t e = 0; e < index.size(); ++e) {
                         const auto gr = g.row(e);
                         auto out = gx.row(index[e]);
                         for (std::size_t c = 0; c < gr.size(); ++c) out[c] += gr[c];
                       }
                     });
}

Var segment_sum(Tape& tape, Var x, std::span<const std::size_t> segments,
                std::size_t segment_count) {
  const Tensor& xv = tape.value(x);
  if (segments.size() != xv.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "segment_sum: " + std::to_string(segments.size()) +
                                               " segment ids for " + std::to_string(xv.rows()) +
                                               " rows");
  }
  Tensor out(segment_count, xv.cols());
  for (std::size_t e = 0; e < segments.size(); ++e) {
    if (segments[e] >= segment_count) {
      throw Error(ErrorCode::kIndexOutOfRange, "segment id out of range");
    }
    const auto xr = xv.row(e);
    auto orow = out.row(segments[e]);
    for (std::size_t c = 0; c < xr.size(); ++c) orow[c] += xr[c];
  }
  std::vector<std::size_t> seg(segments.begin(), segments.end());
  return tape.record(std::move(out), {x},
                     [x, seg = std::move(seg)](const Tape& t, const Tensor& g,
                                               std::span<Tensor* const> grads) {
                       if (!grads[0]) return;
                       const Tensor& xv = t.value(x);
                       Tensor& gx = ensure(grads[0], xv.rows(), xv.cols());
                       for (std::size_t e = 0; e < seg.size(); ++e) {
                         const auto gr = g.row(seg[e]);
                         auto out = gx.row(e);
                         for (std::size_t c = 0; c < gr.size(); ++c) out[c] += gr[c];
                       }
                     });
}

Var segment_softmax(Tape& tape, Var logits, std::span<const std::size_t> segments) {
  const Tensor& lv = tape.value(logits);
  if (lv.cols() != 1 || segments.size() != lv.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "segment_softmax expects an E x 1 column and E ids");
  }
  for (std::size_t e = 1; e < segments.size(); ++e) {
    if (segments[e] < segments[e - 1]) {
      throw Error(ErrorCode::kUnsortedSegments,
                  "segment ids must be non-decreasing (position " + std::to_string(e) + ")");
    }
  }
  Tensor out(lv.rows(), 1);
  for (std::size_t begin = 0; begin < segments.size();) {
    std::size_t end = begin;
    double peak = lv[begin];
    while (end < segments.size() && segments[end] == segments[begin]) {
      peak = std::max(peak, lv[end]);
      ++end;
    }
    double total = 0.0;
    for (std::size_t e = begin; e < end; ++e) {
      out[e] = std::exp(lv[e] - peak);
      total += out[e];
    }
    for (std::size_t e = begin; e < end; ++e) out[e] /= total;
    begin = end;
  }
  const std::size_t self = tape.size();
  std::vector<std::size_t> seg(segments.begin(), segments.end());
  return tape.record(std::move(out), {logits},
                     [self, seg = std::move(seg)](const Tape& t, const Tensor& g,
                                                  std::span<Tensor* const> grads) {
                       if (!grads[0]) return;
                       const Tensor& y = t.value(Var{self});
                       Tensor& gx = ensure(grads[0], y.rows(), 1);
                       for (std::size_t begin = 0; begin < seg.size();) {
                         std::size_t end = begin;
                         double dot = 0.0;
                         while (end < seg.size() && seg[end] == seg[begin]) {
                           dot += y[end] * g[end];
                           ++end;
                         }
                         for (std::size_t e = begin; e < end; ++e) gx[e] += y[e] * (g[e] - dot);
                         begin = end;
                       }
                     });
}

Var mean_rows(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  if (xv.rows() == 0) throw Error(ErrorCode::kShapeMismatch, "mean_rows of an empty tensor");
  Tensor out(1, xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const auto row = xv.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c];
  }
  const double inv = 1.0 / static_cast<double>(xv.rows());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] *= inv;
  return tape.record(std::move(out), {x},
                     [x](const Tape& t, const Tensor& g, std::span<Tensor* const> grads) {
                       if (!grads[0]) return;
                       const Tensor& xv = t.value(x);
                       Tensor& gx = ensure(grads[0], xv.rows(), xv.cols());
                       const double inv = 1.0 / static_cast<double>(xv.rows());
                       for (std::size_t r = 0; r < xv.rows(); ++r) {
                         auto out = gx.row(r);
                         for (std::size_t c = 0; c < out.size(); ++c) out[c] += g[c] * inv;
                       }
                     });
}

Var replace_row(Tape& tape, Var base, std::size_t index, Var row) {
  const Tensor& bv = tape.value(base);
  const Tensor& rv = tape.value(row);
  if (rv.rows() != 1 || rv.cols() != bv.cols()) shape_mismatch("replace_row", bv, rv);
  if (index >= bv.rows()) throw Error(ErrorCode::kIndexOutOfRange, "replace_row index out of range");
  Tensor out = bv;
  std::copy_n(rv.data().begin(), rv.cols(), out.row(index).begin());
  return tape.record(std::move(out), {base, row},
                     [index](const Tape&, const Tensor& g, std::span<Tensor* const> grads) {
                       if (grads[0]) {
                         Tensor masked = g;
                         for (double& v : masked.row(index)) v = 0.0;
                         accumulate(grads[0], masked);
                       }
                       if (grads[1]) {
                         Tensor& gr = ensure(grads[1], 1, g.cols());
                         const auto src = g.row(index);
                         for (std::size_t c = 0; c < src.size(); ++c) gr[c] += src[c];
                       }
                     });
}

Var pick(Tape& tape, Var x, std::size_t r, std::size_t c) {
  const Tensor& xv = tape.value(x);
  if (r >= xv.rows() || c >= xv.cols()) throw Error(ErrorCode::kIndexOutOfRange, "pick out of range");
  return tape.record(Tensor::scalar(xv(r, c)), {x},
                     [x, r, c](const Tape& t, const Tensor& g, std::span<Tensor* const> grads) {
                       if (!grads[0]) return;
                       const Tensor& xv = t.value(x);
                       ensure(grads[0], xv.rows(), xv.cols())(r, c) += g[0];
                     });
}

Var sum(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  double s = 0.0;
  for (double v : xv.data()) s += v;
  return tape.record(Tensor::scalar(s), {x},
                     [x](const Tape& t, const Tensor& g, std::span<Tensor* const> grads) {
                       if (!grads[0]) return;
                       const Tensor& xv = t.value(x);
                       Tensor& gx = ensure(grads[0], xv.rows(), xv.cols());
                       for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
                     });
}

Var bce_loss(Tape& tape, Var p, std::span<const double> targets, std::span<const double> mask) {
  const Tensor& pv = tape.value(p);
  if (pv.size() != targets.size() || pv.size() != mask.size()) {
    throw Error(ErrorCode::kShapeMismatch, "bce_loss: probabilities, targets and mask differ in length");
  }
  double count = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (mask[i] == 0.0) continue;
    const double q = std::clamp(pv[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total += -(targets[i] * std::log(q) + (1.0 - targets[i]) * std::log(1.0 - q));
    count += 1.0;
  }
  if (count == 0.0) throw Error(ErrorCode::kEmptyMask, "bce_loss: mask selects no entries");
  std::vector<double> t(targets.begin(), targets.end());
  std::vector<double> m(mask.begin(), mask.end());
  return tape.record(Tensor::scalar(total / count), {p},
                     [p, t = std::move(t), m = std::move(m), count](
                         const Tape& tp, const Tensor& g, std::span<Tensor* const> grads) {
                       if (!grads[0]) return;
                       const Tensor& pv = tp.value(p);
                       Tensor& gp = ensure(grads[0], pv.rows(), pv.cols());
                       for (std::size_t i = 0; i < pv.size(); ++i) {
                         if (m[i] == 0.0) continue;
                         const double q = pv[i];
                         if (q < kProbabilityClamp || q > 1.0 - kProbabilityClamp) continue;
                         gp[i] += g[0] * (-t[i] / q + (1.0 - t[i]) / (1.0 - q)) / count;
                       }
                     });
}

double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double eps) {
  Tape tape;
  const Var leaf = tape.leaf(x);
  const Var out = f(tape, leaf);
  const Gradients grads = tape.backward(out);
  const Tensor analytic = grads.has(leaf) ? grads[leaf] : Tensor(x.rows(), x.cols());

  auto evaluate = [&](const Tensor& point) {
    Tape probe;
    return probe.value(f(probe, probe.leaf(point)))[0];
  };

  double worst_diff = 0.0;
  double scale = 0.0;
  Tensor point = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    point[i] = x[i] + eps;
    const double up = evaluate(point);
    point[i] = x[i] - eps;
    const double down = evaluate(point);
    point[i] = x[i];
    const double numeric = (up - down) / (2.0 * eps);
    worst_diff = std::max(worst_diff, std::abs(analytic[i] - numeric));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric)});
  }
  return scale < 1e-8 ? worst_diff : worst_diff / scale;
}

}  // namespace modex
