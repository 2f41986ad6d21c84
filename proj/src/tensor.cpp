#include "rnf/tensor.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rnf/errors.h"

namespace rnf {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::span<double> detail::TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data->size(), 0.0);
  return grad;
}

// ---------------------------------------------------------------------------
// Tensor

namespace {

std::shared_ptr<detail::TensorImpl> make_impl(Shape shape,
                                              std::vector<double> values,
                                              bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " holds " +
                         std::to_string(shape_numel(shape)) +
                         " elements but " + std::to_string(values.size()) +
                         " values were given");
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::make_shared<std::vector<double>>(std::move(values));
  impl->requires_grad = requires_grad;
  return impl;
}

}  // namespace

Tensor::Tensor() : impl_(make_impl(Shape{}, {0.0}, false)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  return Tensor(make_impl(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from(Shape{}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const auto n = values.size();
  return from(Shape{n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(
    std::initializer_list<std::initializer_list<double>> rows,
    bool requires_grad) {
  std::vector<double> values;
  const std::size_t cols = rows.size() ? rows.begin()->size() : 0;
  for (const auto& r : rows) {
    if (r.size() != cols) throw DimensionError("ragged matrix literal");
    values.insert(values.end(), r.begin(), r.end());
  }
  return from(Shape{rows.size(), cols}, std::move(values), requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ArgumentError("axis " + std::to_string(axis) +
                        " out of range for shape " + shape_to_string(shape()));
  }
  return impl_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ArgumentError("item() on tensor of shape " +
                        shape_to_string(shape()));
  }
  return (*impl_->data)[0];
}

double Tensor::at(std::size_t i) const { return impl_->data->at(i); }

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw ArgumentError("at(row, col) needs a rank-2 tensor");
  return impl_->data->at(row * impl_->shape[1] + col);
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return impl_->grad;
}

Tensor Tensor::alias_leaf() const {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  impl->requires_grad = impl_->requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::detach() const {
  auto t = alias_leaf();
  t.set_requires_grad(false);
  return t;
}

Tensor Tensor::clone() const {
  return from(shape(), *impl_->data, false);
}

// ---------------------------------------------------------------------------
// Tape

namespace {

thread_local Tape tl_default_tape;
thread_local Tape* tl_current_tape = nullptr;
thread_local bool tl_grad_enabled = true;

void accumulate(detail::TensorImpl& impl, std::span<const double> g) {
  auto buf = impl.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

}  // namespace

std::span<const double> TapeNode::output_grad(std::size_t k) const {
  return outputs[k]->grad;
}

std::span<double> TapeNode::input_grad(std::size_t i) const {
  auto& impl = *inputs[i];
  if (!impl.requires_grad) return {};
  return impl.grad_buffer();
}

void Tape::record(TapeNode node) { nodes_.push_back(std::move(node)); }

Tape& Tape::current() {
  return tl_current_tape ? *tl_current_tape : tl_default_tape;
}

void Tape::backward(const Tensor& loss, const Visitor& visit) {
  if (loss.numel() != 1) {
    throw ArgumentError("backward() needs a scalar loss, got shape " +
                        shape_to_string(loss.shape()));
  }
  const double one = 1.0;
  backward_from(loss, std::span<const double>(&one, 1), visit);
}

void Tape::backward_from(const Tensor& root, std::span<const double> seed,
                         const Visitor& visit) {
  if (seed.size() != root.numel()) {
    throw DimensionError("backward seed has " + std::to_string(seed.size()) +
                         " values for root of shape " +
                         shape_to_string(root.shape()));
  }
  if (!root.requires_grad()) {
    if (nodes_.empty()) {
      throw ArgumentError("backward() with an empty tape and a root that "
                          "does not require gradients");
    }
    throw ArgumentError("backward() root does not require gradients");
  }
  accumulate(*root.impl(), seed);
  run(visit);
}

void Tape::run(const Visitor& visit) {
  for (std::size_t k = nodes_.size(); k-- > 0;) {
    const TapeNode& node = nodes_[k];
    const bool any = std::any_of(
        node.outputs.begin(), node.outputs.end(),
        [](const auto& out) { return !out->grad.empty(); });
    if (!any) continue;
    if (visit) visit(k);
    node.backward(node);
  }
  nodes_.clear();
}

TapeScope::TapeScope(Tape& tape) : previous_(tl_current_tape) {
  tl_current_tape = &tape;
}

TapeScope::~TapeScope() { tl_current_tape = previous_; }

NoGradGuard::NoGradGuard() : previous_(tl_grad_enabled) {
  tl_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { tl_grad_enabled = previous_; }

bool grad_enabled() { return tl_grad_enabled; }

void backward(const Tensor& loss) { Tape::current().backward(loss); }

Tensor record_op(Shape shape, std::vector<double> values,
                 const std::vector<Tensor>& inputs,
                 std::function<void(const TapeNode&)> rule) {
  const bool needs = grad_enabled() &&
                     std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
  Tensor out(make_impl(std::move(shape), std::move(values), needs));
  if (needs) {
    TapeNode node;
    node.inputs.reserve(inputs.size());
    for (const auto& t : inputs) node.inputs.push_back(t.impl());
    node.outputs.push_back(out.impl());
    node.backward = std::move(rule);
    Tape::current().record(std::move(node));
  }
  return out;
}

Tensor record_op(Shape shape, std::vector<double> values,
                 std::initializer_list<Tensor> inputs,
                 std::function<void(const TapeNode&)> rule) {
  return record_op(std::move(shape), std::move(values),
                   std::vector<Tensor>(inputs), std::move(rule));
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + " expects a rank-" +
                         std::to_string(rank) + " tensor, got " +
                         shape_to_string(t.shape()));
  }
}

// Output shape of a binary elementwise op under scalar/equal broadcasting.
Shape broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return a.shape();
  if (b.numel() == 1) return a.shape();
  if (a.numel() == 1) return b.shape();
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       shape_to_string(a.shape()) + " and " +
                       shape_to_string(b.shape()));
}

// Accumulates g into an input that may have been broadcast from a scalar.
void reduce_into(std::span<double> sink, std::span<const double> g,
                 const std::vector<double>& factor) {
  if (sink.empty()) return;
  if (sink.size() == g.size()) {
    for (std::size_t i = 0; i < g.size(); ++i) sink[i] += g[i] * factor[i];
  } else {
    double total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) total += g[i] * factor[i];
    sink[0] += total;
  }
}

Tensor binary(Elementwise op, const Tensor& a, const Tensor& b) {
  const char* name = op == Elementwise::Add   ? "add"
                     : op == Elementwise::Sub ? "sub"
                                              : "mul";
  Shape shape = broadcast_shape(a, b, name);
  const std::size_t n = shape_numel(shape);
  const auto ad = a.data();
  const auto bd = b.data();
  const bool a_scalar = ad.size() != n;
  const bool b_scalar = bd.size() != n;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ad[a_scalar ? 0 : i];
    const double y = bd[b_scalar ? 0 : i];
    switch (op) {
      case Elementwise::Add: out[i] = x + y; break;
      case Elementwise::Sub: out[i] = x - y; break;
      default: out[i] = x * y; break;
    }
  }
  return record_op(std::move(shape), std::move(out), {a, b},
                   [op, a_scalar, b_scalar, n](const TapeNode& node) {
    const auto g = node.output_grad();
    const auto& av = *node.inputs[0]->data;
    const auto& bv = *node.inputs[1]->data;
    std::vector<double> fa(n), fb(n);
    for (std::size_t i = 0; i < n; ++i) {
      switch (op) {
        case Elementwise::Add: fa[i] = 1.0; fb[i] = 1.0; break;
        case Elementwise::Sub: fa[i] = 1.0; fb[i] = -1.0; break;
        default:
          fa[i] = bv[b_scalar ? 0 : i];
          fb[i] = av[a_scalar ? 0 : i];
          break;
      }
    }
    reduce_into(node.input_grad(0), g, fa);
    reduce_into(node.input_grad(1), g, fb);
  });
}

}  // namespace

Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b) {
  switch (op) {
    case Elementwise::Add:
    case Elementwise::Sub:
    case Elementwise::Mul:
      return binary(op, a, b);
    default:
      throw ArgumentError("unary elementwise op given two arguments");
  }
}

Tensor elementwise(Elementwise op, const Tensor& a) {
  const auto x = a.data();
  std::vector<double> out(x.size());
  switch (op) {
    case Elementwise::Tanh:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
      break;
    case Elementwise::Sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = 1.0 / (1.0 + std::exp(-x[i]));
      }
      break;
    case Elementwise::Relu:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0 ? x[i] : 0.0;
      break;
    default:
      throw ArgumentError("binary elementwise op given one argument");
  }
  // The rule reads the op's own output for tanh/sigmoid derivatives.
  return record_op(a.shape(), std::move(out), {a}, [op](const TapeNode& node) {
    auto sink = node.input_grad(0);
    if (sink.empty()) return;
    const auto g = node.output_grad();
    const auto& y = *node.outputs[0]->data;
    const auto& x = *node.inputs[0]->data;
    for (std::size_t i = 0; i < g.size(); ++i) {
      switch (op) {
        case Elementwise::Tanh: sink[i] += g[i] * (1.0 - y[i] * y[i]); break;
        case Elementwise::Sigmoid: sink[i] += g[i] * y[i] * (1.0 - y[i]); break;
        default: sink[i] += x[i] > 0 ? g[i] : 0.0; break;
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(Elementwise::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(Elementwise::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(Elementwise::Mul, a, b); }
Tensor tanh(const Tensor& a) { return elementwise(Elementwise::Tanh, a); }
Tensor sigmoid(const Tensor& a) { return elementwise(Elementwise::Sigmoid, a); }
Tensor relu(const Tensor& a) { return elementwise(Elementwise::Relu, a); }

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= factor;
  return record_op(a.shape(), std::move(out), {a}, [factor](const TapeNode& node) {
    auto sink = node.input_grad(0);
    if (sink.empty()) return;
    const auto g = node.output_grad();
    for (std::size_t i = 0; i < g.size(); ++i) sink[i] += factor * g[i];
  });
}

Tensor one_minus(const Tensor& a) {
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - x[i];
  return record_op(a.shape(), std::move(out), {a}, [](const TapeNode& node) {
    auto sink = node.input_grad(0);
    if (sink.empty()) return;
    const auto g = node.output_grad();
    for (std::size_t i = 0; i < g.size(); ++i) sink[i] -= g[i];
  });
}

Tensor clamped_log(const Tensor& a, double lo, double hi) {
  if (!(lo > 0.0) || lo > hi) {
    throw ArgumentError("clamped_log needs 0 < lo <= hi");
  }
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::log(std::clamp(x[i], lo, hi));
  }
  return record_op(a.shape(), std::move(out), {a}, [lo, hi](const TapeNode& node) {
    auto sink = node.input_grad(0);
    if (sink.empty()) return;
    const auto g = node.output_grad();
    const auto& x = *node.inputs[0]->data;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] >= lo && x[i] <= hi) sink[i] += g[i] / x[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " +
                         shape_to_string(a.shape()) + " by " +
                         shape_to_string(b.shape()));
  }
  const std::size_t p = a.dim(0), q = a.dim(1), r = b.dim(1);
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> C(p * r, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = A[i * q + k];
      if (aik == 0.0) continue;
      const double* brow = &B[k * r];
      double* crow = &C[i * r];
      for (std::size_t j = 0; j < r; ++j) crow[j] += aik * brow[j];
    }
  }
  return record_op(Shape{p, r}, std::move(C), {a, b}, [p, q, r](const TapeNode& node) {
    const auto dC = node.output_grad();
    const auto& A = *node.inputs[0]->data;
    const auto& B = *node.inputs[1]->data;
    if (auto dA = node.input_grad(0); !dA.empty()) {
      // dA = dC * B^T
      for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t k = 0; k < q; ++k) {
          double acc = 0.0;
          for (std::size_t j = 0; j < r; ++j) acc += dC[i * r + j] * B[k * r + j];
          dA[i * q + k] += acc;
        }
      }
    }
    if (auto dB = node.input_grad(1); !dB.empty()) {
      // dB = A^T * dC
      for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t k = 0; k < q; ++k) {
          const double aik = A[i * q + k];
          for (std::size_t j = 0; j < r; ++j) dB[k * r + j] += aik * dC[i * r + j];
        }
      }
    }
  });
}

Tensor matvec(const Tensor& w, const Tensor& x) {
  if (w.rank() != 2 || x.rank() != 1 || w.dim(1) != x.dim(0)) {
    throw DimensionError("matvec: cannot multiply " +
                         shape_to_string(w.shape()) + " by " +
                         shape_to_string(x.shape()));
  }
  const std::size_t p = w.dim(0), q = w.dim(1);
  const auto W = w.data();
  const auto X = x.data();
  std::vector<double> y(p);
  for (std::size_t i = 0; i < p; ++i) {
    const double* wr = &W[i * q];
    double acc = 0.0;
    for (std::size_t j = 0; j < q; ++j) acc += wr[j] * X[j];
    y[i] = acc;
  }
  return record_op(Shape{p}, std::move(y), {w, x}, [p, q](const TapeNode& node) {
    const auto dy = node.output_grad();
    const auto& W = *node.inputs[0]->data;
    const auto& X = *node.inputs[1]->data;
    if (auto dW = node.input_grad(0); !dW.empty()) {
      for (std::size_t i = 0; i < p; ++i) {
        const double gi = dy[i];
        if (gi == 0.0) continue;
        double* row = &dW[i * q];
        for (std::size_t j = 0; j < q; ++j) row[j] += gi * X[j];
      }
    }
    if (auto dx = node.input_grad(1); !dx.empty()) {
      for (std::size_t i = 0; i < p; ++i) {
        const double gi = dy[i];
        if (gi == 0.0) continue;
        const double* row = &W[i * q];
        for (std::size_t j = 0; j < q; ++j) dx[j] += row[j] * gi;
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  const auto x = a.data();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  return record_op(Shape{c, r}, std::move(out), {a}, [r, c](const TapeNode& node) {
    auto sink = node.input_grad(0);
    if (sink.empty()) return;
    const auto g = node.output_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) sink[i * c + j] += g[j * r + i];
  });
}

Tensor add_column_bias(const Tensor& m, const Tensor& b) {
  require_rank(m, 2, "add_column_bias");
  require_rank(b, 1, "add_column_bias");
  if (b.dim(0) != m.dim(0)) {
    throw DimensionError("add_column_bias: bias " + shape_to_string(b.shape()) +
                         " does not match rows of " + shape_to_string(m.shape()));
  }
  const std::size_t r = m.dim(0), c = m.dim(1);
  std::vector<double> out(m.data().begin(), m.data().end());
  const auto bias = b.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bias[i];
  return record_op(m.shape(), std::move(out), {m, b}, [r, c](const TapeNode& node) {
    const auto g = node.output_grad();
    if (auto dm = node.input_grad(0); !dm.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) dm[i] += g[i];
    }
    if (auto db = node.input_grad(1); !db.empty()) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) db[i] += g[i * c + j];
    }
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation

Tensor concat(const std::vector<Tensor>& tensors, std::size_t axis) {
  if (tensors.empty()) throw ArgumentError("concat of an empty list");
  const Shape& first = tensors.front().shape();
  if (axis >= first.size()) {
    throw ArgumentError("concat axis " + std::to_string(axis) +
                        " out of range for shape " + shape_to_string(first));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];

  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const auto& t : tensors) {
    const Shape& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) ok = false;
    }
    if (!ok) {
      throw DimensionError("concat: shape " + shape_to_string(s) +
                           " incompatible with " + shape_to_string(first) +
                           " along axis " + std::to_string(axis));
    }
    extents.push_back(s[axis]);
    total += s[axis];
  }
  Shape shape = first;
  shape[axis] = total;
  std::vector<double> out(shape_numel(shape));
  std::size_t offset = 0;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    const auto src = tensors[t].data();
    const std::size_t block = extents[t] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src.begin() + o * block, block,
                  out.begin() + o * total * inner + offset * inner);
    }
    offset += extents[t];
  }
  return record_op(std::move(shape), std::move(out), tensors,
                   [extents, outer, inner, total](const TapeNode& node) {
    const auto g = node.output_grad();
    std::size_t offset = 0;
    for (std::size_t t = 0; t < extents.size(); ++t) {
      const std::size_t block = extents[t] * inner;
      if (auto sink = node.input_grad(t); !sink.empty()) {
        for (std::size_t o = 0; o < outer; ++o) {
          const double* src = &g[o * total * inner + offset * inner];
          double* dst = &sink[o * block];
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      }
      offset += extents[t];
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(a.shape()) +
                         " as " + shape_to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return record_op(std::move(shape), std::move(out), {a}, [](const TapeNode& node) {
    auto sink = node.input_grad(0);
    if (sink.empty()) return;
    const auto g = node.output_grad();
    for (std::size_t i = 0; i < g.size(); ++i) sink[i] += g[i];
  });
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
  require_rank(a, 2, "slice_rows");
  if (start + count > a.dim(0)) {
    throw ArgumentError("slice_rows: rows [" + std::to_string(start) + ", " +
                        std::to_string(start + count) + ") out of range for " +
                        shape_to_string(a.shape()));
  }
  const std::size_t cols = a.dim(1);
  const auto src = a.data();
  std::vector<double> out(src.begin() + start * cols,
                          src.begin() + (start + count) * cols);
  return record_op(Shape{count, cols}, std::move(out), {a},
                   [start, cols](const TapeNode& node) {
    auto sink = node.input_grad(0);
    if (sink.empty()) return;
    const auto g = node.output_grad();
    for (std::size_t i = 0; i < g.size(); ++i) sink[start * cols + i] += g[i];
  });
}

Tensor row(const Tensor& a, std::size_t index) {
  require_rank(a, 2, "row");
  if (index >= a.dim(0)) {
    throw ArgumentError("row " + std::to_string(index) +
                        " out of range for " + shape_to_string(a.shape()));
  }
  const std::size_t cols = a.dim(1);
  const auto src = a.data();
  std::vector<double> out(src.begin() + index * cols,
                          src.begin() + (index + 1) * cols);
  return record_op(Shape{cols}, std::move(out), {a},
                   [index, cols](const TapeNode& node) {
    auto sink = node.input_grad(0);
    if (sink.empty()) return;
    const auto g = node.output_grad();
    for (std::size_t i = 0; i < cols; ++i) sink[index * cols + i] += g[i];
  });
}

// ---------------------------------------------------------------------------
// Reductions

MaxResult max_over_axis(const Tensor& t, std::size_t axis) {
  if (t.rank() == 1 && axis == 0) {
    const auto x = t.data();
    if (x.empty()) throw ArgumentError("max_over_axis over an empty axis");
    const auto idx = static_cast<std::size_t>(
        std::max_element(x.begin(), x.end()) - x.begin());
    Tensor v = record_op(Shape{}, {x[idx]}, {t}, [idx](const TapeNode& node) {
      if (auto sink = node.input_grad(0); !sink.empty()) {
        sink[idx] += node.output_grad()[0];
      }
    });
    return {std::move(v), {idx}};
  }
  if (t.rank() != 2 || axis > 1) {
    throw ArgumentError("max_over_axis supports rank-1 or rank-2 tensors, got " +
                        shape_to_string(t.shape()) + " with axis " +
                        std::to_string(axis));
  }
  const std::size_t rows = t.dim(0), cols = t.dim(1);
  const std::size_t extent = axis == 1 ? cols : rows;
  const std::size_t count = axis == 1 ? rows : cols;
  if (extent == 0) throw ArgumentError("max_over_axis over an empty axis");
  const auto x = t.data();
  std::vector<double> values(count);
  std::vector<std::size_t> indices(count);
  // Flat position of the argmax for each output element, for the backward rule.
  std::vector<std::size_t> flat(count);
  for (std::size_t o = 0; o < count; ++o) {
    std::size_t best = 0;
    double best_value = axis == 1 ? x[o * cols] : x[o];
    for (std::size_t e = 1; e < extent; ++e) {
      const double v = axis == 1 ? x[o * cols + e] : x[e * cols + o];
      if (v > best_value) {
        best_value = v;
        best = e;
      }
    }
    values[o] = best_value;
    indices[o] = best;
    flat[o] = axis == 1 ? o * cols + best : best * cols + o;
  }
  Tensor v = record_op(Shape{count}, std::move(values), {t},
                       [flat](const TapeNode& node) {
    auto sink = node.input_grad(0);
    if (sink.empty()) return;
    const auto g = node.output_grad();
    for (std::size_t o = 0; o < flat.size(); ++o) sink[flat[o]] += g[o];
  });
  return {std::move(v), std::move(indices)};
}

Tensor sum(const Tensor& a) {
  const auto x = a.data();
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  return record_op(Shape{}, {total}, {a}, [](const TapeNode& node) {
    auto sink = node.input_grad(0);
    if (sink.empty()) return;
    const double g = node.output_grad()[0];
    for (auto& s : sink) s += g;
  });
}

Tensor mean(const std::vector<Tensor>& scalars) {
  if (scalars.empty()) throw ArgumentError("mean of an empty list");
  double total = 0.0;
  for (const auto& s : scalars) total += s.item();
  const double inv = 1.0 / static_cast<double>(scalars.size());
  return record_op(Shape{}, {total * inv}, scalars, [inv](const TapeNode& node) {
    const double g = node.output_grad()[0] * inv;
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      if (auto sink = node.input_grad(i); !sink.empty()) sink[0] += g;
    }
  });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || a.shape() != b.shape()) {
    throw DimensionError("dot: incompatible shapes " +
                         shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  const auto x = a.data();
  const auto y = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return record_op(Shape{}, {acc}, {a, b}, [](const TapeNode& node) {
    const double g = node.output_grad()[0];
    const auto& x = *node.inputs[0]->data;
    const auto& y = *node.inputs[1]->data;
    if (auto da = node.input_grad(0); !da.empty()) {
      for (std::size_t i = 0; i < y.size(); ++i) da[i] += g * y[i];
    }
    if (auto db = node.input_grad(1); !db.empty()) {
      for (std::size_t i = 0; i < x.size(); ++i) db[i] += g * x[i];
    }
  });
}

Tensor bilinear(const Tensor& a, const Tensor& M, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1 || M.rank() != 2 || M.dim(0) != a.numel() ||
      M.dim(1) != b.numel()) {
    throw DimensionError("bilinear: incompatible shapes " + shape_to_string(a.shape()) +
                         ", " + shape_to_string(M.shape()) + ", " +
                         shape_to_string(b.shape()));
  }
  const auto x = a.data();
  const auto m = M.data();
  const auto y = b.data();
  const std::size_t r = x.size(), c = y.size();
  const std::size_t sq = std::min(r, c);
  double acc = 0.0;
  for (std::size_t i = 0; i < sq; ++i) {
    acc += m[i * c + i] * (x[i] * y[i]);
    for (std::size_t j = i + 1; j < sq; ++j) {
      acc += m[i * c + j] * (x[i] * y[j]) + m[j * c + i] * (x[j] * y[i]);
    }
  }
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = (i < sq ? sq : 0); j < c; ++j) acc += m[i * c + j] * (x[i] * y[j]);
  }
  return record_op(Shape{}, {acc}, {a, M, b}, [r, c](const TapeNode& node) {
    const double g = node.output_grad()[0];
    const auto& x = *node.inputs[0]->data;
    const auto& m = *node.inputs[1]->data;
    const auto& y = *node.inputs[2]->data;
    if (auto da = node.input_grad(0); !da.empty()) {
      for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += m[i * c + j] * y[j];
        da[i] += g * s;
      }
    }
    if (auto dm = node.input_grad(1); !dm.empty()) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) dm[i * c + j] += g * x[i] * y[j];
    }
    if (auto db = node.input_grad(2); !db.empty()) {
      for (std::size_t j = 0; j < c; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < r; ++i) s += m[i * c + j] * x[i];
        db[j] += g * s;
      }
    }
  });
}

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 1, "softmax");
  const auto z = logits.data();
  if (z.empty()) throw ArgumentError("softmax of an empty vector");
  const double top = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - top);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return record_op(logits.shape(), std::move(p), {logits}, [](const TapeNode& node) {
    auto sink = node.input_grad(0);
    if (sink.empty()) return;
    const auto g = node.output_grad();
    const auto& p = *node.outputs[0]->data;
    double inner = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) inner += g[i] * p[i];
    for (std::size_t i = 0; i < p.size(); ++i) sink[i] += p[i] * (g[i] - inner);
  });
}

Tensor pick(const Tensor& a, std::size_t index) {
  require_rank(a, 1, "pick");
  if (index >= a.dim(0)) {
    throw ArgumentError("pick index " + std::to_string(index) +
                        " out of range for " + shape_to_string(a.shape()));
  }
  return record_op(Shape{}, {a.at(index)}, {a}, [index](const TapeNode& node) {
    if (auto sink = node.input_grad(0); !sink.empty()) {
      sink[index] += node.output_grad()[0];
    }
  });
}

}  // namespace rnf
