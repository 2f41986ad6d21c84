#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rnf {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::shared_ptr<std::vector<double>> data;
  // Empty means "no gradient yet"; otherwise data->size() entries.
  std::vector<double> grad;
  bool requires_grad = false;

  std::span<double> grad_buffer();
};

}  // namespace detail

/// Dense row-major double tensor with an optional gradient buffer.
///
/// A Tensor is a cheap shared handle. The data of a tensor produced by an
/// operation is never written again; only parameters are updated in place
/// by optimizers (see mutable_data()).
class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return impl_->data->size(); }
  bool defined() const { return impl_ != nullptr; }

  std::span<const double> data() const { return *impl_->data; }
  /// In-place access for parameter initialization and optimizer updates.
  std::span<double> mutable_data() { return *impl_->data; }
  std::vector<double> to_vector() const { return *impl_->data; }

  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value) { impl_->requires_grad = value; }

  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient values; all zeros when no gradient has been accumulated.
  std::vector<double> grad() const;
  std::span<double> mutable_grad() { return impl_->grad_buffer(); }
  void zero_grad() { impl_->grad.clear(); }

  /// New leaf over the same data with its own (empty) gradient buffer.
  Tensor alias_leaf() const;
  /// New leaf over the same data that never requires gradients.
  Tensor detach() const;
  /// Deep copy of data; no gradient history.
  Tensor clone() const;

  bool shares_storage_with(const Tensor& other) const {
    return impl_->data == other.impl_->data;
  }

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// ---------------------------------------------------------------------------
// Tape

struct TapeNode {
  std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
  std::vector<std::shared_ptr<detail::TensorImpl>> outputs;
  std::function<void(const TapeNode&)> backward;

  /// Upstream gradient of output `k`, or empty span when none flowed there.
  std::span<const double> output_grad(std::size_t k = 0) const;
  /// Gradient sink for input `i`, or empty span when the input needs none.
  std::span<double> input_grad(std::size_t i) const;
};

/// Append-only record of operations for reverse-mode differentiation.
class Tape {
 public:
  using Visitor = std::function<void(std::size_t node_index)>;

  void record(TapeNode node);
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  void clear() { nodes_.clear(); }

  /// Propagates d(loss)/d(.) through every recorded node in exact reverse
  /// recording order, then clears the tape.
  void backward(const Tensor& loss, const Visitor& visit = {});
  /// Like backward() but seeds the root with an arbitrary upstream gradient.
  void backward_from(const Tensor& root, std::span<const double> seed,
                     const Visitor& visit = {});

  /// Tape that operations on this thread currently record into.
  static Tape& current();

 private:
  void run(const Visitor& visit);

  std::vector<TapeNode> nodes_;
};

/// Installs a fresh tape as the thread's current tape for its lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Disables recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Runs backward on the current thread's tape.
void backward(const Tensor& loss);

/// Builds an operation result and, when any input requires gradients and
/// recording is enabled, appends a node with `rule` to the current tape.
Tensor record_op(Shape shape, std::vector<double> values,
                 std::initializer_list<Tensor> inputs,
                 std::function<void(const TapeNode&)> rule);
Tensor record_op(Shape shape, std::vector<double> values,
                 const std::vector<Tensor>& inputs,
                 std::function<void(const TapeNode&)> rule);

// ---------------------------------------------------------------------------
// Operations. Broadcasting is limited to scalar-to-tensor and equal shapes.

enum class Elementwise { Add, Sub, Mul, Tanh, Sigmoid, Relu };

Tensor elementwise(Elementwise op, const Tensor& a);
Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);

Tensor scale(const Tensor& a, double factor);
/// 1 - a
Tensor one_minus(const Tensor& a);
/// log(clamp(a, lo, hi)); the gradient is zero where the clamp is active.
Tensor clamped_log(const Tensor& a, double lo, double hi);

/// [p x q] * [q x r] -> [p x r]
Tensor matmul(const Tensor& a, const Tensor& b);
/// [p x q] * [q] -> [p]
Tensor matvec(const Tensor& w, const Tensor& x);
Tensor transpose(const Tensor& a);
/// Adds b[d] to every column of m[d x c].
Tensor add_column_bias(const Tensor& m, const Tensor& b);

Tensor concat(const std::vector<Tensor>& tensors, std::size_t axis);
Tensor reshape(const Tensor& a, Shape shape);
/// Rows [start, start + count) of a rank-2 tensor.
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);
/// Row `index` of a rank-2 tensor as a rank-1 tensor.
Tensor row(const Tensor& a, std::size_t index);

struct MaxResult {
  Tensor values;
  std::vector<std::size_t> indices;
};
/// Max reduction of a rank-2 tensor along `axis`; ties resolve to the lowest
/// index. Gradient flows only to the argmax positions.
MaxResult max_over_axis(const Tensor& t, std::size_t axis);

Tensor sum(const Tensor& a);
Tensor mean(const std::vector<Tensor>& scalars);
Tensor dot(const Tensor& a, const Tensor& b);
/// a' M b. Terms (i,j) and (j,i) are added pairwise, so the result is
/// bit-identical under swapping a and b whenever M is exactly symmetric.
Tensor bilinear(const Tensor& a, const Tensor& M, const Tensor& b);
Tensor softmax(const Tensor& logits);
/// Element `index` of a rank-1 tensor as a scalar.
Tensor pick(const Tensor& a, std::size_t index);

}  // namespace rnf
