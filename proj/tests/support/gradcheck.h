#pragma once

// Test-only finite-difference oracle. Deliberately independent of the
// backward rules: it only evaluates the forward pass with perturbed data.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "rnf/tensor.h"

namespace rnf::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

/// Compares analytic gradients of loss_fn() w.r.t. every element of every
/// tensor in `params` against central differences with step eps.
inline GradCheck check_gradients(const std::function<Tensor()>& loss_fn,
                                 std::vector<Tensor> params,
                                 double eps = 1e-5) {
  for (auto& p : params) p.zero_grad();
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor loss = loss_fn();
    tape.backward(loss);
  }
  GradCheck result;
  NoGradGuard guard;
  for (auto& p : params) {
    const auto analytic = p.grad();
    auto data = p.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double up = loss_fn().item();
      data[i] = saved - eps;
      const double down = loss_fn().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      result.max_rel_error =
          std::max(result.max_rel_error, relative_error(analytic[i], numeric));
      ++result.checked;
    }
  }
  return result;
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng,
                            bool requires_grad = true, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = dist(rng);
  return Tensor::from(std::move(shape), std::move(values), requires_grad);
}

/// Fixed positive weights for weighted_sum(); draw them once, outside the
/// loss closure, so every finite-difference evaluation sees the same loss.
inline Tensor random_weights(const Shape& shape, std::mt19937_64& rng) {
  return random_tensor(shape, rng, false, 0.5, 1.5);
}

/// sum(t * w): a scalar whose gradient w.r.t. t is w.
inline Tensor weighted_sum(const Tensor& t, const Tensor& w) {
  return sum(mul(t, w));
}

}  // namespace rnf::testing
