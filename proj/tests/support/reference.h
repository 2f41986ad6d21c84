#pragma once

// Brute-force per-window reference implementations written with plain
// loops over std::vector. They share no code with the library's tensor ops
// and serve as independent oracles for the convolution filters.

#include <cmath>
#include <cstddef>
#include <vector>

#include "rnf/cells.h"
#include "rnf/conv.h"

namespace rnf::reference {

using Vec = std::vector<double>;

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y = W x + U h + b with W [d x k], U [d x d] given row-major.
inline Vec gate(const Tensor& W, const Vec& x, const Tensor& U, const Vec& h,
                const Tensor& b) {
  const std::size_t d = b.numel(), k = x.size();
  const auto w = W.data(), u = U.data(), bias = b.data();
  Vec out(d);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = bias[i];
    for (std::size_t j = 0; j < k; ++j) acc += w[i * k + j] * x[j];
    for (std::size_t j = 0; j < d; ++j) acc += u[i * d + j] * h[j];
    out[i] = acc;
  }
  return out;
}

inline Vec token(const Tensor& sentence, std::size_t t) {
  const std::size_t k = sentence.dim(1);
  const auto s = sentence.data();
  return Vec(s.begin() + t * k, s.begin() + (t + 1) * k);
}

inline void lstm(const LstmCell& c, Vec& h, Vec& mem, const Vec& x) {
  const Vec i = gate(c.W_i, x, c.U_i, h, c.b_i);
  const Vec f = gate(c.W_f, x, c.U_f, h, c.b_f);
  const Vec o = gate(c.W_o, x, c.U_o, h, c.b_o);
  const Vec g = gate(c.W_c, x, c.U_c, h, c.b_c);
  for (std::size_t j = 0; j < h.size(); ++j) {
    mem[j] = sigm(f[j]) * mem[j] + sigm(i[j]) * std::tanh(g[j]);
    h[j] = sigm(o[j]) * std::tanh(mem[j]);
  }
}

inline void gru(const GruCell& c, Vec& h, const Vec& x) {
  const Vec z = gate(c.W_z, x, c.U_z, h, c.b_z);
  const Vec r = gate(c.W_r, x, c.U_r, h, c.b_r);
  Vec rh(h.size());
  for (std::size_t j = 0; j < h.size(); ++j) rh[j] = sigm(r[j]) * h[j];
  const Vec cand = gate(c.W_h, x, c.U_h, rh, c.b_h);
  for (std::size_t j = 0; j < h.size(); ++j) {
    const double zj = sigm(z[j]);
    h[j] = (1.0 - zj) * h[j] + zj * std::tanh(cand[j]);
  }
}

/// Feature column for window i of a recurrent filter: last hidden state of
/// the cell run from zero over tokens i .. i+m-1.
inline Vec rnf_window(const Cell& cell, const Tensor& sentence, std::size_t i,
                      std::size_t m) {
  const std::size_t d = cell_hidden_size(cell);
  Vec h(d, 0.0), mem(d, 0.0);
  for (std::size_t t = i; t < i + m; ++t) {
    const Vec x = token(sentence, t);
    if (const auto* l = std::get_if<LstmCell>(&cell)) {
      lstm(*l, h, mem, x);
    } else {
      gru(std::get<GruCell>(cell), h, x);
    }
  }
  return h;
}

/// c_{i,j} = f(w_j . [x_i; ...; x_{i+m-1}] + b_j), computed one scalar at a time.
inline Vec linear_window(const LinearFilterBank& bank, const Tensor& sentence,
                         std::size_t i, std::size_t m, Activation act) {
  const std::size_t d = bank.b.numel();
  const std::size_t k = sentence.dim(1);
  const auto w = bank.W.data();
  const auto s = sentence.data();
  Vec out(d);
  for (std::size_t j = 0; j < d; ++j) {
    double acc = bank.b.at(j);
    for (std::size_t t = 0; t < m; ++t) {
      for (std::size_t e = 0; e < k; ++e) {
        acc += w[j * (m * k) + t * k + e] * s[(i + t) * k + e];
      }
    }
    out[j] = act == Activation::Relu ? (acc > 0 ? acc : 0.0) : std::tanh(acc);
  }
  return out;
}

}  // namespace rnf::reference
