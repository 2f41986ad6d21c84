#include "rnf/cells.h"

#include <cmath>

#include "rnf/errors.h"

namespace rnf {

std::vector<double> uniform_values(std::size_t count, double limit, Rng& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> out(count);
  for (auto& v : out) v = dist(rng);
  return out;
}

std::vector<double> orthogonal_matrix(std::size_t n, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  // Columns are orthonormalized in place; q is stored row-major.
  std::vector<double> q(n * n);
  for (auto& v : q) v = dist(rng);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < j; ++p) {
      double proj = 0.0;
      for (std::size_t i = 0; i < n; ++i) proj += q[i * n + j] * q[i * n + p];
      for (std::size_t i = 0; i < n; ++i) q[i * n + j] -= proj * q[i * n + p];
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += q[i * n + j] * q[i * n + j];
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) q[i * n + j] /= norm;
  }
  return q;
}

namespace {

constexpr double kInitLimit = 0.05;

Tensor input_weight(std::size_t d, std::size_t k, Rng& rng) {
  return Tensor::from({d, k}, uniform_values(d * k, kInitLimit, rng), true);
}

Tensor recurrent_weight(std::size_t d, Rng& rng) {
  return Tensor::from({d, d}, orthogonal_matrix(d, rng), true);
}

void check_vector(const Tensor& t, std::size_t n, const char* what) {
  if (t.rank() != 1 || t.dim(0) != n) {
    throw DimensionError(std::string(what) + " has shape " +
                         shape_to_string(t.shape()) + ", expected [" +
                         std::to_string(n) + "]");
  }
}

// W x + U h + b as one recorded node.
Tensor gate_preactivation(const Tensor& W, const Tensor& x, const Tensor& U,
                          const Tensor& h, const Tensor& b) {
  const std::size_t d = W.dim(0), k = W.dim(1);
  const auto w = W.data();
  const auto u = U.data();
  const auto xs = x.data();
  const auto hs = h.data();
  const auto bs = b.data();
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = bs[i];
    const double* wr = &w[i * k];
    for (std::size_t j = 0; j < k; ++j) acc += wr[j] * xs[j];
    const double* ur = &u[i * d];
    for (std::size_t j = 0; j < d; ++j) acc += ur[j] * hs[j];
    out[i] = acc;
  }
  return record_op({d}, std::move(out), {W, x, U, h, b}, [d, k](const TapeNode& node) {
    const auto g = node.output_grad();
    const auto& w = *node.inputs[0]->data;
    const auto& xs = *node.inputs[1]->data;
    const auto& u = *node.inputs[2]->data;
    const auto& hs = *node.inputs[3]->data;
    auto dW = node.input_grad(0);
    auto dx = node.input_grad(1);
    auto dU = node.input_grad(2);
    auto dh = node.input_grad(3);
    auto db = node.input_grad(4);
    for (std::size_t i = 0; i < d; ++i) {
      const double gi = g[i];
      if (!db.empty()) db[i] += gi;
      if (gi == 0.0) continue;
      if (!dW.empty()) {
        double* row = &dW[i * k];
        for (std::size_t j = 0; j < k; ++j) row[j] += gi * xs[j];
      }
      if (!dx.empty()) {
        const double* row = &w[i * k];
        for (std::size_t j = 0; j < k; ++j) dx[j] += row[j] * gi;
      }
      if (!dU.empty()) {
        double* row = &dU[i * d];
        for (std::size_t j = 0; j < d; ++j) row[j] += gi * hs[j];
      }
      if (!dh.empty()) {
        const double* row = &u[i * d];
        for (std::size_t j = 0; j < d; ++j) dh[j] += row[j] * gi;
      }
    }
  });
}

void check_step_shapes(std::size_t k, std::size_t d, const Tensor& h_prev,
                       const Tensor& x) {
  check_vector(h_prev, d, "previous hidden state");
  check_vector(x, k, "input");
}

}  // namespace

// ---------------------------------------------------------------------------
// LSTM

LstmCell LstmCell::init(std::size_t k, std::size_t d, Rng& rng) {
  LstmCell c;
  c.input_size = k;
  c.hidden_size = d;
  c.W_i = input_weight(d, k, rng);
  c.W_f = input_weight(d, k, rng);
  c.W_o = input_weight(d, k, rng);
  c.W_c = input_weight(d, k, rng);
  c.U_i = recurrent_weight(d, rng);
  c.U_f = recurrent_weight(d, rng);
  c.U_o = recurrent_weight(d, rng);
  c.U_c = recurrent_weight(d, rng);
  c.b_i = Tensor::zeros({d}, true);
  c.b_f = Tensor::full({d}, 1.0, true);
  c.b_o = Tensor::zeros({d}, true);
  c.b_c = Tensor::zeros({d}, true);
  return c;
}

LstmCell LstmCell::zeros(std::size_t k, std::size_t d) {
  LstmCell c;
  c.input_size = k;
  c.hidden_size = d;
  for (Tensor* w : {&c.W_i, &c.W_f, &c.W_o, &c.W_c}) *w = Tensor::zeros({d, k}, true);
  for (Tensor* u : {&c.U_i, &c.U_f, &c.U_o, &c.U_c}) *u = Tensor::zeros({d, d}, true);
  for (Tensor* b : {&c.b_i, &c.b_f, &c.b_o, &c.b_c}) *b = Tensor::zeros({d}, true);
  return c;
}

std::vector<Tensor> LstmCell::parameters() const {
  return {W_i, W_f, W_o, W_c, U_i, U_f, U_o, U_c, b_i, b_f, b_o, b_c};
}

NamedTensors LstmCell::named_parameters(const std::string& prefix) const {
  static const char* names[] = {"W_i", "W_f", "W_o", "W_c", "U_i", "U_f",
                                "U_o", "U_c", "b_i", "b_f", "b_o", "b_c"};
  NamedTensors out;
  const auto params = parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.emplace_back(prefix + names[i], params[i]);
  }
  return out;
}

LstmCell LstmCell::with_parameters(std::span<const Tensor> p) const {
  if (p.size() != 12) throw ArgumentError("LSTM cell needs 12 parameters");
  LstmCell c;
  c.input_size = input_size;
  c.hidden_size = hidden_size;
  c.W_i = p[0]; c.W_f = p[1]; c.W_o = p[2]; c.W_c = p[3];
  c.U_i = p[4]; c.U_f = p[5]; c.U_o = p[6]; c.U_c = p[7];
  c.b_i = p[8]; c.b_f = p[9]; c.b_o = p[10]; c.b_c = p[11];
  return c;
}

LstmState lstm_step(const LstmCell& cell, const Tensor& h_prev,
                    const Tensor& c_prev, const Tensor& x) {
  check_step_shapes(cell.input_size, cell.hidden_size, h_prev, x);
  check_vector(c_prev, cell.hidden_size, "previous memory cell");
  Tensor i = sigmoid(gate_preactivation(cell.W_i, x, cell.U_i, h_prev, cell.b_i));
  Tensor f = sigmoid(gate_preactivation(cell.W_f, x, cell.U_f, h_prev, cell.b_f));
  Tensor o = sigmoid(gate_preactivation(cell.W_o, x, cell.U_o, h_prev, cell.b_o));
  Tensor g = tanh(gate_preactivation(cell.W_c, x, cell.U_c, h_prev, cell.b_c));
  Tensor c = add(mul(f, c_prev), mul(i, g));
  Tensor h = mul(o, tanh(c));
  return {std::move(h), std::move(c)};
}

// ---------------------------------------------------------------------------
// GRU

GruCell GruCell::init(std::size_t k, std::size_t d, Rng& rng) {
  GruCell c;
  c.input_size = k;
  c.hidden_size = d;
  c.W_z = input_weight(d, k, rng);
  c.W_r = input_weight(d, k, rng);
  c.W_h = input_weight(d, k, rng);
  c.U_z = recurrent_weight(d, rng);
  c.U_r = recurrent_weight(d, rng);
  c.U_h = recurrent_weight(d, rng);
  c.b_z = Tensor::zeros({d}, true);
  c.b_r = Tensor::zeros({d}, true);
  c.b_h = Tensor::zeros({d}, true);
  return c;
}

GruCell GruCell::zeros(std::size_t k, std::size_t d) {
  GruCell c;
  c.input_size = k;
  c.hidden_size = d;
  for (Tensor* w : {&c.W_z, &c.W_r, &c.W_h}) *w = Tensor::zeros({d, k}, true);
  for (Tensor* u : {&c.U_z, &c.U_r, &c.U_h}) *u = Tensor::zeros({d, d}, true);
  for (Tensor* b : {&c.b_z, &c.b_r, &c.b_h}) *b = Tensor::zeros({d}, true);
  return c;
}

std::vector<Tensor> GruCell::parameters() const {
  return {W_z, W_r, W_h, U_z, U_r, U_h, b_z, b_r, b_h};
}

NamedTensors GruCell::named_parameters(const std::string& prefix) const {
  static const char* names[] = {"W_z", "W_r", "W_h", "U_z", "U_r",
                                "U_h", "b_z", "b_r", "b_h"};
  NamedTensors out;
  const auto params = parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.emplace_back(prefix + names[i], params[i]);
  }
  return out;
}

GruCell GruCell::with_parameters(std::span<const Tensor> p) const {
  if (p.size() != 9) throw ArgumentError("GRU cell needs 9 parameters");
  GruCell c;
  c.input_size = input_size;
  c.hidden_size = hidden_size;
  c.W_z = p[0]; c.W_r = p[1]; c.W_h = p[2];
  c.U_z = p[3]; c.U_r = p[4]; c.U_h = p[5];
  c.b_z = p[6]; c.b_r = p[7]; c.b_h = p[8];
  return c;
}

Tensor gru_step(const GruCell& cell, const Tensor& h_prev, const Tensor& x) {
  check_step_shapes(cell.input_size, cell.hidden_size, h_prev, x);
  Tensor z = sigmoid(gate_preactivation(cell.W_z, x, cell.U_z, h_prev, cell.b_z));
  Tensor r = sigmoid(gate_preactivation(cell.W_r, x, cell.U_r, h_prev, cell.b_r));
  Tensor candidate =
      tanh(gate_preactivation(cell.W_h, x, cell.U_h, mul(r, h_prev), cell.b_h));
  return add(mul(one_minus(z), h_prev), mul(z, candidate));
}

// ---------------------------------------------------------------------------
// Variant helpers

std::size_t cell_input_size(const Cell& cell) {
  return std::visit([](const auto& c) { return c.input_size; }, cell);
}

std::size_t cell_hidden_size(const Cell& cell) {
  return std::visit([](const auto& c) { return c.hidden_size; }, cell);
}

std::vector<Tensor> cell_parameters(const Cell& cell) {
  return std::visit([](const auto& c) { return c.parameters(); }, cell);
}

Cell cell_with_parameters(const Cell& cell, std::span<const Tensor> params) {
  return std::visit(
      [&](const auto& c) -> Cell { return c.with_parameters(params); }, cell);
}

Tensor run_rnn(const Cell& cell, const Tensor& inputs,
               const RecurrentMasks& masks) {
  return run_rnn(cell, inputs, Tensor::zeros({cell_hidden_size(cell)}), masks);
}

Tensor run_rnn(const Cell& cell, const Tensor& inputs, const Tensor& h0,
               const RecurrentMasks& masks) {
  if (inputs.rank() != 2 || inputs.dim(1) != cell_input_size(cell)) {
    throw DimensionError("run_rnn: inputs " + shape_to_string(inputs.shape()) +
                         " do not match cell input size " +
                         std::to_string(cell_input_size(cell)));
  }
  const std::size_t n = inputs.dim(0);
  if (n == 0) throw ArgumentError("run_rnn over an empty sequence");
  const std::size_t d = cell_hidden_size(cell);

  std::vector<Tensor> states;
  states.reserve(n);
  Tensor h = h0;
  Tensor c = Tensor::zeros({d});
  for (std::size_t t = 0; t < n; ++t) {
    Tensor x = apply_mask(row(inputs, t), masks.input);
    Tensor h_in = apply_mask(h, masks.recurrent);
    if (const auto* lstm = std::get_if<LstmCell>(&cell)) {
      auto next = lstm_step(*lstm, h_in, c, x);
      h = std::move(next.h);
      c = std::move(next.c);
    } else {
      h = gru_step(std::get<GruCell>(cell), h_in, x);
    }
    states.push_back(reshape(h, {1, d}));
  }
  return concat(states, 0);
}

// ---------------------------------------------------------------------------
// Dropout

std::vector<double> dropout_mask(std::size_t size, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ArgumentError("dropout rate must lie in [0, 1), got " +
                        std::to_string(rate));
  }
  if (rate == 0.0) return {};
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(size);
  for (auto& m : mask) m = keep(rng) ? scale : 0.0;
  return mask;
}

Tensor apply_mask(const Tensor& t, const std::vector<double>& mask) {
  if (mask.empty()) return t;
  if (mask.size() != t.numel()) {
    throw DimensionError("dropout mask of length " + std::to_string(mask.size()) +
                         " for tensor " + shape_to_string(t.shape()));
  }
  return mul(t, Tensor::from(t.shape(), mask));
}

Tensor apply_dropout(const Tensor& t, const DropoutSpec& spec, Mode mode,
                     Rng& rng) {
  if (!(spec.rate >= 0.0 && spec.rate < 1.0)) {
    throw ArgumentError("dropout rate must lie in [0, 1), got " +
                        std::to_string(spec.rate));
  }
  if (mode == Mode::Eval || spec.rate == 0.0) return t;
  return apply_mask(t, dropout_mask(t.numel(), spec.rate, rng));
}

}  // namespace rnf
