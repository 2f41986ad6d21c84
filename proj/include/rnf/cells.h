#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rnf/tensor.h"

namespace rnf {

using Rng = std::mt19937_64;
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// LSTM without peepholes. Input weights are d x k, recurrent weights d x d.
struct LstmCell {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Tensor W_i, W_f, W_o, W_c;
  Tensor U_i, U_f, U_o, U_c;
  Tensor b_i, b_f, b_o, b_c;

  /// Uniform(-0.05, 0.05) input weights, orthogonal recurrent weights,
  /// forget-gate bias 1.
  static LstmCell init(std::size_t input_size, std::size_t hidden_size, Rng& rng);
  static LstmCell zeros(std::size_t input_size, std::size_t hidden_size);

  /// Order matches from_parameters().
  std::vector<Tensor> parameters() const;
  NamedTensors named_parameters(const std::string& prefix) const;
  LstmCell with_parameters(std::span<const Tensor> params) const;
};

/// GRU with the reset gate applied before the recurrent product, U_h (r * h).
struct GruCell {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Tensor W_z, W_r, W_h;
  Tensor U_z, U_r, U_h;
  Tensor b_z, b_r, b_h;

  static GruCell init(std::size_t input_size, std::size_t hidden_size, Rng& rng);
  static GruCell zeros(std::size_t input_size, std::size_t hidden_size);

  std::vector<Tensor> parameters() const;
  NamedTensors named_parameters(const std::string& prefix) const;
  GruCell with_parameters(std::span<const Tensor> params) const;
};

using Cell = std::variant<LstmCell, GruCell>;

std::size_t cell_input_size(const Cell& cell);
std::size_t cell_hidden_size(const Cell& cell);
std::vector<Tensor> cell_parameters(const Cell& cell);
Cell cell_with_parameters(const Cell& cell, std::span<const Tensor> params);

struct LstmState {
  Tensor h;
  Tensor c;
};

LstmState lstm_step(const LstmCell& cell, const Tensor& h_prev,
                    const Tensor& c_prev, const Tensor& x);
Tensor gru_step(const GruCell& cell, const Tensor& h_prev, const Tensor& x);

/// Dropout masks held fixed across the time steps of one sequence. An
/// undefined-size (empty) mask means no dropout at that site.
struct RecurrentMasks {
  std::vector<double> input;      // length k, multiplies x_t
  std::vector<double> recurrent;  // length d, multiplies h_{t-1}
};

/// Runs the cell over every row of `inputs` [n x k] from a zero state and
/// returns all hidden states [n x d].
Tensor run_rnn(const Cell& cell, const Tensor& inputs,
               const RecurrentMasks& masks = {});
/// Same as run_rnn but starts from `h0` (and a zero LSTM memory cell).
Tensor run_rnn(const Cell& cell, const Tensor& inputs, const Tensor& h0,
               const RecurrentMasks& masks = {});

// ---------------------------------------------------------------------------
// Dropout

enum class DropoutSite { Embedding, Pooling, RnnInput, RnnRecurrent };
enum class Mode { Train, Eval };

struct DropoutSpec {
  double rate = 0.0;
  DropoutSite applied_at = DropoutSite::Embedding;
};

/// Inverted-dropout mask: each entry 0 with probability `rate`, otherwise
/// 1 / (1 - rate). Empty when rate == 0.
std::vector<double> dropout_mask(std::size_t size, double rate, Rng& rng);

/// Train mode zeroes each element with probability spec.rate and scales
/// survivors by 1 / (1 - rate); eval mode (or rate 0) is the identity.
Tensor apply_dropout(const Tensor& t, const DropoutSpec& spec, Mode mode,
                     Rng& rng);

/// Multiplies t by a constant mask of equal size; identity for an empty mask.
Tensor apply_mask(const Tensor& t, const std::vector<double>& mask);

/// Random orthogonal n x n matrix (Gram-Schmidt on Gaussian draws).
std::vector<double> orthogonal_matrix(std::size_t n, Rng& rng);
std::vector<double> uniform_values(std::size_t count, double limit, Rng& rng);

}  // namespace rnf
