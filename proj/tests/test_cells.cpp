#include <cmath>
#include <random>

#include "doctest.h"
#include "rnf/cells.h"
#include "rnf/errors.h"
#include "support/gradcheck.h"
#include "support/reference.h"

using namespace rnf;
using rnf::testing::check_gradients;
using rnf::testing::random_tensor;
using rnf::testing::random_weights;
using rnf::testing::weighted_sum;

namespace {

void fill_all(const std::vector<Tensor>& params, double value) {
  for (auto p : params) {
    for (auto& v : p.mutable_data()) v = value;
  }
}

void randomize(const std::vector<Tensor>& params, std::mt19937_64& rng,
               double limit = 0.5) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto p : params) {
    for (auto& v : p.mutable_data()) v = dist(rng);
  }
}

}  // namespace

TEST_CASE("lstm_step closed forms") {
  SUBCASE("zero parameters give a zero hidden state") {
    auto cell = LstmCell::zeros(3, 2);
    auto s = lstm_step(cell, Tensor::zeros({2}), Tensor::zeros({2}),
                       Tensor::vector({0.4, -1.0, 2.0}));
    CHECK(s.h.to_vector() == std::vector<double>{0, 0});
  }
  SUBCASE("unit 1x1 weights at x = 0") {
    auto cell = LstmCell::zeros(1, 1);
    fill_all({cell.W_i, cell.W_f, cell.W_o, cell.W_c, cell.U_i, cell.U_f,
              cell.U_o, cell.U_c}, 1.0);
    auto s = lstm_step(cell, Tensor::zeros({1}), Tensor::zeros({1}),
                       Tensor::vector({0.0}));
    CHECK(s.c.item() == 0.0);
    CHECK(s.h.item() == 0.0);
  }
  SUBCASE("unit 1x1 weights at x = 1") {
    auto cell = LstmCell::zeros(1, 1);
    fill_all({cell.W_i, cell.W_f, cell.W_o, cell.W_c, cell.U_i, cell.U_f,
              cell.U_o, cell.U_c}, 1.0);
    auto s = lstm_step(cell, Tensor::zeros({1}), Tensor::zeros({1}),
                       Tensor::vector({1.0}));
    const double gate = 1.0 / (1.0 + std::exp(-1.0));
    const double c = gate * std::tanh(1.0);
    CHECK(s.c.item() == doctest::Approx(c).epsilon(1e-15));
    CHECK(s.h.item() == doctest::Approx(gate * std::tanh(c)).epsilon(1e-15));
  }
  SUBCASE("shape mismatch") {
    auto cell = LstmCell::zeros(3, 2);
    CHECK_THROWS_AS(lstm_step(cell, Tensor::zeros({3}), Tensor::zeros({2}),
                              Tensor::zeros({3})),
                    DimensionError);
  }
}

TEST_CASE("gru_step closed forms") {
  SUBCASE("zero parameters and zero state") {
    auto cell = GruCell::zeros(2, 3);
    CHECK(gru_step(cell, Tensor::zeros({3}), Tensor::vector({1, -1})).to_vector() ==
          std::vector<double>{0, 0, 0});
  }
  SUBCASE("saturated update gate copies the previous state") {
    std::mt19937_64 rng(9);
    auto cell = GruCell::init(2, 3, rng);
    for (auto& v : cell.b_z.mutable_data()) v = -1e6;
    auto h_prev = Tensor::vector({0.3, -0.7, 0.1});
    CHECK(gru_step(cell, h_prev, Tensor::vector({0.5, 2.0})).to_vector() ==
          h_prev.to_vector());
  }
  SUBCASE("shape mismatch") {
    auto cell = GruCell::zeros(2, 3);
    CHECK_THROWS_AS(gru_step(cell, Tensor::zeros({3}), Tensor::zeros({3})),
                    DimensionError);
  }
}

TEST_CASE("cell gradients match finite differences") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::mt19937_64 rng(seed);
    auto lstm = LstmCell::init(3, 4, rng);
    auto gru = GruCell::init(3, 4, rng);
    randomize(lstm.parameters(), rng);
    randomize(gru.parameters(), rng);
    auto h = random_tensor({4}, rng);
    auto c = random_tensor({4}, rng);
    auto x = random_tensor({3}, rng);
    auto w = random_weights({4}, rng);

    auto lstm_params = lstm.parameters();
    lstm_params.insert(lstm_params.end(), {h, c, x});
    auto gl = check_gradients(
        [&] {
          auto s = lstm_step(lstm, h, c, x);
          return add(weighted_sum(s.h, w), weighted_sum(s.c, w));
        },
        lstm_params);
    CHECK(gl.max_rel_error < 1e-4);

    auto gru_params = gru.parameters();
    gru_params.insert(gru_params.end(), {h, x});
    auto gg = check_gradients([&] { return weighted_sum(gru_step(gru, h, x), w); },
                              gru_params);
    CHECK(gg.max_rel_error < 1e-4);
  }
}

TEST_CASE("cell initialization") {
  std::mt19937_64 rng(1);
  auto cell = LstmCell::init(5, 4, rng);
  for (double v : cell.W_i.data()) CHECK(std::abs(v) <= 0.05);
  for (double v : cell.b_f.data()) CHECK(v == 1.0);
  // U^T U == I for orthogonal recurrent weights.
  const auto u = cell.U_c.data();
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) {
      double acc = 0.0;
      for (std::size_t i = 0; i < 4; ++i) acc += u[i * 4 + a] * u[i * 4 + b];
      CHECK(acc == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-12));
    }
  }
  for (const auto& p : cell.parameters()) CHECK(p.requires_grad());
}

TEST_CASE("run_rnn") {
  std::mt19937_64 rng(4);
  Cell cells[] = {LstmCell::init(3, 5, rng), GruCell::init(3, 5, rng)};
  for (const auto& cell : cells) {
    randomize(cell_parameters(cell), rng, 1.0);
    auto seq = random_tensor({6, 3}, rng, false);

    {  // one step
      auto states = run_rnn(cell, slice_rows(seq, 0, 1));
      const auto ref = reference::rnf_window(cell, seq, 0, 1);
      CHECK(states.shape() == Shape{1, 5});
      for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(states.at(0, j) - ref[j]) < 1e-14);
    }
    {  // prefix property
      auto base = run_rnn(cell, seq);
      auto changed = seq.clone();
      for (std::size_t j = 0; j < 3; ++j) changed.mutable_data()[4 * 3 + j] += 0.9;
      auto other = run_rnn(cell, changed);
      for (std::size_t i = 0; i < 4 * 5; ++i) CHECK(base.at(i) == other.at(i));
      bool later_differs = false;
      for (std::size_t i = 4 * 5; i < 6 * 5; ++i) later_differs |= base.at(i) != other.at(i);
      CHECK(later_differs);
    }
    {  // deterministic
      CHECK(run_rnn(cell, seq).to_vector() == run_rnn(cell, seq).to_vector());
    }
    CHECK_THROWS_AS(run_rnn(cell, Tensor::zeros({0, 3})), ArgumentError);
    CHECK_THROWS_AS(run_rnn(cell, Tensor::zeros({2, 4})), DimensionError);
  }
}

TEST_CASE("state invariants") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto lstm = LstmCell::init(4, 6, rng);
    randomize(lstm.parameters(), rng, 1.0);
    auto seq = random_tensor({8, 4}, rng, false, -1.0, 1.0);
    const auto states = run_rnn(Cell{lstm}, seq);
    for (double v : states.data()) CHECK(std::abs(v) < 1.0);

    auto gru = GruCell::init(4, 6, rng);
    randomize(gru.parameters(), rng, 3.0);
    reference::Vec h(6);
    for (auto& v : h) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    const auto x = reference::token(seq, 0);
    // Candidate state from the reference equations, then the convexity check.
    const auto r = reference::gate(gru.W_r, x, gru.U_r, h, gru.b_r);
    reference::Vec rh(6);
    for (std::size_t j = 0; j < 6; ++j) rh[j] = reference::sigm(r[j]) * h[j];
    const auto cand = reference::gate(gru.W_h, x, gru.U_h, rh, gru.b_h);
    auto next = gru_step(gru, Tensor::vector(h), row(seq, 0));
    for (std::size_t j = 0; j < 6; ++j) {
      const double lo = std::min(h[j], std::tanh(cand[j]));
      const double hi = std::max(h[j], std::tanh(cand[j]));
      CHECK(next.at(j) >= lo - 1e-15);
      CHECK(next.at(j) <= hi + 1e-15);
    }
  }
}

TEST_CASE("dropout") {
  Rng rng(17);
  auto t = Tensor::vector({1, 2, 3, 4});
  SUBCASE("rate 0 is the identity") {
    for (Mode mode : {Mode::Train, Mode::Eval}) {
      CHECK(apply_dropout(t, {0.0, DropoutSite::Embedding}, mode, rng).to_vector() ==
            t.to_vector());
    }
  }
  SUBCASE("eval mode is the identity") {
    CHECK(apply_dropout(t, {0.4, DropoutSite::Pooling}, Mode::Eval, rng).to_vector() ==
          t.to_vector());
  }
  SUBCASE("statistics at rate 0.4") {
    const std::size_t n = 100000;
    auto big = Tensor::full({n}, 2.0);
    auto out = apply_dropout(big, {0.4, DropoutSite::Embedding}, Mode::Train, rng);
    std::size_t zeros = 0;
    double total = 0.0;
    for (double v : out.data()) {
      if (v == 0.0) ++zeros;
      total += v;
    }
    CHECK(std::abs(static_cast<double>(zeros) / n - 0.4) < 0.01);
    CHECK(std::abs(total / n - 2.0) / 2.0 < 0.02);
  }
  SUBCASE("invalid rate") {
    CHECK_THROWS_AS(apply_dropout(t, {1.0, DropoutSite::Embedding}, Mode::Train, rng),
                    ArgumentError);
  }
}

TEST_CASE("recurrent dropout reuses one mask for every step") {
  std::mt19937_64 rng(8);
  auto gru = GruCell::init(3, 4, rng);
  randomize(gru.parameters(), rng, 1.0);
  auto seq = random_tensor({5, 3}, rng, false);
  Rng mask_rng(2);
  RecurrentMasks masks{dropout_mask(3, 0.4, mask_rng), dropout_mask(4, 0.4, mask_rng)};
  auto states = run_rnn(Cell{gru}, seq, masks);

  // Manual unroll applying the same two masks at each step.
  reference::Vec h(4, 0.0);
  for (std::size_t t = 0; t < 5; ++t) {
    auto x = reference::token(seq, t);
    for (std::size_t j = 0; j < 3; ++j) x[j] *= masks.input[j];
    for (std::size_t j = 0; j < 4; ++j) h[j] *= masks.recurrent[j];
    reference::gru(gru, h, x);
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(states.at(t, j) - h[j]) < 1e-14);
  }
}
