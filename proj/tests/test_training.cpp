#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "doctest.h"
#include "rnf/errors.h"
#include "rnf/training.h"

using namespace rnf;

namespace {

void set_grad(Tensor p, std::vector<double> g) {
  p.zero_grad();
  auto grad = p.mutable_grad();
  std::copy(g.begin(), g.end(), grad.begin());
}

/// Dev metric follows a fixed script; every batch nudges the single
/// parameter so each epoch leaves a distinct value behind.
class ScriptedProblem : public TrainingProblem {
 public:
  explicit ScriptedProblem(std::vector<double> script) : script_(std::move(script)) {}

  std::vector<Tensor> parameters() const override { return {param_}; }
  std::size_t train_size() const override { return 1; }
  Tensor batch_loss(std::span<const std::size_t>, Rng&) override {
    return mul(param_, Tensor::scalar(1.0));
  }
  double dev_metric() override {
    values_after_epoch.push_back(param_.item());
    return script_.at(calls_++);
  }

  std::vector<double> values_after_epoch;

 private:
  std::vector<double> script_;
  std::size_t calls_ = 0;
  Tensor param_ = Tensor::scalar(0.0, true);
};

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor p = Tensor::vector({0.5, -2.0}, true);
    std::vector<Tensor> ps{p};
    auto state = AdamState::for_parameters(ps);
    set_grad(p, {0.0, 0.0});
    adam_step(state, ps);
    CHECK(p.to_vector() == std::vector<double>{0.5, -2.0});
    CHECK(state.t == 1);
  }
  SUBCASE("first step with unit gradient moves by alpha") {
    Tensor p = Tensor::scalar(0.0, true);
    std::vector<Tensor> ps{p};
    auto state = AdamState::for_parameters(ps);
    set_grad(p, {1.0});
    adam_step(state, ps);
    // m_hat = v_hat = 1, so the step is alpha / (1 + eps).
    CHECK(p.item() == doctest::Approx(-1e-3).epsilon(1e-7));
  }
  SUBCASE("quadratic bowl") {
    // At most about alpha per step, so the default alpha = 1e-3 cannot cover
    // the distance 1 in 500 steps; 1e-2 can.
    Tensor p = Tensor::scalar(1.0, true);
    std::vector<Tensor> ps{p};
    auto state = AdamState::for_parameters(ps, {1e-2});
    for (int step = 0; step < 500; ++step) {
      set_grad(p, {2.0 * p.item()});
      const double before = p.item();
      adam_step(state, ps);
      CHECK(std::abs(p.item() - before) <= 10 * state.config.lr);
    }
    CHECK(std::abs(p.item()) < 1e-3);
  }
  SUBCASE("update magnitude stays bounded under noisy gradients") {
    Rng rng(4);
    std::normal_distribution<double> noise(0.0, 50.0);
    Tensor p = Tensor::zeros({20}, true);
    std::vector<Tensor> ps{p};
    auto state = AdamState::for_parameters(ps);
    for (int step = 0; step < 200; ++step) {
      std::vector<double> g(20);
      for (auto& v : g) v = noise(rng);
      set_grad(p, g);
      const auto before = p.to_vector();
      adam_step(state, ps);
      for (std::size_t i = 0; i < 20; ++i) CHECK(std::abs(p.at(i) - before[i]) <= 10 * 1e-3);
    }
  }
  SUBCASE("non-finite gradients abort without touching parameters") {
    Tensor a = Tensor::vector({1.0, 2.0}, true), b = Tensor::scalar(3.0, true);
    std::vector<Tensor> ps{a, b};
    auto state = AdamState::for_parameters(ps);
    set_grad(a, {0.1, 0.2});
    set_grad(b, {std::numeric_limits<double>::quiet_NaN()});
    CHECK_THROWS_AS(adam_step(state, ps), NumericError);
    CHECK(a.to_vector() == std::vector<double>{1.0, 2.0});
    CHECK(state.t == 0);
    set_grad(b, {std::numeric_limits<double>::infinity()});
    CHECK_THROWS_AS(adam_step(state, ps), NumericError);
  }
}

TEST_CASE("early stopping restores the best epoch") {
  ScriptedProblem problem({0.5, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6, 0.9, 0.9});
  TrainConfig config;
  config.patience = 5;
  config.adam.lr = 0.1;
  auto result = train(problem, config);
  CHECK(result.epochs == 7);
  CHECK(result.best_epoch == 2);
  CHECK(result.dev_metric == 0.6);
  REQUIRE(problem.values_after_epoch.size() == 7);
  CHECK(problem.parameters()[0].item() == problem.values_after_epoch[1]);
  CHECK(problem.values_after_epoch[1] != problem.values_after_epoch[6]);
}

TEST_CASE("EarlyStopper") {
  EarlyStopper s(2);
  CHECK(s.update(1, 0.3));
  CHECK_FALSE(s.update(2, 0.3));
  CHECK_FALSE(s.should_stop());
  CHECK(s.update(3, 0.4));
  CHECK_FALSE(s.update(4, 0.1));
  CHECK_FALSE(s.update(5, 0.4));
  CHECK(s.should_stop());
  CHECK(s.best_epoch() == 3);
}

TEST_CASE("training a real classifier") {
  std::vector<std::string> words{"a", "b", "c", "d", "e", "f"};
  auto vocab = Vocabulary::random(words, 5, 3);
  ModelConfig mc;
  mc.task = Task::Sst2;
  mc.filter = {FilterKind::RnfGru, 2, 6, Activation::Relu};
  mc.dropout = {0.2, 0.2, 0.2, 0.2};

  SUBCASE("a single example is memorized") {
    Rng rng(1);
    mc.dropout = {};
    std::vector<EncodedSentence> data{{{2, 3, 4}, 1}};
    ClassificationProblem problem(SentenceClassifier::init(mc, 5, rng), vocab, data, data);
    TrainConfig config;
    config.adam.lr = 0.2;
    auto result = train(problem, config);
    CHECK(result.dev_metric == 1.0);
    CHECK(result.epochs == result.best_epoch + 5);
    // The training loss keeps falling while accuracy sits at 1.0; the
    // restored parameters are those of the first perfect epoch.
    MESSAGE("training loss per epoch: " << result.loss_history.front() << " ... "
                                        << result.loss_history.back());
    for (std::size_t e = 1; e < result.loss_history.size(); ++e) {
      CHECK(result.loss_history[e] < result.loss_history[e - 1]);
    }
    CHECK(result.loss_history.back() < 0.05);
    CHECK(evaluate_accuracy(problem.model(), data, vocab) == 1.0);
  }
  SUBCASE("seeded runs are identical and restore the best dev epoch") {
    std::vector<EncodedSentence> train_set, dev_set;
    Rng data_rng(5);
    for (int i = 0; i < 40; ++i) {
      EncodedSentence ex;
      for (int t = 0; t < 4; ++t) ex.ids.push_back(2 + data_rng() % 6);
      ex.label = (std::count(ex.ids.begin(), ex.ids.end(), 2u) > 0) ? 1 : 0;
      (i < 30 ? train_set : dev_set).push_back(ex);
    }
    auto run = [&] {
      Rng rng(7);
      ClassificationProblem problem(SentenceClassifier::init(mc, 5, rng), vocab, train_set,
                                    dev_set, dev_set);
      TrainConfig config;
      config.max_epochs = 12;
      config.batch_size = 8;
      config.adam.lr = 0.02;
      config.seed = 99;
      auto result = train(problem, config);
      CHECK(problem.dev_metric() == result.dev_metric);
      for (double m : result.dev_history) CHECK(m <= result.dev_metric);
      return result;
    };
    auto a = run(), b = run();
    CHECK(a.dev_history == b.dev_history);
    CHECK(a.loss_history == b.loss_history);
    CHECK(a.test_metric == b.test_metric);
  }
}

TEST_CASE("accuracy") {
  std::vector<int> p{1, 0, 1, 1}, g{1, 1, 1, 0};
  CHECK(accuracy(p, g) == 0.5);
  CHECK_THROWS_AS(accuracy(std::vector<int>{}, std::vector<int>{}), ArgumentError);
  CHECK_THROWS_AS(accuracy(p, std::vector<int>{1}), ArgumentError);
}

TEST_CASE("map_mrr") {
  using L = std::vector<RankedCandidateList>;
  SUBCASE("lone positive first") {
    auto r = map_mrr(L{{{0.9, 0.1, 0.5}, {1, 0, 0}}});
    CHECK(r.map == 1.0);
    CHECK(r.mrr == 1.0);
  }
  SUBCASE("lone positive second of three") {
    auto r = map_mrr(L{{{0.3, 0.9, 0.1}, {1, 0, 0}}});
    CHECK(r.map == 0.5);
    CHECK(r.mrr == 0.5);
  }
  SUBCASE("two questions") {
    auto r = map_mrr(L{{{0.9, 0.1}, {1, 0}}, {{0.3, 0.9, 0.1}, {1, 0, 0}}});
    CHECK(r.map == 0.75);
    CHECK(r.mrr == 0.75);
  }
  SUBCASE("questions without positives are skipped") {
    auto r = map_mrr(L{{{0.9, 0.1}, {0, 0}}, {{0.2, 0.1}, {0, 1}}});
    CHECK(r.questions == 1);
    CHECK(r.map == 0.5);
  }
  SUBCASE("ties keep the original order") {
    auto r = map_mrr(L{{{0.5, 0.5, 0.5}, {0, 1, 0}}});
    CHECK(r.mrr == 0.5);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(map_mrr(L{}), ArgumentError);
    CHECK_THROWS_AS(map_mrr(L{{{}, {}}}), ArgumentError);
  }
  SUBCASE("range and the MRR = 1 characterization") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
      L lists(1 + rng() % 4);
      bool all_top_positive = true;
      for (auto& l : lists) {
        const std::size_t n = 1 + rng() % 5;
        for (std::size_t i = 0; i < n; ++i) {
          l.scores.push_back(static_cast<double>(rng() % 7));
          l.labels.push_back(rng() % 3 == 0);
        }
        l.labels[rng() % n] = 1;
        const auto top = std::max_element(l.scores.begin(), l.scores.end()) - l.scores.begin();
        all_top_positive &= l.labels[top] == 1;
      }
      auto r = map_mrr(lists);
      CHECK(r.map >= 0.0);
      CHECK(r.map <= 1.0);
      CHECK(r.mrr >= 0.0);
      CHECK(r.mrr <= 1.0);
      CHECK((r.mrr == 1.0) == all_top_positive);
    }
  }
}

TEST_CASE("random search") {
  SearchSpace space;
  auto by_hidden = [](const SearchConfig& c, std::uint64_t) {
    TrainResult r;
    r.dev_metric = static_cast<double>(c.hidden_units) + 0.001 * static_cast<double>(c.window);
    r.test_metric = -1.0;
    r.epochs = 1;
    return r;
  };
  SUBCASE("budget 1 returns its single trial") {
    space.budget = 1;
    auto r = random_search(space, FilterKind::Linear, by_hidden, 5);
    REQUIRE(r.trials.size() == 1);
    CHECK(r.best.trial_id == 0);
    CHECK(r.best.result->dev_metric == r.trials[0].result->dev_metric);
  }
  SUBCASE("draws stay inside the grids and repeat under a seed") {
    space.budget = 30;
    auto a = random_search(space, FilterKind::RnfLstm, by_hidden, 11);
    auto b = random_search(space, FilterKind::RnfLstm, by_hidden, 11);
    const std::set<double> rates{0.0, 0.2, 0.4};
    for (std::size_t i = 0; i < 30; ++i) {
      const auto& c = a.trials[i].config;
      CHECK(c.hidden_units == b.trials[i].config.hidden_units);
      CHECK(c.window == b.trials[i].config.window);
      CHECK(c.dropout.pooling == b.trials[i].config.dropout.pooling);
      CHECK(a.trials[i].seed == b.trials[i].seed);
      CHECK(std::set<std::size_t>{200, 300, 400}.count(c.hidden_units));
      CHECK(c.window >= 5);
      CHECK(c.window <= 8);
      CHECK(rates.count(c.dropout.embedding));
      CHECK(rates.count(c.dropout.rnn_recurrent));
    }
  }
  SUBCASE("selection follows the dev metric") {
    space.budget = 20;
    auto r = random_search(space, FilterKind::Linear, by_hidden, 3);
    CHECK(r.best.config.hidden_units == 400);
  }
  SUBCASE("test metric never drives selection") {
    space.budget = 20;
    auto r = random_search(
        space, FilterKind::Linear,
        [](const SearchConfig& c, std::uint64_t) {
          TrainResult t;
          t.dev_metric = static_cast<double>(c.hidden_units);
          t.test_metric = -static_cast<double>(c.hidden_units);
          return t;
        },
        3);
    CHECK(r.best.config.hidden_units == 400);
  }
  SUBCASE("failed trials are logged and skipped") {
    space.budget = 6;
    const auto log = std::filesystem::temp_directory_path() / "rnf_search_log.csv";
    int calls = 0;
    auto r = random_search(
        space, FilterKind::Linear,
        [&](const SearchConfig& c, std::uint64_t seed) {
          if (calls++ % 2 == 0) throw NumericError("diverged, badly");
          return by_hidden(c, seed);
        },
        8, log);
    CHECK(r.trials.size() == 6);
    CHECK_FALSE(r.trials[0].result.has_value());
    CHECK(r.best.result.has_value());
    const auto lines = read_lines(log);
    REQUIRE(lines.size() == 7);
    CHECK(lines[0] ==
          "trial_id,seed,hidden_units,window,dropout_embedding,dropout_pooling,"
          "dropout_rnn_input,dropout_rnn_recurrent,dev_metric,test_metric,epochs,seconds,"
          "status");
    CHECK(lines[1].find("failed: diverged; badly") != std::string::npos);
    CHECK(lines[2].substr(lines[2].size() - 3) == ",ok");
    std::filesystem::remove(log);
  }
  SUBCASE("every trial failing is an error") {
    space.budget = 3;
    CHECK_THROWS_AS(random_search(
                        space, FilterKind::Linear,
                        [](const SearchConfig&, std::uint64_t) -> TrainResult {
                          throw NumericError("nan");
                        },
                        1),
                    SearchError);
  }
}
