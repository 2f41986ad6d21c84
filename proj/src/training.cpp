#include "rnf/training.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "rnf/errors.h"
#include "rnf/parallel.h"

namespace rnf {

AdamState AdamState::for_parameters(std::span<const Tensor> params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto& p : params) {
    s.m.emplace_back(p.numel(), 0.0);
    s.v.emplace_back(p.numel(), 0.0);
  }
  return s;
}

void adam_step(AdamState& state, std::span<const Tensor> params) {
  if (params.size() != state.m.size()) {
    throw ArgumentError("Adam state tracks " + std::to_string(state.m.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].numel() != state.m[i].size()) {
      throw DimensionError("Adam state shape mismatch for parameter " + std::to_string(i));
    }
    grads.push_back(params[i].grad());
    const auto& g = grads.back();
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (!std::isfinite(g[j])) {
        throw NumericError("non-finite gradient " + std::to_string(g[j]) + " in parameter " +
                           std::to_string(i) + " " + shape_to_string(params[i].shape()) +
                           " at element " + std::to_string(j) + " (step " +
                           std::to_string(state.t + 1) + ")");
      }
    }
  }
  ++state.t;
  const auto& c = state.config;
  const double correct1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double correct2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    auto data = p.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correct1;
      const double v_hat = v[j] / correct2;
      data[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

bool EarlyStopper::update(std::size_t epoch, double metric) {
  if (best_epoch_ == 0 || metric > best_) {
    best_ = metric;
    best_epoch_ = epoch;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

TrainResult train(TrainingProblem& problem, const TrainConfig& config) {
  if (problem.train_size() == 0) throw ArgumentError("training set is empty");
  if (config.batch_size == 0) throw ArgumentError("batch size must be positive");
  const auto start = std::chrono::steady_clock::now();
  const auto params = problem.parameters();
  AdamState adam = AdamState::for_parameters(params, config.adam);
  EarlyStopper stopper(config.patience);
  Rng rng(config.seed);
  std::vector<std::size_t> order(problem.train_size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  auto best = snapshot(params);
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_total = 0.0;
    for (std::size_t start_i = 0; start_i < order.size(); start_i += config.batch_size) {
      const std::size_t end_i = std::min(order.size(), start_i + config.batch_size);
      std::span<const std::size_t> batch(order.data() + start_i, end_i - start_i);
      for (auto p : params) p.zero_grad();
      Tape tape;
      TapeScope scope(tape);
      Tensor loss = problem.batch_loss(batch, rng);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      loss_total += value * static_cast<double>(batch.size());
      tape.backward(loss);
      adam_step(adam, params);
    }
    result.loss_history.push_back(loss_total / static_cast<double>(order.size()));

    double metric;
    {
      NoGradGuard no_grad;
      metric = problem.dev_metric();
    }
    result.dev_history.push_back(metric);
    result.epochs = epoch;
    if (stopper.update(epoch, metric)) {
      best = snapshot(params);
      NoGradGuard no_grad;
      result.test_metric = problem.test_metric();
    }
    if (stopper.should_stop()) break;
  }
  restore(params, best);
  result.dev_metric = stopper.best_metric();
  result.best_epoch = stopper.best_epoch();
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// ---------------------------------------------------------------------------
// Problems

ClassificationProblem::ClassificationProblem(SentenceClassifier model,
                                             const Vocabulary& vocab,
                                             std::vector<EncodedSentence> train,
                                             std::vector<EncodedSentence> dev,
                                             std::vector<EncodedSentence> test,
                                             std::size_t workers)
    : model_(std::move(model)),
      vocab_(vocab),
      train_(std::move(train)),
      dev_(std::move(dev)),
      test_(std::move(test)),
      workers_(workers) {
  if (train_.empty() || dev_.empty()) throw ArgumentError("train and dev sets must be nonempty");
}

Tensor ClassificationProblem::batch_loss(std::span<const std::size_t> indices, Rng& rng) {
  return model_.loss(train_, indices, vocab_, Mode::Train, rng, workers_);
}

double ClassificationProblem::dev_metric() {
  return evaluate_accuracy(model_, dev_, vocab_, workers_);
}

std::optional<double> ClassificationProblem::test_metric() {
  if (test_.empty()) return std::nullopt;
  return evaluate_accuracy(model_, test_, vocab_, workers_);
}

MatchingProblem::MatchingProblem(SentenceMatcher model, const Vocabulary& vocab,
                                 std::vector<EncodedPair> train, std::vector<EncodedPair> dev,
                                 std::vector<EncodedPair> test, std::size_t workers)
    : model_(std::move(model)),
      vocab_(vocab),
      train_(std::move(train)),
      dev_(std::move(dev)),
      test_(std::move(test)),
      workers_(workers) {
  if (train_.empty() || dev_.empty()) throw ArgumentError("train and dev sets must be nonempty");
}

Tensor MatchingProblem::batch_loss(std::span<const std::size_t> indices, Rng& rng) {
  return model_.loss(train_, indices, vocab_, Mode::Train, rng, workers_);
}

double MatchingProblem::dev_metric() {
  return evaluate_ranking(model_, dev_, vocab_, workers_).map;
}

std::optional<double> MatchingProblem::test_metric() {
  if (test_.empty()) return std::nullopt;
  return evaluate_ranking(model_, test_, vocab_, workers_).map;
}

// ---------------------------------------------------------------------------
// Metrics

double accuracy(std::span<const int> predictions, std::span<const int> golds) {
  if (predictions.empty()) throw ArgumentError("accuracy of an empty prediction list");
  if (predictions.size() != golds.size()) {
    throw ArgumentError("accuracy: " + std::to_string(predictions.size()) +
                        " predictions for " + std::to_string(golds.size()) + " labels");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) correct += predictions[i] == golds[i];
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

RankingMetrics map_mrr(std::span<const RankedCandidateList> lists) {
  if (lists.empty()) throw ArgumentError("map_mrr of an empty question list");
  RankingMetrics out;
  double ap_total = 0.0, rr_total = 0.0;
  for (const auto& list : lists) {
    if (list.scores.empty()) throw ArgumentError("question without candidates");
    if (list.scores.size() != list.labels.size()) {
      throw ArgumentError("candidate scores and labels differ in length");
    }
    std::vector<std::size_t> order(list.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return list.scores[a] > list.scores[b];
    });
    std::size_t hits = 0;
    double precision_sum = 0.0, rr = 0.0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      if (list.labels[order[rank]] != 1) continue;
      ++hits;
      precision_sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
      if (hits == 1) rr = 1.0 / static_cast<double>(rank + 1);
    }
    if (hits == 0) continue;
    ap_total += precision_sum / static_cast<double>(hits);
    rr_total += rr;
    ++out.questions;
  }
  if (out.questions == 0) throw ArgumentError("no question has a positive candidate");
  out.map = ap_total / static_cast<double>(out.questions);
  out.mrr = rr_total / static_cast<double>(out.questions);
  return out;
}

std::vector<int> predict_all(const SentenceClassifier& model,
                             std::span<const EncodedSentence> data, const Vocabulary& vocab,
                             std::size_t workers) {
  std::vector<int> preds(data.size());
  NoGradGuard no_grad;
  parallel_for(data.size(), workers,
               [&](std::size_t i) { preds[i] = model.predict(data[i].ids, vocab); });
  return preds;
}

double evaluate_accuracy(const SentenceClassifier& model,
                         std::span<const EncodedSentence> data, const Vocabulary& vocab,
                         std::size_t workers) {
  const auto preds = predict_all(model, data, vocab, workers);
  std::vector<int> golds;
  golds.reserve(data.size());
  for (const auto& ex : data) golds.push_back(ex.label);
  return accuracy(preds, golds);
}

RankingMetrics evaluate_ranking(const SentenceMatcher& model,
                                std::span<const EncodedPair> data, const Vocabulary& vocab,
                                std::size_t workers) {
  std::vector<double> scores(data.size());
  {
    NoGradGuard no_grad;
    parallel_for(data.size(), workers,
                 [&](std::size_t i) { scores[i] = model.score(data[i], vocab); });
  }
  std::vector<RankedCandidateList> lists;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto [it, inserted] = index.emplace(data[i].question_id, lists.size());
    if (inserted) lists.emplace_back();
    lists[it->second].scores.push_back(scores[i]);
    lists[it->second].labels.push_back(data[i].label);
  }
  return map_mrr(lists);
}

// ---------------------------------------------------------------------------
// Random search

namespace {

template <typename T>
T draw(const std::vector<T>& grid, Rng& rng, const char* name) {
  if (grid.empty()) throw ConfigError(std::string("search grid '") + name + "' is empty");
  std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
  return grid[pick(rng)];
}

}  // namespace

SearchConfig sample_config(const SearchSpace& space, FilterKind kind, Rng& rng) {
  SearchConfig c;
  c.hidden_units = draw(space.hidden_units, rng, "hidden_units");
  c.window = kind == FilterKind::Linear ? draw(space.window_linear, rng, "window_linear")
                                        : draw(space.window_rnf, rng, "window_rnf");
  c.dropout.embedding = draw(space.dropout, rng, "dropout");
  c.dropout.pooling = draw(space.dropout, rng, "dropout");
  c.dropout.rnn_input = draw(space.dropout, rng, "dropout");
  c.dropout.rnn_recurrent = draw(space.dropout, rng, "dropout");
  return c;
}

void write_trial_log(std::span<const TrialResult> trials, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write trial log: " + path.string());
  out << "trial_id,seed,hidden_units,window,dropout_embedding,dropout_pooling,"
         "dropout_rnn_input,dropout_rnn_recurrent,dev_metric,test_metric,epochs,seconds,"
         "status\n";
  out << std::setprecision(17);
  for (const auto& t : trials) {
    out << t.trial_id << ',' << t.seed << ',' << t.config.hidden_units << ','
        << t.config.window << ',' << t.config.dropout.embedding << ','
        << t.config.dropout.pooling << ',' << t.config.dropout.rnn_input << ','
        << t.config.dropout.rnn_recurrent << ',';
    if (t.result) {
      out << t.result->dev_metric << ',';
      if (t.result->test_metric) out << *t.result->test_metric;
      out << ',' << t.result->epochs << ',' << t.result->seconds << ",ok\n";
    } else {
      std::string reason = t.error;
      std::replace(reason.begin(), reason.end(), ',', ';');
      std::replace(reason.begin(), reason.end(), '\n', ' ');
      out << ",,,,failed: " << reason << '\n';
    }
  }
}

SearchResult random_search(const SearchSpace& space, FilterKind kind, const TrialFn& trial,
                           std::uint64_t seed, const std::filesystem::path& log_path) {
  if (space.budget < 1) throw ArgumentError("search budget must be at least 1");
  Rng rng(seed);
  SearchResult out;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < space.budget; ++i) {
    TrialResult t;
    t.trial_id = i;
    t.config = sample_config(space, kind, rng);
    t.seed = rng();
    try {
      t.result = trial(t.config, t.seed);
    } catch (const std::exception& e) {
      t.error = e.what();
    }
    if (t.result && (!best || t.result->dev_metric > out.trials[*best].result->dev_metric)) {
      best = out.trials.size();
    }
    out.trials.push_back(std::move(t));
    if (!log_path.empty()) write_trial_log(out.trials, log_path);
  }
  if (!best) {
    throw SearchError("all " + std::to_string(space.budget) +
                      " trials failed; first error: " + out.trials.front().error);
  }
  out.best = out.trials[*best];
  return out;
}

}  // namespace rnf
