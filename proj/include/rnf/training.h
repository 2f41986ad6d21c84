#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rnf/models.h"

namespace rnf {

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t t = 0;

  static AdamState for_parameters(std::span<const Tensor> params, AdamConfig config = {});
};

/// One bias-corrected Adam update from the parameters' accumulated gradients
/// (absent gradients count as zero). Throws NumericError before touching any
/// parameter if a gradient is NaN or infinite.
void adam_step(AdamState& state, std::span<const Tensor> params);

// ---------------------------------------------------------------------------
// Early stopping and the training loop

class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience = 5) : patience_(patience) {}

  /// Records the metric of `epoch` (1-based). Returns true on a strict
  /// improvement over every earlier epoch.
  bool update(std::size_t epoch, double metric);
  bool should_stop() const { return since_best_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_ = 0.0;
};

/// What the training loop needs from a model and its data.
class TrainingProblem {
 public:
  virtual ~TrainingProblem() = default;
  virtual std::vector<Tensor> parameters() const = 0;
  virtual std::size_t train_size() const = 0;
  /// Mean loss over the given training examples, recorded on the current tape.
  virtual Tensor batch_loss(std::span<const std::size_t> indices, Rng& rng) = 0;
  /// Higher is better.
  virtual double dev_metric() = 0;
  virtual std::optional<double> test_metric() { return std::nullopt; }
};

struct TrainConfig {
  std::size_t max_epochs = 100;
  std::size_t patience = 5;
  std::size_t batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 1;
};

struct TrainResult {
  double dev_metric = 0.0;                 // best epoch
  std::optional<double> test_metric;       // measured at the best epoch
  std::size_t epochs = 0;                  // epochs actually run
  std::size_t best_epoch = 0;
  double seconds = 0.0;
  std::vector<double> dev_history;
  std::vector<double> loss_history;        // mean training loss per epoch
};

/// Seeded minibatch Adam with early stopping on the dev metric. Parameters
/// from the best dev epoch are restored before returning.
TrainResult train(TrainingProblem& problem, const TrainConfig& config);

/// Sentence classification over encoded examples.
class ClassificationProblem : public TrainingProblem {
 public:
  ClassificationProblem(SentenceClassifier model, const Vocabulary& vocab,
                        std::vector<EncodedSentence> train, std::vector<EncodedSentence> dev,
                        std::vector<EncodedSentence> test = {}, std::size_t workers = 1);

  const SentenceClassifier& model() const { return model_; }
  std::vector<Tensor> parameters() const override { return model_.parameters(); }
  std::size_t train_size() const override { return train_.size(); }
  Tensor batch_loss(std::span<const std::size_t> indices, Rng& rng) override;
  double dev_metric() override;
  std::optional<double> test_metric() override;

 private:
  SentenceClassifier model_;
  const Vocabulary& vocab_;
  std::vector<EncodedSentence> train_, dev_, test_;
  std::size_t workers_;
};

/// Answer selection; dev metric is MAP, test metric is MAP as well.
class MatchingProblem : public TrainingProblem {
 public:
  MatchingProblem(SentenceMatcher model, const Vocabulary& vocab,
                  std::vector<EncodedPair> train, std::vector<EncodedPair> dev,
                  std::vector<EncodedPair> test = {}, std::size_t workers = 1);

  const SentenceMatcher& model() const { return model_; }
  std::vector<Tensor> parameters() const override { return model_.parameters(); }
  std::size_t train_size() const override { return train_.size(); }
  Tensor batch_loss(std::span<const std::size_t> indices, Rng& rng) override;
  double dev_metric() override;
  std::optional<double> test_metric() override;

 private:
  SentenceMatcher model_;
  const Vocabulary& vocab_;
  std::vector<EncodedPair> train_, dev_, test_;
  std::size_t workers_;
};

// ---------------------------------------------------------------------------
// Metrics

double accuracy(std::span<const int> predictions, std::span<const int> golds);

struct RankedCandidateList {
  std::vector<double> scores;
  std::vector<int> labels;  // 1 = correct answer
};

struct RankingMetrics {
  double map = 0.0;
  double mrr = 0.0;
  std::size_t questions = 0;  // questions with at least one positive
};

/// Candidates are ranked by descending score, ties in original order.
/// Questions without a positive candidate are skipped.
RankingMetrics map_mrr(std::span<const RankedCandidateList> lists);

std::vector<int> predict_all(const SentenceClassifier& model,
                             std::span<const EncodedSentence> data, const Vocabulary& vocab,
                             std::size_t workers = 1);
double evaluate_accuracy(const SentenceClassifier& model,
                         std::span<const EncodedSentence> data, const Vocabulary& vocab,
                         std::size_t workers = 1);
RankingMetrics evaluate_ranking(const SentenceMatcher& model,
                                std::span<const EncodedPair> data, const Vocabulary& vocab,
                                std::size_t workers = 1);

// ---------------------------------------------------------------------------
// Random search

struct SearchSpace {
  std::vector<std::size_t> hidden_units{200, 300, 400};
  std::vector<std::size_t> window_linear{2, 3, 4, 5};
  std::vector<std::size_t> window_rnf{5, 6, 7, 8};
  std::vector<double> dropout{0.0, 0.2, 0.4};
  std::size_t budget = 100;
};

struct SearchConfig {
  std::size_t hidden_units = 0;
  std::size_t window = 0;
  DropoutRates dropout;
};

/// Uniform draw from each grid; the window grid depends on the filter kind.
SearchConfig sample_config(const SearchSpace& space, FilterKind kind, Rng& rng);

struct TrialResult {
  std::size_t trial_id = 0;
  std::uint64_t seed = 0;
  SearchConfig config;
  std::optional<TrainResult> result;  // empty when the trial failed
  std::string error;
};

struct SearchResult {
  TrialResult best;
  std::vector<TrialResult> trials;
};

using TrialFn = std::function<TrainResult(const SearchConfig& config, std::uint64_t seed)>;

/// Draws `space.budget` configurations and trains each. A failing trial is
/// logged and skipped; if every trial fails a SearchError is thrown. The log
/// (one CSV row per trial) is rewritten after every trial when `log_path`
/// is non-empty.
SearchResult random_search(const SearchSpace& space, FilterKind kind, const TrialFn& trial,
                           std::uint64_t seed, const std::filesystem::path& log_path = {});

void write_trial_log(std::span<const TrialResult> trials, const std::filesystem::path& path);

}  // namespace rnf
