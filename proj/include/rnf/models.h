#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rnf/cells.h"
#include "rnf/conv.h"
#include "rnf/data.h"
#include "rnf/tensor.h"

namespace rnf {

enum class Task { Sst2, Sst5, Qa };

std::string to_string(Task task);
Task parse_task(const std::string& text);
/// 2 for sst2, 5 for sst5; matching tasks have no class count.
std::size_t class_count(Task task);

struct DropoutRates {
  double embedding = 0.0;
  double pooling = 0.0;
  double rnn_input = 0.0;
  double rnn_recurrent = 0.0;
};

struct ModelConfig {
  Task task = Task::Sst2;
  FilterSpec filter;
  DropoutRates dropout;
  PaddingPolicy padding = PaddingPolicy::Symmetric;
  bool shared_encoder = true;  // matcher only
};

/// Token ids of one sentence with its label.
struct EncodedSentence {
  std::vector<std::size_t> ids;
  int label = 0;
};

std::vector<EncodedSentence> encode_sentences(std::span<const SentenceExample> examples,
                                              const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Encoder: frozen embeddings -> filter -> max-over-time pooling

struct EncoderOutput {
  Tensor v;                 // pooled (after pooling dropout in train mode)
  FeatureMap fmap;          // spans on original token indices
  PooledSentence pooled;    // before pooling dropout
};

class SentenceEncoder {
 public:
  SentenceEncoder() = default;
  static SentenceEncoder init(const FilterSpec& spec, std::size_t embedding_dim, Rng& rng);

  const ConvFilter& filter() const { return filter_; }
  /// Learned embedding used for short-sentence padding.
  const Tensor& pad_row() const { return pad_row_; }

  std::vector<Tensor> parameters() const;
  NamedTensors named_parameters(const std::string& prefix) const;
  SentenceEncoder with_parameters(std::span<const Tensor> params) const;

  /// `rng` is only used in train mode.
  EncoderOutput encode(std::span<const std::size_t> ids, const Vocabulary& vocab,
                       const DropoutRates& dropout, PaddingPolicy padding, Mode mode,
                       Rng& rng, std::size_t workers = 1) const;

 private:
  ConvFilter filter_;
  Tensor pad_row_;
};

// ---------------------------------------------------------------------------
// Heads

struct ClassifierHead {
  Tensor W_out;  // C x d
  Tensor b_out;  // C

  static ClassifierHead init(std::size_t classes, std::size_t d, Rng& rng);
  std::size_t classes() const { return b_out.numel(); }
};

/// softmax(W_out v + b_out).
Tensor classify(const Tensor& v, const ClassifierHead& head);

struct MatcherHead {
  Tensor M;       // d x d
  Tensor w_feat;  // 2
  Tensor b;       // scalar

  static MatcherHead init(std::size_t d, Rng& rng);
};

struct CountFeatures {
  double raw_overlap = 0.0;
  double idf_overlap = 0.0;
};

/// sigma(v1' M v2 + w_feat . [raw, idf] + b) as a scalar tensor.
Tensor match_score(const Tensor& v1, const Tensor& v2, const CountFeatures& feats,
                   const MatcherHead& head);

using IdfTable = std::unordered_map<std::string, double>;

/// idf(t) = max(0, ln(N / (1 + df(t)))) over N answer sentences.
IdfTable compute_idf(std::span<const std::vector<std::string>> answers);

/// Distinct question tokens that occur in the answer, and their summed idf.
/// Tokens in `stopwords` are ignored; tokens missing from `idf` weigh 0.
CountFeatures count_features(std::span<const std::string> question,
                             std::span<const std::string> answer, const IdfTable& idf,
                             const std::unordered_set<std::string>& stopwords = {});
CountFeatures count_features(std::span<const std::size_t> question,
                             std::span<const std::size_t> answer,
                             const std::unordered_map<std::size_t, double>& idf);

inline constexpr double kProbabilityFloor = 1e-7;

/// -log p[gold] with p clamped to [1e-7, 1 - 1e-7].
Tensor cross_entropy(const Tensor& probabilities, std::size_t gold);
/// -(y log p + (1 - y) log(1 - p)) with the same clamp.
Tensor binary_cross_entropy(const Tensor& probability, int label);

// ---------------------------------------------------------------------------
// Models

class SentenceClassifier {
 public:
  SentenceClassifier() = default;
  static SentenceClassifier init(const ModelConfig& config, std::size_t embedding_dim,
                                 Rng& rng);

  const ModelConfig& config() const { return config_; }
  const SentenceEncoder& encoder() const { return encoder_; }
  const ClassifierHead& head() const { return head_; }

  std::vector<Tensor> parameters() const;
  NamedTensors named_parameters() const;
  SentenceClassifier with_parameters(std::span<const Tensor> params) const;

  Tensor probabilities(std::span<const std::size_t> ids, const Vocabulary& vocab,
                       Mode mode, Rng& rng, std::size_t workers = 1) const;
  int predict(std::span<const std::size_t> ids, const Vocabulary& vocab,
              std::size_t workers = 1) const;

  /// Mean cross-entropy over batch[indices]. Examples are evaluated as
  /// isolated subgraphs over `workers` threads; dropout seeds are drawn from
  /// `rng` in example order beforehand.
  Tensor loss(std::span<const EncodedSentence> batch, std::span<const std::size_t> indices,
              const Vocabulary& vocab, Mode mode, Rng& rng, std::size_t workers = 1) const;

 private:
  ModelConfig config_;
  SentenceEncoder encoder_;
  ClassifierHead head_;
};

struct EncodedPair {
  std::string question_id;
  std::vector<std::size_t> question;
  std::vector<std::size_t> answer;
  CountFeatures features;
  int label = 0;
};

std::vector<EncodedPair> encode_pairs(std::span<const QaExample> examples,
                                      const Vocabulary& vocab, const IdfTable& idf);

class SentenceMatcher {
 public:
  SentenceMatcher() = default;
  static SentenceMatcher init(const ModelConfig& config, std::size_t embedding_dim,
                              Rng& rng);

  const ModelConfig& config() const { return config_; }
  const MatcherHead& head() const { return head_; }
  const SentenceEncoder& question_encoder() const { return question_encoder_; }
  /// The question encoder unless the model was built with unshared encoders.
  const SentenceEncoder& answer_encoder() const;

  std::vector<Tensor> parameters() const;
  NamedTensors named_parameters() const;
  SentenceMatcher with_parameters(std::span<const Tensor> params) const;

  Tensor probability(const EncodedPair& pair, const Vocabulary& vocab, Mode mode, Rng& rng,
                     std::size_t workers = 1) const;
  double score(const EncodedPair& pair, const Vocabulary& vocab,
               std::size_t workers = 1) const;

  Tensor loss(std::span<const EncodedPair> batch, std::span<const std::size_t> indices,
              const Vocabulary& vocab, Mode mode, Rng& rng, std::size_t workers = 1) const;

 private:
  ModelConfig config_;
  SentenceEncoder question_encoder_;
  std::optional<SentenceEncoder> answer_encoder_;
  MatcherHead head_;
};

/// Copies parameter values from `src` into `dst` (same shapes).
void copy_parameter_values(std::span<const Tensor> src, std::span<const Tensor> dst);
std::vector<std::vector<double>> snapshot(std::span<const Tensor> params);
void restore(std::span<const Tensor> params, const std::vector<std::vector<double>>& values);

// ---------------------------------------------------------------------------
// Checkpoints

/// Writes parameters, the model configuration, task tag and vocabulary hash.
void save_model(const SentenceClassifier& model, const Vocabulary& vocab,
                const std::filesystem::path& path);
void save_model(const SentenceMatcher& model, const Vocabulary& vocab,
                const std::filesystem::path& path);

/// Reads only the configuration of a checkpoint.
ModelConfig load_model_config(const std::filesystem::path& path);

/// Throws MismatchError when the checkpoint was written against a different
/// vocabulary or task, LoadError when the file is damaged.
SentenceClassifier load_classifier(const std::filesystem::path& path, const Vocabulary& vocab);
SentenceMatcher load_matcher(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace rnf
