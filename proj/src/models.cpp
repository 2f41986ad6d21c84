#include "rnf/models.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "rnf/checkpoint.h"
#include "rnf/errors.h"
#include "rnf/parallel.h"

namespace rnf {

std::string to_string(Task task) {
  switch (task) {
    case Task::Sst2: return "sst2";
    case Task::Sst5: return "sst5";
    case Task::Qa: return "qa";
  }
  return "?";
}

Task parse_task(const std::string& text) {
  if (text == "sst2") return Task::Sst2;
  if (text == "sst5") return Task::Sst5;
  if (text == "qa") return Task::Qa;
  throw ArgumentError("unknown task '" + text + "' (expected sst2, sst5 or qa)");
}

std::size_t class_count(Task task) {
  switch (task) {
    case Task::Sst2: return 2;
    case Task::Sst5: return 5;
    case Task::Qa: break;
  }
  throw ArgumentError("task qa has no class count");
}

std::vector<EncodedSentence> encode_sentences(std::span<const SentenceExample> examples,
                                              const Vocabulary& vocab) {
  std::vector<EncodedSentence> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back({vocab.encode(ex.tokens), ex.label});
  return out;
}

// ---------------------------------------------------------------------------
// Encoder

SentenceEncoder SentenceEncoder::init(const FilterSpec& spec, std::size_t embedding_dim,
                                      Rng& rng) {
  SentenceEncoder e;
  e.filter_ = ConvFilter::init(spec, embedding_dim, rng);
  e.pad_row_ = Tensor::zeros({embedding_dim}, true);
  return e;
}

std::vector<Tensor> SentenceEncoder::parameters() const {
  auto p = filter_.parameters();
  p.push_back(pad_row_);
  return p;
}

NamedTensors SentenceEncoder::named_parameters(const std::string& prefix) const {
  auto p = filter_.named_parameters(prefix + "filter.");
  p.emplace_back(prefix + "pad", pad_row_);
  return p;
}

SentenceEncoder SentenceEncoder::with_parameters(std::span<const Tensor> params) const {
  const std::size_t n = filter_.parameters().size();
  if (params.size() != n + 1) throw ArgumentError("encoder parameter count mismatch");
  SentenceEncoder e;
  e.filter_ = filter_.with_parameters(params.first(n));
  e.pad_row_ = params[n];
  return e;
}

EncoderOutput SentenceEncoder::encode(std::span<const std::size_t> ids,
                                      const Vocabulary& vocab, const DropoutRates& dropout,
                                      PaddingPolicy padding, Mode mode, Rng& rng,
                                      std::size_t workers) const {
  if (ids.empty()) throw ArgumentError("cannot encode an empty sentence");
  if (vocab.dim() != filter_.input_size()) {
    throw DimensionError("embeddings of width " + std::to_string(vocab.dim()) +
                         " for a filter expecting " + std::to_string(filter_.input_size()));
  }
  const FilterSpec& spec = filter_.spec();
  Tensor x = apply_dropout(vocab.lookup(ids), {dropout.embedding, DropoutSite::Embedding},
                           mode, rng);
  PaddedSentence padded;
  if (padding == PaddingPolicy::Symmetric) {
    padded = pad_to_window(x, spec.window, pad_row_);
  } else {
    padded.embeddings = x;
    padded.original_length = ids.size();
  }
  RecurrentMasks masks;
  if (mode == Mode::Train && spec.kind != FilterKind::Linear) {
    masks.input = dropout_mask(filter_.input_size(), dropout.rnn_input, rng);
    masks.recurrent = dropout_mask(spec.feature_maps, dropout.rnn_recurrent, rng);
  }
  EncoderOutput out;
  out.fmap = filter_.forward(padded.embeddings, workers, masks);
  restore_original_spans(out.fmap, padded);
  out.pooled = encode_sentence(out.fmap);
  out.v = apply_dropout(out.pooled.v, {dropout.pooling, DropoutSite::Pooling}, mode, rng);
  return out;
}

// ---------------------------------------------------------------------------
// Heads and losses

ClassifierHead ClassifierHead::init(std::size_t classes, std::size_t d, Rng& rng) {
  if (classes < 2) throw ArgumentError("a classifier needs at least 2 classes");
  return {Tensor::from({classes, d}, uniform_values(classes * d, 0.05, rng), true),
          Tensor::zeros({classes}, true)};
}

Tensor classify(const Tensor& v, const ClassifierHead& head) {
  return softmax(add(matvec(head.W_out, v), head.b_out));
}

MatcherHead MatcherHead::init(std::size_t d, Rng& rng) {
  return {Tensor::from({d, d}, uniform_values(d * d, 0.05, rng), true),
          Tensor::zeros({2}, true), Tensor::scalar(0.0, true)};
}

Tensor match_score(const Tensor& v1, const Tensor& v2, const CountFeatures& feats,
                   const MatcherHead& head) {
  if (head.M.rank() != 2 || head.M.dim(0) != v1.numel() || head.M.dim(1) != v2.numel() ||
      head.w_feat.numel() != 2) {
    throw DimensionError("matcher head " + shape_to_string(head.M.shape()) +
                         " incompatible with sentence vectors of sizes " +
                         std::to_string(v1.numel()) + " and " + std::to_string(v2.numel()));
  }
  Tensor score = bilinear(v1, head.M, v2);
  Tensor f = Tensor::vector({feats.raw_overlap, feats.idf_overlap});
  return sigmoid(add(add(score, dot(head.w_feat, f)), reshape(head.b, {})));
}

IdfTable compute_idf(std::span<const std::vector<std::string>> answers) {
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& a : answers) {
    std::unordered_set<std::string> distinct(a.begin(), a.end());
    for (const auto& t : distinct) ++df[t];
  }
  const double n = static_cast<double>(answers.size());
  IdfTable idf;
  for (const auto& [t, count] : df) {
    idf[t] = std::max(0.0, std::log(n / (1.0 + static_cast<double>(count))));
  }
  return idf;
}

CountFeatures count_features(std::span<const std::string> question,
                             std::span<const std::string> answer, const IdfTable& idf,
                             const std::unordered_set<std::string>& stopwords) {
  const std::unordered_set<std::string> in_answer(answer.begin(), answer.end());
  std::unordered_set<std::string> counted;
  CountFeatures f;
  for (const auto& t : question) {
    if (stopwords.count(t) || !in_answer.count(t) || !counted.insert(t).second) continue;
    f.raw_overlap += 1.0;
    if (auto it = idf.find(t); it != idf.end()) f.idf_overlap += it->second;
  }
  return f;
}

CountFeatures count_features(std::span<const std::size_t> question,
                             std::span<const std::size_t> answer,
                             const std::unordered_map<std::size_t, double>& idf) {
  const std::unordered_set<std::size_t> in_answer(answer.begin(), answer.end());
  std::unordered_set<std::size_t> counted;
  CountFeatures f;
  for (auto t : question) {
    if (!in_answer.count(t) || !counted.insert(t).second) continue;
    f.raw_overlap += 1.0;
    if (auto it = idf.find(t); it != idf.end()) f.idf_overlap += it->second;
  }
  return f;
}

Tensor cross_entropy(const Tensor& probabilities, std::size_t gold) {
  return scale(clamped_log(pick(probabilities, gold), kProbabilityFloor,
                           1.0 - kProbabilityFloor),
               -1.0);
}

Tensor binary_cross_entropy(const Tensor& probability, int label) {
  const Tensor p = reshape(probability, {});
  const Tensor q = label == 1 ? p : one_minus(p);
  return scale(clamped_log(q, kProbabilityFloor, 1.0 - kProbabilityFloor), -1.0);
}

namespace {

std::vector<std::uint64_t> draw_seeds(std::size_t count, Rng& rng) {
  std::vector<std::uint64_t> seeds(count);
  for (auto& s : seeds) s = rng();
  return seeds;
}

}  // namespace

// ---------------------------------------------------------------------------
// Classifier

SentenceClassifier SentenceClassifier::init(const ModelConfig& config,
                                            std::size_t embedding_dim, Rng& rng) {
  SentenceClassifier m;
  m.config_ = config;
  m.encoder_ = SentenceEncoder::init(config.filter, embedding_dim, rng);
  m.head_ = ClassifierHead::init(class_count(config.task), config.filter.feature_maps, rng);
  return m;
}

std::vector<Tensor> SentenceClassifier::parameters() const {
  auto p = encoder_.parameters();
  p.push_back(head_.W_out);
  p.push_back(head_.b_out);
  return p;
}

NamedTensors SentenceClassifier::named_parameters() const {
  auto p = encoder_.named_parameters("encoder.");
  p.emplace_back("head.W_out", head_.W_out);
  p.emplace_back("head.b_out", head_.b_out);
  return p;
}

SentenceClassifier SentenceClassifier::with_parameters(std::span<const Tensor> params) const {
  const std::size_t n = encoder_.parameters().size();
  if (params.size() != n + 2) throw ArgumentError("classifier parameter count mismatch");
  SentenceClassifier m = *this;
  m.encoder_ = encoder_.with_parameters(params.first(n));
  m.head_ = {params[n], params[n + 1]};
  return m;
}

Tensor SentenceClassifier::probabilities(std::span<const std::size_t> ids,
                                         const Vocabulary& vocab, Mode mode, Rng& rng,
                                         std::size_t workers) const {
  auto enc = encoder_.encode(ids, vocab, config_.dropout, config_.padding, mode, rng, workers);
  return classify(enc.v, head_);
}

int SentenceClassifier::predict(std::span<const std::size_t> ids, const Vocabulary& vocab,
                                std::size_t workers) const {
  NoGradGuard no_grad;
  Rng unused(0);
  const auto probs = probabilities(ids, vocab, Mode::Eval, unused, workers);
  const auto p = probs.data();
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

Tensor SentenceClassifier::loss(std::span<const EncodedSentence> batch,
                                std::span<const std::size_t> indices, const Vocabulary& vocab,
                                Mode mode, Rng& rng, std::size_t workers) const {
  if (indices.empty()) throw ArgumentError("loss over an empty batch");
  const int classes = static_cast<int>(head_.classes());
  for (auto i : indices) {
    if (i >= batch.size()) throw ArgumentError("batch index out of range");
    if (batch[i].label < 0 || batch[i].label >= classes) {
      throw DataError("example " + std::to_string(i) + " has label " +
                      std::to_string(batch[i].label) + " outside 0.." +
                      std::to_string(classes - 1));
    }
  }
  const auto seeds = draw_seeds(indices.size(), rng);
  const auto params = parameters();
  auto losses = run_isolated(params, indices.size(), workers,
                             [&](std::size_t i, std::span<const Tensor> shared) {
    const auto local = with_parameters(shared);
    const auto& ex = batch[indices[i]];
    Rng r(seeds[i]);
    return cross_entropy(local.probabilities(ex.ids, vocab, mode, r, workers),
                         static_cast<std::size_t>(ex.label));
  });
  return mean(losses);
}

// ---------------------------------------------------------------------------
// Matcher

std::vector<EncodedPair> encode_pairs(std::span<const QaExample> examples,
                                      const Vocabulary& vocab, const IdfTable& idf) {
  std::vector<EncodedPair> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    out.push_back({ex.question_id, vocab.encode(ex.question), vocab.encode(ex.answer),
                   count_features(ex.question, ex.answer, idf), ex.label});
  }
  return out;
}

SentenceMatcher SentenceMatcher::init(const ModelConfig& config, std::size_t embedding_dim,
                                      Rng& rng) {
  SentenceMatcher m;
  m.config_ = config;
  m.question_encoder_ = SentenceEncoder::init(config.filter, embedding_dim, rng);
  if (!config.shared_encoder) {
    m.answer_encoder_ = SentenceEncoder::init(config.filter, embedding_dim, rng);
  }
  m.head_ = MatcherHead::init(config.filter.feature_maps, rng);
  return m;
}

const SentenceEncoder& SentenceMatcher::answer_encoder() const {
  return answer_encoder_ ? *answer_encoder_ : question_encoder_;
}

std::vector<Tensor> SentenceMatcher::parameters() const {
  auto p = question_encoder_.parameters();
  if (answer_encoder_) {
    auto a = answer_encoder_->parameters();
    p.insert(p.end(), a.begin(), a.end());
  }
  p.push_back(head_.M);
  p.push_back(head_.w_feat);
  p.push_back(head_.b);
  return p;
}

NamedTensors SentenceMatcher::named_parameters() const {
  auto p = question_encoder_.named_parameters("encoder.");
  if (answer_encoder_) {
    auto a = answer_encoder_->named_parameters("answer_encoder.");
    p.insert(p.end(), a.begin(), a.end());
  }
  p.emplace_back("head.M", head_.M);
  p.emplace_back("head.w_feat", head_.w_feat);
  p.emplace_back("head.b", head_.b);
  return p;
}

SentenceMatcher SentenceMatcher::with_parameters(std::span<const Tensor> params) const {
  const std::size_t n = question_encoder_.parameters().size();
  const std::size_t total = (answer_encoder_ ? 2 * n : n) + 3;
  if (params.size() != total) throw ArgumentError("matcher parameter count mismatch");
  SentenceMatcher m = *this;
  m.question_encoder_ = question_encoder_.with_parameters(params.first(n));
  std::size_t next = n;
  if (answer_encoder_) {
    m.answer_encoder_ = answer_encoder_->with_parameters(params.subspan(n, n));
    next += n;
  }
  m.head_ = {params[next], params[next + 1], params[next + 2]};
  return m;
}

Tensor SentenceMatcher::probability(const EncodedPair& pair, const Vocabulary& vocab,
                                    Mode mode, Rng& rng, std::size_t workers) const {
  auto q = question_encoder_.encode(pair.question, vocab, config_.dropout, config_.padding,
                                    mode, rng, workers);
  auto a = answer_encoder().encode(pair.answer, vocab, config_.dropout, config_.padding,
                                   mode, rng, workers);
  return match_score(q.v, a.v, pair.features, head_);
}

double SentenceMatcher::score(const EncodedPair& pair, const Vocabulary& vocab,
                              std::size_t workers) const {
  NoGradGuard no_grad;
  Rng unused(0);
  return probability(pair, vocab, Mode::Eval, unused, workers).item();
}

Tensor SentenceMatcher::loss(std::span<const EncodedPair> batch,
                             std::span<const std::size_t> indices, const Vocabulary& vocab,
                             Mode mode, Rng& rng, std::size_t workers) const {
  if (indices.empty()) throw ArgumentError("loss over an empty batch");
  for (auto i : indices) {
    if (i >= batch.size()) throw ArgumentError("batch index out of range");
    if (batch[i].label != 0 && batch[i].label != 1) {
      throw DataError("example " + std::to_string(i) + " (question " + batch[i].question_id +
                      ") has non-binary label " + std::to_string(batch[i].label));
    }
  }
  const auto seeds = draw_seeds(indices.size(), rng);
  const auto params = parameters();
  auto losses = run_isolated(params, indices.size(), workers,
                             [&](std::size_t i, std::span<const Tensor> shared) {
    const auto local = with_parameters(shared);
    const auto& ex = batch[indices[i]];
    Rng r(seeds[i]);
    return binary_cross_entropy(local.probability(ex, vocab, mode, r, workers), ex.label);
  });
  return mean(losses);
}

// ---------------------------------------------------------------------------
// Parameter values

void copy_parameter_values(std::span<const Tensor> src, std::span<const Tensor> dst) {
  if (src.size() != dst.size()) throw ArgumentError("parameter count mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].shape() != dst[i].shape()) {
      throw DimensionError("parameter " + std::to_string(i) + " shape " +
                           shape_to_string(src[i].shape()) + " vs " +
                           shape_to_string(dst[i].shape()));
    }
    Tensor target = dst[i];
    const auto values = src[i].data();
    std::copy(values.begin(), values.end(), target.mutable_data().begin());
  }
}

std::vector<std::vector<double>> snapshot(std::span<const Tensor> params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.to_vector());
  return out;
}

void restore(std::span<const Tensor> params, const std::vector<std::vector<double>>& values) {
  if (params.size() != values.size()) throw ArgumentError("snapshot size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    auto data = p.mutable_data();
    if (data.size() != values[i].size()) throw DimensionError("snapshot shape mismatch");
    std::copy(values[i].begin(), values[i].end(), data.begin());
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Checkpoint make_checkpoint(const ModelConfig& c, const Vocabulary& vocab,
                           NamedTensors params) {
  Checkpoint ckpt;
  ckpt.meta["task"] = to_string(c.task);
  ckpt.meta["filter"] = to_string(c.filter.kind);
  ckpt.meta["window"] = std::to_string(c.filter.window);
  ckpt.meta["feature_maps"] = std::to_string(c.filter.feature_maps);
  ckpt.meta["activation"] = to_string(c.filter.activation);
  ckpt.meta["dropout_embedding"] = exact(c.dropout.embedding);
  ckpt.meta["dropout_pooling"] = exact(c.dropout.pooling);
  ckpt.meta["dropout_rnn_input"] = exact(c.dropout.rnn_input);
  ckpt.meta["dropout_rnn_recurrent"] = exact(c.dropout.rnn_recurrent);
  ckpt.meta["padding"] = c.padding == PaddingPolicy::Symmetric ? "symmetric" : "reject";
  ckpt.meta["shared_encoder"] = c.shared_encoder ? "1" : "0";
  ckpt.meta["embedding_dim"] = std::to_string(vocab.dim());
  ckpt.meta["vocab_size"] = std::to_string(vocab.size());
  ckpt.meta["vocab_hash"] = hex64(vocab.hash());
  ckpt.params = std::move(params);
  return ckpt;
}

std::size_t meta_size(const Checkpoint& ckpt, const std::string& key) {
  const auto& text = ckpt.require(key);
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used == text.size()) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  throw LoadError("meta." + key, "not an unsigned integer: '" + text + "'");
}

double meta_double(const Checkpoint& ckpt, const std::string& key) {
  const auto& text = ckpt.require(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw LoadError("meta." + key, "not a number: '" + text + "'");
}

ModelConfig config_from(const Checkpoint& ckpt) {
  ModelConfig c;
  try {
    c.task = parse_task(ckpt.require("task"));
    c.filter.kind = parse_filter_kind(ckpt.require("filter"));
    c.filter.activation = parse_activation(ckpt.require("activation"));
  } catch (const ArgumentError& e) {
    throw LoadError("meta", e.what());
  }
  c.filter.window = meta_size(ckpt, "window");
  c.filter.feature_maps = meta_size(ckpt, "feature_maps");
  c.dropout.embedding = meta_double(ckpt, "dropout_embedding");
  c.dropout.pooling = meta_double(ckpt, "dropout_pooling");
  c.dropout.rnn_input = meta_double(ckpt, "dropout_rnn_input");
  c.dropout.rnn_recurrent = meta_double(ckpt, "dropout_rnn_recurrent");
  const auto& padding = ckpt.require("padding");
  if (padding != "symmetric" && padding != "reject") {
    throw LoadError("meta.padding", "unknown policy '" + padding + "'");
  }
  c.padding = padding == "symmetric" ? PaddingPolicy::Symmetric : PaddingPolicy::Reject;
  c.shared_encoder = ckpt.require("shared_encoder") != "0";
  return c;
}

void check_vocabulary(const Checkpoint& ckpt, const Vocabulary& vocab) {
  if (ckpt.require("vocab_hash") != hex64(vocab.hash())) {
    throw MismatchError("checkpoint vocabulary hash " + ckpt.require("vocab_hash") +
                        " does not match the loaded vocabulary (" + hex64(vocab.hash()) +
                        ")");
  }
  if (meta_size(ckpt, "embedding_dim") != vocab.dim()) {
    throw MismatchError("checkpoint embedding width differs from the loaded vocabulary");
  }
}

/// Matches checkpoint tensors to the template's names and shapes.
std::vector<Tensor> ordered_parameters(const Checkpoint& ckpt, const NamedTensors& expected) {
  if (ckpt.params.size() != expected.size()) {
    throw LoadError("params", "expected " + std::to_string(expected.size()) +
                                  " tensors, found " + std::to_string(ckpt.params.size()));
  }
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& [name, t] = ckpt.params[i];
    if (name != expected[i].first) {
      throw LoadError("param/" + expected[i].first, "found '" + name + "' instead");
    }
    if (t.shape() != expected[i].second.shape()) {
      throw LoadError("param/" + name, "shape " + shape_to_string(t.shape()) +
                                           ", expected " +
                                           shape_to_string(expected[i].second.shape()));
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace

void save_model(const SentenceClassifier& model, const Vocabulary& vocab,
                const std::filesystem::path& path) {
  save_checkpoint(make_checkpoint(model.config(), vocab, model.named_parameters()), path);
}

void save_model(const SentenceMatcher& model, const Vocabulary& vocab,
                const std::filesystem::path& path) {
  save_checkpoint(make_checkpoint(model.config(), vocab, model.named_parameters()), path);
}

ModelConfig load_model_config(const std::filesystem::path& path) {
  return config_from(load_checkpoint(path));
}

SentenceClassifier load_classifier(const std::filesystem::path& path,
                                   const Vocabulary& vocab) {
  const auto ckpt = load_checkpoint(path);
  const auto config = config_from(ckpt);
  if (config.task == Task::Qa) throw MismatchError("checkpoint holds a qa matcher");
  check_vocabulary(ckpt, vocab);
  Rng rng(0);
  const auto shell = SentenceClassifier::init(config, vocab.dim(), rng);
  return shell.with_parameters(ordered_parameters(ckpt, shell.named_parameters()));
}

SentenceMatcher load_matcher(const std::filesystem::path& path, const Vocabulary& vocab) {
  const auto ckpt = load_checkpoint(path);
  const auto config = config_from(ckpt);
  if (config.task != Task::Qa) {
    throw MismatchError("checkpoint holds a " + to_string(config.task) + " classifier");
  }
  check_vocabulary(ckpt, vocab);
  Rng rng(0);
  const auto shell = SentenceMatcher::init(config, vocab.dim(), rng);
  return shell.with_parameters(ordered_parameters(ckpt, shell.named_parameters()));
}

}  // namespace rnf
