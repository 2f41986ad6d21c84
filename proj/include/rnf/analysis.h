#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "rnf/conv.h"
#include "rnf/data.h"
#include "rnf/models.h"

namespace rnf {

/// Annotated constituents of one sentence.
struct AnnotatedSentence {
  int label = 0;
  std::size_t length = 0;
  std::map<Span, int> spans;  // includes the root span
  std::vector<std::string> tokens;
};

using PhraseIndex = std::vector<AnnotatedSentence>;

/// Binary granularity collapses labels to {0, 1}, drops sentences with a
/// neutral root and leaves neutral constituents out of the span map.
PhraseIndex build_phrase_index(std::span<const LabeledTree> trees, Granularity granularity);

/// Per sentence, the spans whose label equals the sentence label.
using KeyPhraseSet = std::set<Span>;
std::vector<KeyPhraseSet> key_phrases(const PhraseIndex& index);

struct LlcResult {
  std::optional<double> ratio;  // absent when no constituent has length m
  std::size_t matches = 0;
  std::size_t support = 0;
};

/// Among annotated constituents of exactly m tokens, the fraction whose
/// label equals their sentence label.
LlcResult llc_ratio(const PhraseIndex& index, std::size_t m);

enum class MatchMode { Exact, Containment };

struct HitRateResult {
  double rate = 0.0;
  std::size_t hits = 0;
  std::size_t evaluated = 0;
  std::vector<Span> detected;
};

/// Feature map of sentence i with window spans on original token indices.
using FeatureSource = std::function<FeatureMap(std::size_t sentence)>;

/// For each sentence: pool the feature map, detect the window nearest to the
/// pooled vector and count a hit when its span is a key phrase (exact) or
/// contains / is contained in one (containment).
HitRateResult hit_rate(const FeatureSource& features, const PhraseIndex& index,
                       MatchMode mode = MatchMode::Exact, std::size_t workers = 1);

/// Eval-mode feature maps of a trained encoder over the index sentences.
FeatureSource encoder_features(const SentenceEncoder& encoder, const Vocabulary& vocab,
                               const PhraseIndex& index, PaddingPolicy padding);

struct AnalysisRow {
  std::size_t m = 0;
  std::optional<double> llc_ratio;
  std::size_t llc_support = 0;
  std::optional<double> hit_rate_linear;
  std::optional<double> hit_rate_rnf;
  std::optional<std::size_t> sentences_evaluated;
};

/// CSV with header m,llc_ratio,llc_support,hit_rate_linear,hit_rate_rnf,
/// sentences_evaluated. Absent values are empty cells. When `svg` is given a
/// line chart of the three ratios against m is written there as well.
void emit_analysis_report(std::span<const AnalysisRow> rows, const std::filesystem::path& csv,
                          const std::filesystem::path& svg = {});
std::vector<AnalysisRow> parse_analysis_report(const std::filesystem::path& csv);

}  // namespace rnf
