#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rnf/cells.h"
#include "rnf/tensor.h"

namespace rnf {

enum class FilterKind { Linear, RnfGru, RnfLstm };
enum class Activation { Relu, Tanh };

std::string to_string(FilterKind kind);
FilterKind parse_filter_kind(const std::string& text);
std::string to_string(Activation activation);
Activation parse_activation(const std::string& text);

struct FilterSpec {
  FilterKind kind = FilterKind::Linear;
  std::size_t window = 3;        // m
  std::size_t feature_maps = 100;  // d
  Activation activation = Activation::Relu;  // linear filters only

  /// Throws ArgumentError unless window >= 1 and feature_maps >= 1.
  void validate() const;
  bool operator==(const FilterSpec&) const = default;
};

/// Inclusive token span [start, end].
using Span = std::pair<std::size_t, std::size_t>;

/// Per-window features, one column per window.
struct FeatureMap {
  Tensor values;                   // d x (n - m + 1)
  std::vector<Span> window_spans;  // span i == (i, i + m - 1)

  std::size_t columns() const { return window_spans.size(); }
  std::size_t feature_count() const { return values.dim(0); }
  /// Column i as a plain vector.
  std::vector<double> column(std::size_t i) const;
};

/// d linear filters over concatenated m-grams: row j of W is w_j.
struct LinearFilterBank {
  Tensor W;  // d x (m * k)
  Tensor b;  // d

  static LinearFilterBank init(const FilterSpec& spec, std::size_t input_size,
                               Rng& rng);
  std::vector<Tensor> parameters() const { return {W, b}; }
};

/// c_i = f(W [x_i; ...; x_{i+m-1}] + b) for every window. Windows are
/// evaluated as independent subgraphs over `workers` threads.
FeatureMap linear_filter_forward(const LinearFilterBank& bank,
                                 const Tensor& sentence, const FilterSpec& spec,
                                 std::size_t workers = 1);

/// c_i = last hidden state of the cell run from a zero state over
/// x_i ... x_{i+m-1}. Windows are evaluated as independent subgraphs over
/// `workers` threads; gradients are merged in window order.
FeatureMap rnf_forward(const Cell& cell, const Tensor& sentence,
                       const FilterSpec& spec, std::size_t workers = 1,
                       const RecurrentMasks& masks = {});

struct PooledSentence {
  Tensor v;                                 // d
  std::vector<std::size_t> argmax_windows;  // length d, lowest index on ties
};

/// Max-over-time pooling.
PooledSentence encode_sentence(const FeatureMap& fmap);

struct Detection {
  std::size_t window = 0;
  double distance = 0.0;
};

/// Window whose feature column is nearest (Euclidean) to v; ties go to the
/// lowest index.
Detection detect_window(const FeatureMap& fmap, std::span<const double> v);

/// One CSV row per window: window_start,window_end,f0,...,f{d-1}.
void write_feature_map_csv(const FeatureMap& fmap, std::ostream& out);

// ---------------------------------------------------------------------------
// Filters as a single configurable unit

enum class PaddingPolicy { Symmetric, Reject };

/// Filter parameters of any kind together with the spec that shaped them.
class ConvFilter {
 public:
  ConvFilter() = default;
  static ConvFilter init(const FilterSpec& spec, std::size_t input_size, Rng& rng);

  const FilterSpec& spec() const { return spec_; }
  std::size_t input_size() const { return input_size_; }
  std::vector<Tensor> parameters() const;
  NamedTensors named_parameters(const std::string& prefix) const;
  ConvFilter with_parameters(std::span<const Tensor> params) const;

  /// Dispatches to linear_filter_forward or rnf_forward. Masks apply to RNFs.
  FeatureMap forward(const Tensor& sentence, std::size_t workers = 1,
                     const RecurrentMasks& masks = {}) const;

  const std::variant<LinearFilterBank, LstmCell, GruCell>& impl() const {
    return impl_;
  }

 private:
  FilterSpec spec_;
  std::size_t input_size_ = 0;
  std::variant<LinearFilterBank, LstmCell, GruCell> impl_;
};

struct PaddedSentence {
  Tensor embeddings;         // max(n, m) x k
  std::size_t left_pad = 0;  // rows of padding before the first real token
  std::size_t original_length = 0;
};

/// Pads a sentence shorter than `window` symmetrically (extra row on the
/// right) with copies of `pad_row` so exactly one window fits. Longer
/// sentences pass through untouched.
PaddedSentence pad_to_window(const Tensor& sentence, std::size_t window,
                             const Tensor& pad_row);

/// Maps window spans of a padded sentence back to original token indices,
/// clipping to [0, original_length - 1].
void restore_original_spans(FeatureMap& fmap, const PaddedSentence& padded);

}  // namespace rnf
