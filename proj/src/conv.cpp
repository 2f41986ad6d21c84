#include "rnf/conv.h"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "rnf/errors.h"
#include "rnf/parallel.h"

namespace rnf {

std::string to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::Linear: return "linear";
    case FilterKind::RnfGru: return "rnf-gru";
    case FilterKind::RnfLstm: return "rnf-lstm";
  }
  return "?";
}

FilterKind parse_filter_kind(const std::string& text) {
  if (text == "linear") return FilterKind::Linear;
  if (text == "rnf-gru") return FilterKind::RnfGru;
  if (text == "rnf-lstm") return FilterKind::RnfLstm;
  throw ArgumentError("unknown filter kind '" + text +
                      "' (expected linear, rnf-gru or rnf-lstm)");
}

std::string to_string(Activation activation) {
  return activation == Activation::Relu ? "relu" : "tanh";
}

Activation parse_activation(const std::string& text) {
  if (text == "relu") return Activation::Relu;
  if (text == "tanh") return Activation::Tanh;
  throw ArgumentError("unknown activation '" + text + "' (expected relu or tanh)");
}

void FilterSpec::validate() const {
  if (window < 1) throw ArgumentError("filter window must be >= 1");
  if (feature_maps < 1) throw ArgumentError("feature map count must be >= 1");
}

std::vector<double> FeatureMap::column(std::size_t i) const {
  const std::size_t d = values.dim(0), cols = values.dim(1);
  std::vector<double> out(d);
  const auto data = values.data();
  for (std::size_t r = 0; r < d; ++r) out[r] = data[r * cols + i];
  return out;
}

LinearFilterBank LinearFilterBank::init(const FilterSpec& spec,
                                        std::size_t input_size, Rng& rng) {
  const std::size_t d = spec.feature_maps;
  const std::size_t width = spec.window * input_size;
  LinearFilterBank bank;
  bank.W = Tensor::from({d, width}, uniform_values(d * width, 0.05, rng), true);
  bank.b = Tensor::zeros({d}, true);
  return bank;
}

namespace {

void check_sentence(const Tensor& sentence, std::size_t k, const FilterSpec& spec) {
  spec.validate();
  if (sentence.rank() != 2 || sentence.dim(1) != k) {
    throw DimensionError("sentence " + shape_to_string(sentence.shape()) +
                         " does not match filter input size " + std::to_string(k));
  }
  if (sentence.dim(0) < spec.window) {
    throw SentenceTooShortError(sentence.dim(0), spec.window);
  }
}

FeatureMap stack_columns(const std::vector<Tensor>& columns, std::size_t window) {
  const std::size_t d = columns.front().numel();
  std::vector<Tensor> parts;
  parts.reserve(columns.size());
  for (const auto& c : columns) parts.push_back(reshape(c, {d, 1}));
  FeatureMap fmap;
  fmap.values = concat(parts, 1);
  fmap.window_spans.reserve(columns.size());
  for (std::size_t i = 0; i < columns.size(); ++i) {
    fmap.window_spans.emplace_back(i, i + window - 1);
  }
  return fmap;
}

Tensor window_final_state(const Cell& cell, const Tensor& window,
                          const RecurrentMasks& masks) {
  const std::size_t d = cell_hidden_size(cell);
  Tensor h = Tensor::zeros({d});
  Tensor c = Tensor::zeros({d});
  for (std::size_t t = 0; t < window.dim(0); ++t) {
    Tensor x = apply_mask(row(window, t), masks.input);
    Tensor h_in = apply_mask(h, masks.recurrent);
    if (const auto* lstm = std::get_if<LstmCell>(&cell)) {
      auto next = lstm_step(*lstm, h_in, c, x);
      h = std::move(next.h);
      c = std::move(next.c);
    } else {
      h = gru_step(std::get<GruCell>(cell), h_in, x);
    }
  }
  return h;
}

}  // namespace

FeatureMap linear_filter_forward(const LinearFilterBank& bank,
                                 const Tensor& sentence, const FilterSpec& spec,
                                 std::size_t workers) {
  const std::size_t d = spec.feature_maps;
  const std::size_t m = spec.window;
  if (bank.W.rank() != 2 || bank.W.dim(0) != d || bank.W.dim(1) % m != 0 ||
      bank.b.shape() != Shape{d}) {
    throw DimensionError("linear filter bank W " + shape_to_string(bank.W.shape()) +
                         ", b " + shape_to_string(bank.b.shape()) +
                         " inconsistent with window " + std::to_string(m) +
                         " and " + std::to_string(d) + " feature maps");
  }
  const std::size_t k = bank.W.dim(1) / m;
  check_sentence(sentence, k, spec);
  const std::size_t windows = sentence.dim(0) - m + 1;
  const Activation act = spec.activation;

  const std::vector<Tensor> shared{bank.W, bank.b, sentence};
  auto columns = run_isolated(shared, windows, workers,
                              [m, k, act](std::size_t i, std::span<const Tensor> s) {
    Tensor x = reshape(slice_rows(s[2], i, m), {m * k});
    Tensor pre = add(matvec(s[0], x), s[1]);
    return act == Activation::Relu ? relu(pre) : tanh(pre);
  });
  return stack_columns(columns, m);
}

FeatureMap rnf_forward(const Cell& cell, const Tensor& sentence,
                       const FilterSpec& spec, std::size_t workers,
                       const RecurrentMasks& masks) {
  if (cell_hidden_size(cell) != spec.feature_maps) {
    throw DimensionError("RNF cell hidden size " +
                         std::to_string(cell_hidden_size(cell)) +
                         " differs from feature map count " +
                         std::to_string(spec.feature_maps));
  }
  check_sentence(sentence, cell_input_size(cell), spec);
  const std::size_t m = spec.window;
  const std::size_t windows = sentence.dim(0) - m + 1;

  std::vector<Tensor> shared = cell_parameters(cell);
  const std::size_t n_params = shared.size();
  shared.push_back(sentence);
  auto columns = run_isolated(
      shared, windows, workers,
      [&cell, &masks, m, n_params](std::size_t i, std::span<const Tensor> s) {
        Cell local = cell_with_parameters(cell, s.first(n_params));
        return window_final_state(local, slice_rows(s[n_params], i, m), masks);
      });
  return stack_columns(columns, m);
}

PooledSentence encode_sentence(const FeatureMap& fmap) {
  if (fmap.values.rank() != 2 || fmap.values.dim(1) == 0) {
    throw ArgumentError("encode_sentence needs a feature map with at least one column");
  }
  auto result = max_over_axis(fmap.values, 1);
  return {std::move(result.values), std::move(result.indices)};
}

Detection detect_window(const FeatureMap& fmap, std::span<const double> v) {
  const std::size_t d = fmap.values.dim(0);
  const std::size_t cols = fmap.values.dim(1);
  if (cols == 0) throw ArgumentError("detect_window on an empty feature map");
  if (v.size() != d) {
    throw DimensionError("pooled vector of length " + std::to_string(v.size()) +
                         " for feature map with " + std::to_string(d) + " rows");
  }
  const auto data = fmap.values.data();
  Detection best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < cols; ++i) {
    double sq = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      const double diff = data[r * cols + i] - v[r];
      sq += diff * diff;
    }
    const double dist = std::sqrt(sq);
    if (dist < best.distance) best = {i, dist};
  }
  return best;
}

void write_feature_map_csv(const FeatureMap& fmap, std::ostream& out) {
  const std::size_t d = fmap.feature_count();
  out << "window_start,window_end";
  for (std::size_t r = 0; r < d; ++r) out << ",f" << r;
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < fmap.columns(); ++i) {
    out << fmap.window_spans[i].first << ',' << fmap.window_spans[i].second;
    for (double v : fmap.column(i)) out << ',' << v;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// ConvFilter

ConvFilter ConvFilter::init(const FilterSpec& spec, std::size_t input_size, Rng& rng) {
  spec.validate();
  ConvFilter f;
  f.spec_ = spec;
  f.input_size_ = input_size;
  switch (spec.kind) {
    case FilterKind::Linear:
      f.impl_ = LinearFilterBank::init(spec, input_size, rng);
      break;
    case FilterKind::RnfLstm:
      f.impl_ = LstmCell::init(input_size, spec.feature_maps, rng);
      break;
    case FilterKind::RnfGru:
      f.impl_ = GruCell::init(input_size, spec.feature_maps, rng);
      break;
  }
  return f;
}

std::vector<Tensor> ConvFilter::parameters() const {
  return std::visit([](const auto& impl) { return impl.parameters(); }, impl_);
}

NamedTensors ConvFilter::named_parameters(const std::string& prefix) const {
  if (const auto* bank = std::get_if<LinearFilterBank>(&impl_)) {
    return {{prefix + "W", bank->W}, {prefix + "b", bank->b}};
  }
  if (const auto* lstm = std::get_if<LstmCell>(&impl_)) {
    return lstm->named_parameters(prefix);
  }
  return std::get<GruCell>(impl_).named_parameters(prefix);
}

ConvFilter ConvFilter::with_parameters(std::span<const Tensor> params) const {
  ConvFilter f = *this;
  if (std::holds_alternative<LinearFilterBank>(impl_)) {
    if (params.size() != 2) throw ArgumentError("linear filter needs 2 parameters");
    f.impl_ = LinearFilterBank{params[0], params[1]};
  } else if (const auto* lstm = std::get_if<LstmCell>(&impl_)) {
    f.impl_ = lstm->with_parameters(params);
  } else {
    f.impl_ = std::get<GruCell>(impl_).with_parameters(params);
  }
  return f;
}

FeatureMap ConvFilter::forward(const Tensor& sentence, std::size_t workers,
                               const RecurrentMasks& masks) const {
  if (const auto* bank = std::get_if<LinearFilterBank>(&impl_)) {
    return linear_filter_forward(*bank, sentence, spec_, workers);
  }
  if (const auto* lstm = std::get_if<LstmCell>(&impl_)) {
    return rnf_forward(Cell{*lstm}, sentence, spec_, workers, masks);
  }
  return rnf_forward(Cell{std::get<GruCell>(impl_)}, sentence, spec_, workers, masks);
}

// ---------------------------------------------------------------------------
// Padding

PaddedSentence pad_to_window(const Tensor& sentence, std::size_t window,
                             const Tensor& pad_row) {
  const std::size_t n = sentence.dim(0);
  PaddedSentence out;
  out.original_length = n;
  if (n >= window) {
    out.embeddings = sentence;
    return out;
  }
  const std::size_t k = sentence.dim(1);
  if (pad_row.numel() != k) {
    throw DimensionError("padding row of " + std::to_string(pad_row.numel()) +
                         " values for embeddings of width " + std::to_string(k));
  }
  const std::size_t total = window - n;
  out.left_pad = total / 2;
  const std::size_t right = total - out.left_pad;
  Tensor pad = reshape(pad_row, {1, k});
  std::vector<Tensor> rows;
  for (std::size_t i = 0; i < out.left_pad; ++i) rows.push_back(pad);
  if (n > 0) rows.push_back(sentence);
  for (std::size_t i = 0; i < right; ++i) rows.push_back(pad);
  out.embeddings = concat(rows, 0);
  return out;
}

void restore_original_spans(FeatureMap& fmap, const PaddedSentence& padded) {
  if (padded.left_pad == 0 && padded.embeddings.dim(0) == padded.original_length) {
    return;
  }
  const std::size_t first = padded.left_pad;
  const std::size_t last = padded.left_pad + padded.original_length - 1;
  for (auto& [start, end] : fmap.window_spans) {
    start = std::max(start, first) - first;
    end = std::min(end, last) - first;
  }
}

}  // namespace rnf
