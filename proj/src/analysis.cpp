#include "rnf/analysis.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rnf/errors.h"
#include "rnf/parallel.h"

namespace rnf {

PhraseIndex build_phrase_index(std::span<const LabeledTree> trees, Granularity granularity) {
  PhraseIndex index;
  for (const auto& tree : trees) {
    auto collapse = [granularity](int label) -> std::optional<int> {
      return granularity == Granularity::Binary ? binary_label(label) : label;
    };
    const auto root = collapse(tree.label);
    if (!root) continue;
    AnnotatedSentence s;
    s.label = *root;
    s.tokens = tree.leaves();
    s.length = s.tokens.size();
    for (const auto& phrase : extract_phrases(tree)) {
      if (auto label = collapse(phrase.label)) s.spans.emplace(phrase.span, *label);
    }
    index.push_back(std::move(s));
  }
  return index;
}

std::vector<KeyPhraseSet> key_phrases(const PhraseIndex& index) {
  std::vector<KeyPhraseSet> out;
  out.reserve(index.size());
  for (const auto& s : index) {
    KeyPhraseSet keys;
    for (const auto& [span, label] : s.spans) {
      if (label == s.label) keys.insert(span);
    }
    out.push_back(std::move(keys));
  }
  return out;
}

LlcResult llc_ratio(const PhraseIndex& index, std::size_t m) {
  if (m < 1) throw ArgumentError("llc_ratio needs m >= 1");
  LlcResult r;
  for (const auto& s : index) {
    for (const auto& [span, label] : s.spans) {
      if (span.second - span.first + 1 != m) continue;
      ++r.support;
      if (label == s.label) ++r.matches;
    }
  }
  if (r.support > 0) {
    r.ratio = static_cast<double>(r.matches) / static_cast<double>(r.support);
  }
  return r;
}

namespace {

bool contains(const Span& outer, const Span& inner) {
  return outer.first <= inner.first && inner.second <= outer.second;
}

bool is_hit(const Span& detected, const KeyPhraseSet& keys, MatchMode mode) {
  if (mode == MatchMode::Exact) return keys.count(detected) != 0;
  return std::any_of(keys.begin(), keys.end(), [&](const Span& key) {
    return contains(key, detected) || contains(detected, key);
  });
}

}  // namespace

HitRateResult hit_rate(const FeatureSource& features, const PhraseIndex& index,
                       MatchMode mode, std::size_t workers) {
  if (index.empty()) throw ArgumentError("hit_rate over an empty sentence set");
  const auto keys = key_phrases(index);
  HitRateResult r;
  r.detected.resize(index.size());
  std::vector<char> hits(index.size(), 0);
  NoGradGuard no_grad;
  parallel_for(index.size(), workers, [&](std::size_t i) {
    const FeatureMap fmap = features(i);
    const auto pooled = encode_sentence(fmap);
    const auto v = pooled.v.to_vector();
    const auto det = detect_window(fmap, v);
    r.detected[i] = fmap.window_spans.at(det.window);
    hits[i] = is_hit(r.detected[i], keys[i], mode);
  });
  for (char h : hits) r.hits += h;
  r.evaluated = index.size();
  r.rate = static_cast<double>(r.hits) / static_cast<double>(r.evaluated);
  return r;
}

FeatureSource encoder_features(const SentenceEncoder& encoder, const Vocabulary& vocab,
                               const PhraseIndex& index, PaddingPolicy padding) {
  return [&encoder, &vocab, &index, padding](std::size_t i) {
    NoGradGuard no_grad;
    Rng unused(0);
    const auto ids = vocab.encode(index.at(i).tokens);
    return encoder.encode(ids, vocab, {}, padding, Mode::Eval, unused).fmap;
  };
}

// ---------------------------------------------------------------------------
// Report

namespace {

constexpr const char* kReportHeader =
    "m,llc_ratio,llc_support,hit_rate_linear,hit_rate_rnf,sentences_evaluated";

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string cell(const std::optional<double>& v) { return v ? number(*v) : ""; }

void write_svg(std::span<const AnalysisRow> rows, const std::filesystem::path& path) {
  const double width = 480, height = 320, left = 50, right = 20, top = 20, bottom = 40;
  std::size_t lo = rows.front().m, hi = rows.front().m;
  for (const auto& r : rows) {
    lo = std::min(lo, r.m);
    hi = std::max(hi, r.m);
  }
  const double span = hi > lo ? static_cast<double>(hi - lo) : 1.0;
  auto x = [&](std::size_t m) {
    return left + (width - left - right) * static_cast<double>(m - lo) / span;
  };
  auto y = [&](double v) { return top + (height - top - bottom) * (1.0 - v); };

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write plot: " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << y(0) << "\" x2=\"" << width - right
      << "\" y2=\"" << y(0) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << y(0) << "\" x2=\"" << left << "\" y2=\""
      << y(1) << "\" stroke=\"black\"/>\n";
  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    out << "<text x=\"" << left - 8 << "\" y=\"" << y(t) + 4
        << "\" text-anchor=\"end\">" << t << "</text>\n";
  }
  for (const auto& r : rows) {
    out << "<text x=\"" << x(r.m) << "\" y=\"" << height - bottom + 16
        << "\" text-anchor=\"middle\">" << r.m << "</text>\n";
  }
  out << "<text x=\"" << (width + left) / 2 << "\" y=\"" << height - 6
      << "\" text-anchor=\"middle\">phrase length m</text>\n";

  struct Series {
    const char* name;
    const char* color;
    std::optional<double> AnalysisRow::*field;
  };
  const Series series[] = {{"llc ratio", "#444444", &AnalysisRow::llc_ratio},
                           {"hit rate (linear)", "#1f77b4", &AnalysisRow::hit_rate_linear},
                           {"hit rate (rnf)", "#d62728", &AnalysisRow::hit_rate_rnf}};
  std::vector<const AnalysisRow*> sorted;
  for (const auto& r : rows) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const AnalysisRow* a, const AnalysisRow* b) { return a->m < b->m; });
  double legend_y = top + 4;
  for (const auto& s : series) {
    std::ostringstream points;
    std::size_t count = 0;
    for (const auto* r : sorted) {
      const auto& v = r->*(s.field);
      if (!v) continue;
      points << x(r->m) << ',' << y(*v) << ' ';
      out << "<circle cx=\"" << x(r->m) << "\" cy=\"" << y(*v) << "\" r=\"3\" fill=\""
          << s.color << "\"/>\n";
      ++count;
    }
    if (count == 0) continue;
    out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" points=\"" << points.str()
        << "\"/>\n";
    out << "<text x=\"" << width - right - 110 << "\" y=\"" << legend_y << "\" fill=\""
        << s.color << "\">" << s.name << "</text>\n";
    legend_y += 14;
  }
  out << "</svg>\n";
  if (!out) throw IoError("failed writing plot: " + path.string());
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void emit_analysis_report(std::span<const AnalysisRow> rows, const std::filesystem::path& csv,
                          const std::filesystem::path& svg) {
  if (rows.empty()) throw ArgumentError("analysis report needs at least one m");
  std::ofstream out(csv, std::ios::trunc);
  if (!out) throw IoError("cannot write analysis report: " + csv.string());
  out << kReportHeader << '\n';
  for (const auto& r : rows) {
    out << r.m << ',' << cell(r.llc_ratio) << ',' << r.llc_support << ','
        << cell(r.hit_rate_linear) << ',' << cell(r.hit_rate_rnf) << ',';
    if (r.sentences_evaluated) out << *r.sentences_evaluated;
    out << '\n';
  }
  out.close();
  if (!out) throw IoError("failed writing analysis report: " + csv.string());
  if (!svg.empty()) write_svg(rows, svg);
}

std::vector<AnalysisRow> parse_analysis_report(const std::filesystem::path& csv) {
  std::istringstream in(read_file(csv));
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != split_csv(kReportHeader)) {
    throw FormatError(csv.string() + ": unexpected analysis report header", 1);
  }
  std::vector<AnalysisRow> rows;
  std::size_t line_no = 1;
  auto opt = [](const std::string& s) -> std::optional<double> {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 6) throw FormatError(csv.string() + ": expected 6 columns", line_no);
    try {
      AnalysisRow r;
      r.m = std::stoull(f[0]);
      r.llc_ratio = opt(f[1]);
      r.llc_support = std::stoull(f[2]);
      r.hit_rate_linear = opt(f[3]);
      r.hit_rate_rnf = opt(f[4]);
      if (!f[5].empty()) r.sentences_evaluated = std::stoull(f[5]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw FormatError(csv.string() + ": malformed number", line_no);
    }
  }
  return rows;
}

}  // namespace rnf
