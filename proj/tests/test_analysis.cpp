#include <fstream>
#include <map>

#include "doctest.h"
#include "rnf/analysis.h"
#include "rnf/errors.h"

using namespace rnf;

namespace {

std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(RNF_FIXTURE_DIR) / name;
}

/// Feature map over n tokens with window m whose column `pick` is the only
/// maximum in every coordinate.
FeatureMap scripted_map(std::size_t n, std::size_t m, std::size_t pick) {
  const std::size_t cols = n - m + 1;
  std::vector<double> values(2 * cols, 0.0);
  for (std::size_t c = 0; c < cols; ++c) {
    values[c] = 0.1 * static_cast<double>(c);
    values[cols + c] = -0.1 * static_cast<double>(c);
  }
  values[pick] = 5.0;
  values[cols + pick] = 5.0;
  FeatureMap f;
  f.values = Tensor::from({2, cols}, values);
  for (std::size_t c = 0; c < cols; ++c) f.window_spans.emplace_back(c, c + m - 1);
  return f;
}

std::vector<std::string> lines_of(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("phrase index and key phrases") {
  const auto trees = load_treebank(fixture("llc_pair.txt"));
  const auto fine = build_phrase_index(trees, Granularity::FineGrained);
  REQUIRE(fine.size() == 2);
  CHECK(fine[0].length == 5);
  CHECK(fine[0].spans.size() == 9);
  CHECK(fine[0].spans.at({0, 4}) == 3);
  const auto keys = key_phrases(fine);
  CHECK(keys[0] == KeyPhraseSet{{0, 4}, {0, 1}, {0, 0}});
  CHECK(keys[1] == KeyPhraseSet{{0, 2}, {2, 2}});
  for (std::size_t i = 0; i < fine.size(); ++i) {
    CHECK(keys[i].count({0, fine[i].length - 1}) == 1);
    for (const auto& s : keys[i]) CHECK(fine[i].spans.count(s) == 1);
  }
  const auto binary = build_phrase_index(trees, Granularity::Binary);
  CHECK(binary[0].label == 1);
  CHECK(binary[1].spans.count({0, 1}) == 0);  // neutral "the plot" left out
}

TEST_CASE("llc_ratio on the hand-enumerated fixture") {
  const auto trees = load_treebank(fixture("llc_pair.txt"));
  const auto fine = build_phrase_index(trees, Granularity::FineGrained);
  // Length-2 constituents: "good movie" (3, sentence 3), "really funny"
  // (1, sentence 3), "the plot" (2, sentence 1): one match of three.
  auto r = llc_ratio(fine, 2);
  CHECK(r.support == 3);
  CHECK(r.matches == 1);
  CHECK(*r.ratio == 1.0 / 3.0);
  // Binary: "the plot" is neutral and leaves both counts.
  auto b = llc_ratio(build_phrase_index(trees, Granularity::Binary), 2);
  CHECK(b.support == 2);
  CHECK(*b.ratio == 0.5);
  // Length 1 (fine): good(3) movie(2) not(2) really(2) funny(0) | the(2) plot(2) dull(1).
  auto one = llc_ratio(fine, 1);
  CHECK(one.support == 8);
  CHECK(one.matches == 2);
  CHECK_FALSE(llc_ratio(fine, 4).ratio.has_value());
  CHECK(llc_ratio(fine, 4).support == 0);
  CHECK_THROWS_AS(llc_ratio(fine, 0), ArgumentError);
}

TEST_CASE("llc_ratio properties on the treebank fixture") {
  const auto trees = load_treebank(fixture("treebank50.txt"));
  for (auto g : {Granularity::FineGrained, Granularity::Binary}) {
    const auto index = build_phrase_index(trees, g);
    std::map<std::size_t, PhraseIndex> by_length;
    std::size_t constituents = 0;
    for (const auto& s : index) {
      by_length[s.length].push_back(s);
      constituents += s.spans.size();
    }
    for (const auto& [len, group] : by_length) {
      CAPTURE(len);
      CHECK(llc_ratio(group, len).ratio == 1.0);
    }
    std::size_t support = 0;
    for (std::size_t m = 1; m <= 12; ++m) {
      auto r = llc_ratio(index, m);
      CHECK(r.matches <= r.support);
      support += r.support;
    }
    CHECK(support <= constituents);
  }
}

TEST_CASE("hit_rate with scripted feature maps") {
  const auto index = build_phrase_index(load_treebank(fixture("hit4.txt")),
                                        Granularity::FineGrained);
  REQUIRE(index.size() == 4);
  const std::size_t picks[] = {0, 1, 2, 0};
  FeatureSource scripted = [&](std::size_t i) {
    return scripted_map(index[i].length, 2, picks[i]);
  };
  auto exact = hit_rate(scripted, index, MatchMode::Exact);
  CHECK(exact.rate == 0.75);
  CHECK(exact.hits == 3);
  CHECK(exact.evaluated == 4);
  CHECK(exact.detected[1] == Span{1, 2});
  auto loose = hit_rate(scripted, index, MatchMode::Containment);
  CHECK(loose.rate >= exact.rate);
  CHECK(hit_rate(scripted, index, MatchMode::Exact, 3).rate == 0.75);

  SUBCASE("relabeling non-key constituents changes nothing") {
    auto relabeled = index;
    relabeled[0].spans[{2, 3}] = 0;
    relabeled[2].spans[{0, 1}] = 1;
    CHECK(hit_rate(scripted, relabeled, MatchMode::Exact).rate == exact.rate);
    CHECK(hit_rate(scripted, relabeled, MatchMode::Containment).rate == loose.rate);
  }
}

TEST_CASE("hit_rate with a real encoder") {
  const auto trees = load_treebank(fixture("treebank50.txt"));
  const auto index = build_phrase_index(trees, Granularity::FineGrained);
  std::vector<std::string> tokens;
  for (const auto& s : index) tokens.insert(tokens.end(), s.tokens.begin(), s.tokens.end());
  const auto vocab = Vocabulary::random(tokens, 6, 4);
  Rng rng(12);
  for (auto kind : {FilterKind::Linear, FilterKind::RnfLstm}) {
    auto encoder = SentenceEncoder::init({kind, 3, 8, Activation::Relu}, 6, rng);
    auto source = encoder_features(encoder, vocab, index, PaddingPolicy::Symmetric);
    auto exact = hit_rate(source, index, MatchMode::Exact);
    auto loose = hit_rate(source, index, MatchMode::Containment, 2);
    CHECK(loose.rate >= exact.rate);
    CHECK(exact.evaluated == index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
      CHECK(exact.detected[i].second < index[i].length);
      if (index[i].length <= 3) CHECK(exact.detected[i] == Span{0, index[i].length - 1});
    }
  }
  SUBCASE("single-window sentences always hit their root") {
    PhraseIndex short_ones;
    for (const auto& s : index) {
      if (s.length == 3) {
        auto only_root = s;
        only_root.spans = {{{0, 2}, s.label}};
        short_ones.push_back(only_root);
      }
    }
    REQUIRE_FALSE(short_ones.empty());
    auto encoder = SentenceEncoder::init({FilterKind::RnfGru, 3, 8, Activation::Relu}, 6, rng);
    CHECK(hit_rate(encoder_features(encoder, vocab, short_ones, PaddingPolicy::Symmetric),
                   short_ones)
              .rate == 1.0);
  }
}

TEST_CASE("analysis report") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto csv = dir / "rnf_report.csv";
  const auto svg = dir / "rnf_report.svg";
  SUBCASE("single row") {
    std::vector<AnalysisRow> rows{{3, 0.5, 4, 0.25, 0.75, 4}};
    emit_analysis_report(rows, csv);
    const auto lines = lines_of(csv);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "m,llc_ratio,llc_support,hit_rate_linear,hit_rate_rnf,sentences_evaluated");
    CHECK(lines[1] == "3,0.5,4,0.25,0.75,4");
  }
  SUBCASE("missing values are empty cells and everything round-trips") {
    std::vector<AnalysisRow> rows{{1, 0.1, 7, std::nullopt, std::nullopt, std::nullopt},
                                  {2, 1.0 / 3.0, 3, 2.0 / 3.0, 0.7, 9},
                                  {9, std::nullopt, 0, 0.0, std::nullopt, 9}};
    emit_analysis_report(rows, csv, svg);
    const auto lines = lines_of(csv);
    CHECK(lines[1] == "1,0.10000000000000001,7,,,");
    CHECK(lines[3] == "9,,0,0,,9");
    const auto back = parse_analysis_report(csv);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(back[i].m == rows[i].m);
      CHECK(back[i].llc_ratio == rows[i].llc_ratio);
      CHECK(back[i].llc_support == rows[i].llc_support);
      CHECK(back[i].hit_rate_linear == rows[i].hit_rate_linear);
      CHECK(back[i].hit_rate_rnf == rows[i].hit_rate_rnf);
      CHECK(back[i].sentences_evaluated == rows[i].sentences_evaluated);
    }
    const auto plot = read_file(svg);
    CHECK(plot.rfind("<svg", 0) == 0);
    CHECK(plot.find("polyline") != std::string::npos);
  }
  SUBCASE("errors") {
    std::vector<AnalysisRow> rows{{1, 0.5, 2, {}, {}, {}}};
    CHECK_THROWS_AS(emit_analysis_report(rows, dir / "no_such_dir" / "r.csv"), IoError);
    CHECK_THROWS_AS(emit_analysis_report(std::vector<AnalysisRow>{}, csv), ArgumentError);
  }
  std::filesystem::remove(csv);
  std::filesystem::remove(svg);
}
