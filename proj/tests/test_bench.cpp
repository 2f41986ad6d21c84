#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "rnf/bench.h"

using namespace rnf;

namespace {

BenchConfig small() {
  BenchConfig c;
  c.batch = 4;
  c.length = 12;
  c.window = 4;
  c.hidden = 8;
  c.embedding = 5;
  c.workers = {1, 2, 3};
  return c;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("bench config validation") {
  CHECK_NOTHROW(small().validate());
  auto c = small();
  c.repetitions = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small();
  c.warmup = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small();
  c.workers = {1, 0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small();
  c.window = 13;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small();
  c.hidden = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small();
  c.cell = FilterKind::Linear;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("cross-check refuses differing outputs") {
  std::vector<std::vector<double>> ref{{1.0, 2.0}, {3.0}};
  auto same = ref;
  CHECK(check_outputs(ref, same, 2) == 0.0);
  auto close = ref;
  close[1][0] += 1e-13;
  CHECK(check_outputs(ref, close, 2) <= 1e-12);
  auto off = ref;
  off[1][0] += 1e-9;
  CHECK_THROWS_WITH_AS(check_outputs(ref, off, 4),
                       doctest::Contains("sentence 1 element 0"), BenchCheckError);
  off[0][1] = std::nan("");
  CHECK_THROWS_AS(check_outputs(ref, off, 4), BenchCheckError);
  CHECK_THROWS_AS(check_outputs(ref, {{1.0, 2.0}}, 2), BenchCheckError);
}

TEST_CASE("bench report shape") {
  for (auto cell : {FilterKind::RnfLstm, FilterKind::RnfGru}) {
    for (bool backward : {false, true}) {
      auto c = small();
      c.cell = cell;
      c.backward = backward;
      const auto report = run_bench(c);
      CHECK(report.max_abs_diff <= 1e-12);
      std::ostringstream csv;
      write_bench_csv(report, csv);
      const auto rows = parse_csv(csv.str());
      REQUIRE(rows.size() == 1 + 2 * c.workers.size());
      CHECK(rows[0] == std::vector<std::string>{"mode", "workers", "median_ms",
                                                "speedup_vs_rnn_1worker"});
      std::set<std::pair<std::string, std::string>> pairs;
      for (std::size_t i = 1; i < rows.size(); ++i) {
        REQUIRE(rows[i].size() == 4);
        pairs.insert({rows[i][0], rows[i][1]});
        CHECK(std::stod(rows[i][2]) >= 0.0);
        CHECK(std::stod(rows[i][3]) >= 0.0);
      }
      CHECK(pairs.size() == 2 * c.workers.size());
      for (const auto& r : report.rows) {
        if (r.mode == "rnn" && r.workers == 1) CHECK(r.speedup_vs_rnn_1worker == 1.0);
      }
    }
  }
}

TEST_CASE("single-window RNF costs about one RNN pass") {
  // With m == n each sentence has one window, so both modes do the same
  // recurrent work; the bound is loose enough for a busy host.
  BenchConfig c;
  c.batch = 16;
  c.length = 16;
  c.window = 16;
  c.hidden = 32;
  c.embedding = 16;
  c.workers = {1};
  c.repetitions = 5;
  const auto report = run_bench(c);
  double rnf = 0, rnn = 0;
  for (const auto& r : report.rows) (r.mode == "rnf" ? rnf : rnn) = r.median_ms;
  MESSAGE("rnf " << rnf << " ms, rnn " << rnn << " ms");
  CHECK(rnf <= 3.0 * rnn);
}
