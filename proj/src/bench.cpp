#include "rnf/bench.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "rnf/parallel.h"

namespace rnf {

void BenchConfig::validate() const {
  if (batch == 0 || length == 0 || window == 0 || hidden == 0 || embedding == 0) {
    throw ConfigError("bench sizes must all be positive");
  }
  if (window > length) throw ConfigError("bench window must not exceed the sentence length");
  if (workers.empty() || std::count(workers.begin(), workers.end(), 0u) != 0) {
    throw ConfigError("bench worker counts must be positive");
  }
  if (repetitions < 3) throw ConfigError("bench needs at least 3 repetitions");
  if (warmup < 1) throw ConfigError("bench needs at least 1 warmup iteration");
  if (cell == FilterKind::Linear) throw ConfigError("bench compares recurrent cells only");
}

double check_outputs(const std::vector<std::vector<double>>& reference,
                     const std::vector<std::vector<double>>& candidate, std::size_t workers,
                     double tolerance) {
  if (reference.size() != candidate.size()) {
    throw BenchCheckError("cross-check: " + std::to_string(candidate.size()) +
                          " outputs with " + std::to_string(workers) + " workers, expected " +
                          std::to_string(reference.size()));
  }
  double worst = 0.0;
  std::size_t bad = 0, worst_sentence = 0, worst_index = 0;
  for (std::size_t s = 0; s < reference.size(); ++s) {
    if (reference[s].size() != candidate[s].size()) {
      throw BenchCheckError("cross-check: sentence " + std::to_string(s) +
                            " has a different output size with " + std::to_string(workers) +
                            " workers");
    }
    for (std::size_t i = 0; i < reference[s].size(); ++i) {
      const double diff = std::abs(reference[s][i] - candidate[s][i]);
      if (!(diff <= tolerance)) ++bad;
      if (!(diff <= worst)) {
        worst = diff;
        worst_sentence = s;
        worst_index = i;
      }
    }
  }
  if (bad > 0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "cross-check failed with %zu workers: %zu elements differ by more than %g; "
                  "max |diff| %.3e at sentence %zu element %zu",
                  workers, bad, tolerance, worst, worst_sentence, worst_index);
    throw BenchCheckError(buf);
  }
  return worst;
}

namespace {

using Clock = std::chrono::steady_clock;

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const auto n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

template <typename Fn>
double time_ms(const BenchConfig& config, Fn&& fn) {
  for (std::size_t i = 0; i < config.warmup; ++i) fn();
  std::vector<double> samples;
  for (std::size_t i = 0; i < config.repetitions; ++i) {
    const auto start = Clock::now();
    fn();
    samples.push_back(std::chrono::duration<double, std::milli>(Clock::now() - start).count());
  }
  return median(std::move(samples));
}

struct Workload {
  Cell cell;
  FilterSpec spec;
  std::vector<Tensor> sentences;
};

Workload make_workload(const BenchConfig& config) {
  Rng rng(config.seed);
  Workload w;
  if (config.cell == FilterKind::RnfLstm) {
    w.cell = LstmCell::init(config.embedding, config.hidden, rng);
  } else {
    w.cell = GruCell::init(config.embedding, config.hidden, rng);
  }
  w.spec = {config.cell, config.window, config.hidden, Activation::Relu};
  for (std::size_t b = 0; b < config.batch; ++b) {
    w.sentences.push_back(Tensor::from(
        {config.length, config.embedding},
        uniform_values(config.length * config.embedding, 0.5, rng)));
  }
  return w;
}

// Parameters are re-wrapped per run so gradients from timed backward passes
// never accumulate across repetitions.
Cell fresh_cell(const Cell& cell, bool requires_grad) {
  std::vector<Tensor> params;
  for (const auto& p : cell_parameters(cell)) {
    params.push_back(Tensor::from(p.shape(), p.to_vector(), requires_grad));
  }
  return cell_with_parameters(cell, params);
}

std::vector<std::vector<double>> rnf_outputs(const Workload& w, std::size_t workers) {
  NoGradGuard no_grad;
  std::vector<std::vector<double>> out;
  for (const auto& s : w.sentences) {
    out.push_back(rnf_forward(w.cell, s, w.spec, workers).values.to_vector());
  }
  return out;
}

void run_rnf(const Workload& w, std::size_t workers, bool backward) {
  if (!backward) {
    rnf_outputs(w, workers);
    return;
  }
  const auto cell = fresh_cell(w.cell, true);
  for (const auto& s : w.sentences) {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(rnf_forward(cell, s, w.spec, workers).values));
  }
}

void run_rnn_batch(const Workload& w, std::size_t workers, bool backward) {
  parallel_for(w.sentences.size(), workers, [&](std::size_t i) {
    if (!backward) {
      NoGradGuard no_grad;
      run_rnn(w.cell, w.sentences[i]);
      return;
    }
    // one copy per sentence: leaves shared across threads would race on grads
    const auto cell = fresh_cell(w.cell, true);
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(run_rnn(cell, w.sentences[i])));
  });
}

}  // namespace

BenchReport run_bench(const BenchConfig& config) {
  config.validate();
  const auto w = make_workload(config);

  BenchReport report;
  const auto reference = rnf_outputs(w, 1);
  for (auto workers : config.workers) {
    report.max_abs_diff =
        std::max(report.max_abs_diff, check_outputs(reference, rnf_outputs(w, workers), workers));
  }

  const double rnn_baseline = time_ms(config, [&] { run_rnn_batch(w, 1, config.backward); });
  for (const char* mode : {"rnf", "rnn"}) {
    for (auto workers : config.workers) {
      const bool rnf = std::string(mode) == "rnf";
      double ms;
      if (!rnf && workers == 1) {
        ms = rnn_baseline;
      } else if (rnf) {
        ms = time_ms(config, [&] { run_rnf(w, workers, config.backward); });
      } else {
        ms = time_ms(config, [&] { run_rnn_batch(w, workers, config.backward); });
      }
      report.rows.push_back({mode, workers, ms, ms > 0.0 ? rnn_baseline / ms : 0.0});
    }
  }
  return report;
}

void write_bench_csv(const BenchReport& report, std::ostream& out) {
  out << "mode,workers,median_ms,speedup_vs_rnn_1worker\n";
  char buf[64];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f", r.median_ms, r.speedup_vs_rnn_1worker);
    out << r.mode << ',' << r.workers << ',' << buf << '\n';
  }
}

}  // namespace rnf
