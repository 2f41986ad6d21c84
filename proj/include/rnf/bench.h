#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rnf/conv.h"
#include "rnf/errors.h"

namespace rnf {

struct BenchConfig {
  std::size_t batch = 32;
  std::size_t length = 48;    // n
  std::size_t window = 6;     // m
  std::size_t hidden = 128;   // d
  std::size_t embedding = 64; // k
  std::vector<std::size_t> workers{1, 2, 4};
  std::size_t repetitions = 3;
  std::size_t warmup = 1;
  FilterKind cell = FilterKind::RnfLstm;
  bool backward = false;  // time forward + backward instead of forward only
  std::uint64_t seed = 1;

  /// ConfigError unless every size is positive, repetitions >= 3,
  /// warmup >= 1, window <= length and the cell is recurrent.
  void validate() const;
};

struct BenchRow {
  std::string mode;  // "rnf" or "rnn"
  std::size_t workers = 1;
  double median_ms = 0.0;
  double speedup_vs_rnn_1worker = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  double max_abs_diff = 0.0;  // worst parallel vs sequential RNF difference
};

/// Parallel RNF outputs differ from the sequential reference.
class BenchCheckError : public Error {
 public:
  using Error::Error;
};

/// Throws BenchCheckError with a diff summary if any element of `candidate`
/// differs from `reference` by more than `tolerance`; returns the largest
/// absolute difference otherwise.
double check_outputs(const std::vector<std::vector<double>>& reference,
                     const std::vector<std::vector<double>>& candidate,
                     std::size_t workers, double tolerance = 1e-12);

/// Times (a) the RNF convolution over every window of each sentence, with
/// windows spread over the worker threads, and (b) the full-sequence RNN of
/// the same cell, with sentences spread over the worker threads. The
/// correctness cross-check runs before any timing.
BenchReport run_bench(const BenchConfig& config);

void write_bench_csv(const BenchReport& report, std::ostream& out);

}  // namespace rnf
