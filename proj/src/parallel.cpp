#include "rnf/parallel.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>

namespace rnf {

namespace {

thread_local bool tl_in_worker = false;

struct WorkerFlag {
  bool previous;
  WorkerFlag() : previous(tl_in_worker) { tl_in_worker = true; }
  ~WorkerFlag() { tl_in_worker = previous; }
};

}  // namespace

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  if (workers <= 1 || count == 1 || tl_in_worker) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::size_t threads = std::min(workers, count);
  const bool grad_on = grad_enabled();
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    WorkerFlag flag;
    std::unique_ptr<NoGradGuard> no_grad;
    if (!grad_on) no_grad = std::make_unique<NoGradGuard>();
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
  }
  if (failure) std::rethrow_exception(failure);
}

namespace {

struct IsolatedRun {
  std::unique_ptr<Tape> tape;
  std::vector<Tensor> locals;
  Tensor output;
};

}  // namespace

std::vector<Tensor> run_isolated(std::span<const Tensor> shared,
                                 std::size_t count, std::size_t workers,
                                 const IsolatedFn& fn) {
  std::vector<Tensor> results(count);
  const bool needs_grad =
      grad_enabled() && std::any_of(shared.begin(), shared.end(),
                                    [](const Tensor& t) { return t.requires_grad(); });
  if (!needs_grad) {
    parallel_for(count, workers, [&](std::size_t i) {
      NoGradGuard guard;
      results[i] = fn(i, shared);
    });
    return results;
  }

  auto runs = std::make_shared<std::vector<IsolatedRun>>(count);
  parallel_for(count, workers, [&](std::size_t i) {
    IsolatedRun& run = (*runs)[i];
    run.tape = std::make_unique<Tape>();
    run.locals.reserve(shared.size());
    for (const auto& t : shared) run.locals.push_back(t.alias_leaf());
    TapeScope scope(*run.tape);
    run.output = fn(i, run.locals);
  });

  TapeNode node;
  for (const auto& t : shared) node.inputs.push_back(t.impl());
  for (std::size_t i = 0; i < count; ++i) {
    const Tensor& inner = (*runs)[i].output;
    // The outer result shares data with the inner output; gradients flow
    // between them only through the recorded node.
    Tensor outer = inner.alias_leaf();
    outer.set_requires_grad(inner.requires_grad());
    results[i] = outer;
    node.outputs.push_back(outer.impl());
  }
  node.backward = [runs, workers](const TapeNode& self) {
    const std::size_t count = runs->size();
    parallel_for(count, workers, [&](std::size_t i) {
      IsolatedRun& run = (*runs)[i];
      const auto seed = self.output_grad(i);
      if (seed.empty() || !run.output.requires_grad()) {
        run.tape->clear();
        return;
      }
      run.tape->backward_from(run.output, seed);
    });
    for (std::size_t i = 0; i < count; ++i) {
      const IsolatedRun& run = (*runs)[i];
      for (std::size_t s = 0; s < run.locals.size(); ++s) {
        if (!run.locals[s].has_grad()) continue;
        auto sink = self.input_grad(s);
        if (sink.empty()) continue;
        const auto local = run.locals[s].grad();
        for (std::size_t j = 0; j < local.size(); ++j) sink[j] += local[j];
      }
    }
  };
  Tape::current().record(std::move(node));
  return results;
}

}  // namespace rnf
