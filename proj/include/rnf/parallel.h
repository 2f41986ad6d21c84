#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "rnf/tensor.h"

namespace rnf {

/// Calls fn(i) for i in [0, count) on up to `workers` threads. Runs inline
/// when workers <= 1 or when already inside a parallel_for worker, so nested
/// calls never oversubscribe. The first exception thrown is rethrown.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

using IsolatedFn =
    std::function<Tensor(std::size_t index, std::span<const Tensor> shared)>;

/// Evaluates `count` independent computations fn(i, shared') where shared'
/// are leaves aliasing the data of `shared`. Each computation records into
/// its own tape, so the computations may run on separate threads.
///
/// A single node is recorded on the caller's tape. Its backward rule runs
/// every inner backward pass (in parallel) and then adds the per-computation
/// gradients of `shared` in index order, so results do not depend on the
/// worker count.
std::vector<Tensor> run_isolated(std::span<const Tensor> shared,
                                 std::size_t count, std::size_t workers,
                                 const IsolatedFn& fn);

}  // namespace rnf
