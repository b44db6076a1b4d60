#pragma once

#include <cstddef>
#include <functional>

namespace lqac {

// Calls fn(i) for every i in [0, n) using up to `workers` threads. Results
// must be written by index so the outcome does not depend on scheduling.
// Every index runs even if some throw; afterwards the exception from the
// lowest failing index is rethrown.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace lqac
