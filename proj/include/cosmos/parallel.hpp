#pragma once

#include <functional>

namespace cosmos {

// Runs fn(0..count-1) on up to `workers` threads. Each index owns its own
// output slot, so the worker count never changes results. The first
// exception thrown by any worker is rethrown on the caller.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);

}  // namespace cosmos
