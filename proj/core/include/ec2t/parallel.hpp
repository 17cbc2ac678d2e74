#pragma once

#include <cstddef>
#include <functional>

namespace ec2t {

/// Worker cap: EC2T_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t thread_limit();

/// Runs fn(i) for i in [0, count) on up to thread_limit() threads. Each index
/// runs exactly once; the first exception thrown is rethrown after all
/// workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace ec2t
