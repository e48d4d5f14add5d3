#pragma once

#include <cstdint>

namespace attnbounds::ops {

// Thread-local multiply-add tally. Kernels add bulk counts for their dominant
// loops; benchmarks reset before a run and read afterwards. Keeping the
// counter thread-local preserves the purity of the kernels across threads.

std::uint64_t count();
void reset();
void add(std::uint64_t n);

} // namespace attnbounds::ops
