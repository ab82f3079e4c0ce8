#pragma once

namespace reco {

// Parallel kernels only split work across independent output elements, so the
// arithmetic per element is identical at any thread count. Callers may still
// want to pin the count for benchmarking.
void set_num_threads(int n);
int num_threads();

// Loops smaller than this stay serial; spawning a team costs more than the
// work saved.
inline constexpr long kParallelGrainsize = 16384;

} // namespace reco
