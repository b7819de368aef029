#pragma once

#include <functional>

namespace cvoam {

// Worker count for the chunked loops below. Defaults to the hardware
// concurrency; the CLI overrides it via --threads.
void set_num_threads(int n);
int num_threads();

// Splits [begin, end) into contiguous chunks, one per worker. Each chunk body
// runs its indices sequentially and writes disjoint outputs, so results are
// bit-identical for any thread count.
void parallel_for(int begin, int end, const std::function<void(int, int)>& chunk);

}  // namespace cvoam
