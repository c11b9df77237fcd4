#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace poisclt {

/// Worker count used by parallel_for; 0 means std::thread::hardware_concurrency().
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(i) for i in [0, n) across worker threads. Indices are handed out
/// in contiguous blocks; callers write results into per-index slots so the
/// outcome never depends on the schedule. The first exception thrown by a
/// body is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Pairwise (tree) summation in index order; deterministic for a fixed input.
double pairwise_sum(std::span<const double> values);

struct MeanStderr {
    double mean = 0.0;
    double std_error = 0.0;
    double variance = 0.0;  ///< unbiased sample variance
    std::size_t n = 0;
};

/// Sample mean, unbiased variance and standard error of the mean.
MeanStderr mean_stderr(std::span<const double> values);

}  // namespace poisclt
