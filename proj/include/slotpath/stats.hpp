#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace slotpath {

/// Monotonic clock reading in nanoseconds.
inline std::uint64_t now_ns() noexcept {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                        std::chrono::steady_clock::now().time_since_epoch())
                                        .count());
}

/// Spins on the monotonic clock, yielding the core between reads so other
/// threads on the same core still make progress.
void wait_until_ns(std::uint64_t deadline_ns) noexcept;

/// Mean cost of one now_ns() call, measured over `samples` back-to-back reads.
double measure_clock_overhead_ns(std::size_t samples = 100000);

struct LatencySummary {
  std::size_t count = 0;
  double min = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double p99 = 0.0;
  double max = 0.0;
};

/// Nearest-rank percentiles. An empty input yields an all-zero summary.
LatencySummary summarize(std::vector<double> samples);

double median_of(std::vector<double> samples);

/// Keeps the optimizer from discarding a computed value.
template <class T>
inline void do_not_optimize(const T& value) noexcept {
  asm volatile("" : : "r,m"(value) : "memory");
}

}  // namespace slotpath
