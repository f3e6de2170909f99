#include "slotpath/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace slotpath {

void wait_until_ns(std::uint64_t deadline_ns) noexcept {
  while (now_ns() < deadline_ns) std::this_thread::yield();
}

double measure_clock_overhead_ns(std::size_t samples) {
  if (samples == 0) return 0.0;
  std::uint64_t sink = 0;
  const auto start = now_ns();
  for (std::size_t i = 0; i < samples; ++i) sink += now_ns();
  const auto stop = now_ns();
  do_not_optimize(sink);
  return static_cast<double>(stop - start) / static_cast<double>(samples);
}

LatencySummary summarize(std::vector<double> samples) {
  LatencySummary s;
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  const auto n = samples.size();
  s.count = n;
  s.min = samples.front();
  s.max = samples.back();
  s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  s.median = n % 2 == 1 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n)));
  s.p99 = samples[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

double median_of(std::vector<double> samples) { return summarize(std::move(samples)).median; }

}  // namespace slotpath
