#pragma once

#include <string>
#include <vector>

#include "lf/band.hpp"

namespace lf {

// Deterministic element accounting, no allocator introspection:
//   dense  n^2 per head
//   loop   sum of in-range band slots
//   chunk  (n_padded/h - 1) * (2h)^2
MemoryAccount count_memory(BandImpl impl, std::size_t n, long h,
                           AttnMode mode = AttnMode::bidirectional);

struct ScalingPoint {
  std::size_t n = 0;
  double seconds = 0;
  std::size_t score_elements = 0;
  std::size_t peak_elements = 0;
};

struct ScalingReport {
  BandImpl impl = BandImpl::loop;
  long half_window = 0;
  std::size_t repeats = 0;
  std::vector<ScalingPoint> points;
  double time_slope = 0;   // log2(seconds) vs log2(n), least squares
  double score_slope = 0;  // log2(score_elements) vs log2(n)
};

// Least-squares slope of log2(y) against log2(x).
double fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys);

// Times the full attention pipeline (scores -> softmax -> weighted values) of
// one implementation across sequence lengths. Median of `repeats` runs after
// one discarded warmup; single precision. Worker count is pinned by
// LF_THREADS. A sub-millisecond median is an error (timer resolution).
ScalingReport time_scaling(BandImpl impl, const std::vector<std::size_t>& n_list, long h,
                           std::size_t repeats, std::size_t dk = 64,
                           AttnMode mode = AttnMode::bidirectional);

void write_scaling_csv(const ScalingReport& report, const std::string& path);

}  // namespace lf
