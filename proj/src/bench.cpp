#include "lf/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "lf/ops.hpp"
#include "lf/rng.hpp"

namespace lf {

MemoryAccount count_memory(BandImpl impl, std::size_t n, long h, AttnMode mode) {
  if (h < 0) throw UsageError("count_memory: half_window must be >= 0");
  MemoryAccount a;
  a.impl = impl;
  const std::size_t slots = band_slot_count(h, mode);
  switch (impl) {
    case BandImpl::dense:
      a.score_elements = n * n;
      a.peak_elements = n * n;
      break;
    case BandImpl::loop:
      a.score_elements = band_valid_count(n, h, 1, mode);
      a.peak_elements = n * slots;
      break;
    case BandImpl::chunk:
      if (h < 1) throw UsageError("count_memory: chunk requires half_window >= 1");
      a.score_elements = chunk_score_elements(n, h);
      a.peak_elements = n * slots + chunk_score_elements(n, h);
      break;
  }
  return a;
}

double fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw UsageError("fit_loglog_slope: need at least two points");
  std::vector<double> lx(xs.size()), ly(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] <= 0 || ys[i] <= 0) throw UsageError("fit_loglog_slope: values must be positive");
    lx[i] = std::log2(xs[i]);
    ly[i] = std::log2(ys[i]);
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(lx.size());
  my /= static_cast<double>(ly.size());
  double num = 0, den = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  return num / den;
}

namespace {

using Clock = std::chrono::steady_clock;

// One forward pass of the attention pipeline; returns a checksum so the work
// cannot be optimized away.
float run_pipeline(BandImpl impl, const Tensor<float>& q, const Tensor<float>& k,
                   const Tensor<float>& v, const PatternConfig& cfg,
                   const std::vector<std::uint8_t>& dense_mask) {
  Tensor<float> out;
  if (impl == BandImpl::dense) {
    Tensor<float> scores =
        scale(matmul(q, transpose(k)), 1.0f / std::sqrt(static_cast<float>(q.dim(1))));
    Tensor<float> probs = masked_softmax(scores, dense_mask);
    out = matmul(probs, v);
  } else {
    BandScores<float> band =
        impl == BandImpl::loop ? band_qk_loop(q, k, cfg) : band_qk_chunk(q, k, cfg);
    BandSoftmaxResult<float> sm = band_softmax(band, Tensor<float>(), {});
    out = band_pv(sm.probs, v, Tensor<float>(), Tensor<float>());
  }
  return out.at(0, 0);
}

}  // namespace

ScalingReport time_scaling(BandImpl impl, const std::vector<std::size_t>& n_list, long h,
                           std::size_t repeats, std::size_t dk, AttnMode mode) {
  if (n_list.size() < 3) throw UsageError("time_scaling: need at least 3 sequence lengths");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1])
      throw UsageError("time_scaling: sequence lengths must be ascending");
  if (repeats < 5) throw UsageError("time_scaling: need repeats >= 5 (median taken)");

  ScalingReport report;
  report.impl = impl;
  report.half_window = h;
  report.repeats = repeats;

  volatile float sink = 0;
  for (std::size_t n : n_list) {
    Rng rng(0x6c66ULL * n + static_cast<std::size_t>(h));
    Tensor<float> q = Tensor<float>::zeros({n, dk});
    Tensor<float> k = Tensor<float>::zeros({n, dk});
    Tensor<float> v = Tensor<float>::zeros({n, dk});
    for (std::size_t i = 0; i < q.size(); ++i) {
      q.at(i) = static_cast<float>(rng.normal());
      k.at(i) = static_cast<float>(rng.normal());
      v.at(i) = static_cast<float>(rng.normal());
    }
    PatternConfig cfg;
    cfg.n = n;
    cfg.half_window = h;
    cfg.mode = mode;
    std::vector<std::uint8_t> mask;
    if (impl == BandImpl::dense) mask = render_pattern(cfg);

    sink += run_pipeline(impl, q, k, v, cfg, mask);  // warmup, discarded
    std::vector<double> times;
    times.reserve(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
      const auto t0 = Clock::now();
      sink += run_pipeline(impl, q, k, v, cfg, mask);
      const auto t1 = Clock::now();
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    const double median = times[times.size() / 2];
    if (median < 1e-3)
      throw NumericError("time_scaling: median " + std::to_string(median * 1e3) +
                         " ms at n=" + std::to_string(n) +
                         " is below timer resolution; use larger n");
    const MemoryAccount acct = count_memory(impl, n, h, mode);
    report.points.push_back({n, median, acct.score_elements, acct.peak_elements});
  }

  std::vector<double> xs, ts, ss;
  for (const auto& p : report.points) {
    xs.push_back(static_cast<double>(p.n));
    ts.push_back(p.seconds);
    ss.push_back(static_cast<double>(p.score_elements));
  }
  report.time_slope = fit_loglog_slope(xs, ts);
  report.score_slope = fit_loglog_slope(xs, ss);
  (void)sink;
  return report;
}

void write_scaling_csv(const ScalingReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << "impl,n,seconds,score_elements,peak_elements\n";
  for (const auto& p : report.points)
    out << band_impl_name(report.impl) << ',' << p.n << ',' << p.seconds << ','
        << p.score_elements << ',' << p.peak_elements << '\n';
  out << "# time_slope," << report.time_slope << "\n# score_slope," << report.score_slope
      << '\n';
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace lf
