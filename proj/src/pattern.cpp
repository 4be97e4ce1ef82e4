#include "lf/pattern.hpp"

#include <algorithm>
#include <fstream>

namespace lf {

void PatternConfig::validate() const {
  if (half_window < 0) throw UsageError("pattern: half_window must be >= 0");
  if (dilation < 1) throw UsageError("pattern: dilation must be >= 1");
  for (std::size_t g : global_positions)
    if (g >= n)
      throw UsageError("pattern: global position " + std::to_string(g) +
                       " out of range for n=" + std::to_string(n));
  for (std::size_t k = 1; k < global_positions.size(); ++k)
    if (global_positions[k] <= global_positions[k - 1])
      throw UsageError("pattern: global positions must be sorted and unique");
}

bool PatternConfig::is_global(std::size_t i) const {
  return std::binary_search(global_positions.begin(), global_positions.end(), i);
}

std::vector<std::size_t> band_indices(const PatternConfig& cfg, std::size_t i) {
  cfg.validate();
  if (i >= cfg.n)
    throw UsageError("band_indices: query " + std::to_string(i) + " out of range for n=" +
                     std::to_string(cfg.n));
  std::vector<std::size_t> keys;
  const long li = static_cast<long>(i);
  const long h = cfg.half_window, d = cfg.dilation;
  if (cfg.mode == AttnMode::bidirectional) {
    for (long k = -h; k <= h; ++k) {
      const long j = li + k * d;
      if (j >= 0 && j < static_cast<long>(cfg.n)) keys.push_back(static_cast<std::size_t>(j));
    }
  } else {
    for (long k = h; k >= 0; --k) {
      const long j = li - k * d;
      if (j >= 0) keys.push_back(static_cast<std::size_t>(j));
    }
  }
  for (std::size_t g : cfg.global_positions) {
    // Causal safety dominates: a global key after i is never attended by i.
    if (cfg.mode == AttnMode::causal && g > i) continue;
    if (!std::binary_search(keys.begin(), keys.end(), g)) keys.push_back(g);
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::size_t nonzero_count(const PatternConfig& cfg) {
  cfg.validate();
  std::size_t count = 0;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    if (cfg.is_global(i)) {
      // Full row; clipped to the causal triangle in causal mode.
      count += cfg.mode == AttnMode::bidirectional ? cfg.n : i + 1;
    } else {
      count += band_indices(cfg, i).size();
    }
  }
  return count;
}

ReceptiveFieldReport receptive_field(const std::vector<HeadPattern>& per_layer) {
  if (per_layer.empty()) throw UsageError("receptive_field: at least one layer required");
  ReceptiveFieldReport r;
  r.layers = per_layer.size();
  for (const auto& hp : per_layer) {
    if (hp.half_window < 0 || hp.dilation < 1)
      throw UsageError("receptive_field: invalid layer pattern");
    r.half_width += static_cast<std::size_t>(hp.half_window * hp.dilation);
  }
  r.theoretical_width = 2 * r.half_width + 1;
  return r;
}

std::vector<std::uint8_t> render_pattern(const PatternConfig& cfg) {
  cfg.validate();
  if (cfg.n > 4096)
    throw UsageError("render_pattern: n=" + std::to_string(cfg.n) +
                     " exceeds the 4096 dense-render guard; use the indices CSV mode instead");
  std::vector<std::uint8_t> m(cfg.n * cfg.n, 0);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    if (cfg.is_global(i)) {
      const std::size_t end = cfg.mode == AttnMode::bidirectional ? cfg.n : i + 1;
      std::fill(m.begin() + i * cfg.n, m.begin() + i * cfg.n + end, std::uint8_t(1));
      continue;
    }
    for (std::size_t j : band_indices(cfg, i)) m[i * cfg.n + j] = 1;
  }
  return m;
}

void write_pattern_csv(const std::vector<std::uint8_t>& m, std::size_t n,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j) out << ',';
      out << static_cast<int>(m[i * n + j]);
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

void write_pattern_pgm(const std::vector<std::uint8_t>& m, std::size_t n,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << "P2\n" << n << ' ' << n << "\n1\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j) out << ' ';
      out << static_cast<int>(m[i * n + j]);
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

void write_pattern_indices_csv(const PatternConfig& cfg, const std::string& path) {
  cfg.validate();
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << "query,key\n";
  for (std::size_t i = 0; i < cfg.n; ++i) {
    if (cfg.is_global(i)) {
      const std::size_t end = cfg.mode == AttnMode::bidirectional ? cfg.n : i + 1;
      for (std::size_t j = 0; j < end; ++j) out << i << ',' << j << '\n';
    } else {
      for (std::size_t j : band_indices(cfg, i)) out << i << ',' << j << '\n';
    }
  }
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace lf
