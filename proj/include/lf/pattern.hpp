#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lf/error.hpp"

namespace lf {

enum class AttnMode { bidirectional, causal };

// Per-head window geometry: half_window tokens per side (paper window w = 2h)
// and dilation step d >= 1 (d = 1 means contiguous).
struct HeadPattern {
  long half_window = 0;
  long dilation = 1;
};

struct PatternConfig {
  std::size_t n = 0;
  long half_window = 0;
  long dilation = 1;
  AttnMode mode = AttnMode::bidirectional;
  std::vector<std::size_t> global_positions;  // sorted, unique, < n

  void validate() const;
  bool is_global(std::size_t i) const;
};

// Ordered key indices attended by query i: the (possibly dilated) window
// clipped to [0,n), merged with the global positions. i is always included.
std::vector<std::size_t> band_indices(const PatternConfig& cfg, std::size_t i);

// Number of attended (query,key) pairs in the full pattern, counting global
// rows and columns once each.
std::size_t nonzero_count(const PatternConfig& cfg);

struct ReceptiveFieldReport {
  std::size_t layers = 0;
  std::size_t half_width = 0;         // sum of h_l * d_l
  std::size_t theoretical_width = 0;  // 2*half_width + 1 (bidirectional)
  std::size_t empirical_width = 0;    // 0 until filled by an influence test
};

ReceptiveFieldReport receptive_field(const std::vector<HeadPattern>& per_layer);

// Dense 0/1 matrix of the pattern; M[i*n+j] = 1 iff j is attended by i or i is
// global. Guarded at n <= 4096.
std::vector<std::uint8_t> render_pattern(const PatternConfig& cfg);

void write_pattern_csv(const std::vector<std::uint8_t>& m, std::size_t n,
                       const std::string& path);
void write_pattern_pgm(const std::vector<std::uint8_t>& m, std::size_t n,
                       const std::string& path);

// Streams "i,j" pairs without materializing the dense matrix; no size guard.
void write_pattern_indices_csv(const PatternConfig& cfg, const std::string& path);

}  // namespace lf
