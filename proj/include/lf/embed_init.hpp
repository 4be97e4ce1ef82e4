#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "lf/model.hpp"

namespace lf {

// Extends a position table from m to n rows by copy-tiling: row i of the
// result is a bitwise copy of row i mod m.
template <typename T>
Tensor<T> copy_extend_positions(const Tensor<T>& e, std::size_t target);

enum class FreezeMode { all_trainable, only_new_positions, only_positions };
const char* freeze_mode_name(FreezeMode m);
FreezeMode freeze_mode_from_name(const std::string& name);

struct FreezePolicy {
  FreezeMode mode = FreezeMode::all_trainable;
  // Rows [0, original_positions) of the position table count as "old" for
  // only_new_positions.
  std::size_t original_positions = 0;
};

// Per-parameter trainability. An absent entry means fully trainable; a
// present entry holds one flag per element.
struct TrainMask {
  std::unordered_map<std::string, std::vector<std::uint8_t>> entries;

  bool fully_trainable(const std::string& name) const {
    return entries.find(name) == entries.end();
  }
  std::size_t trainable_count(const std::string& name, std::size_t size) const;
};

// Builds the mask for the policy. Frozen parameters have their gradients
// discarded before every optimizer step.
template <typename T>
TrainMask apply_freeze(const Model<T>& m, const FreezePolicy& policy);

}  // namespace lf
