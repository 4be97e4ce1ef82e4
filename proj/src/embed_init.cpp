#include "lf/embed_init.hpp"

#include <algorithm>

namespace lf {

template <typename T>
Tensor<T> copy_extend_positions(const Tensor<T>& e, std::size_t target) {
  if (e.rank() != 2) throw ShapeError("copy_extend_positions: expected [m,dmodel]");
  const std::size_t m = e.dim(0), d = e.dim(1);
  if (m == 0) throw UsageError("copy_extend_positions: empty source table");
  if (target < m)
    throw UsageError("copy_extend_positions: target " + std::to_string(target) +
                     " smaller than source " + std::to_string(m) +
                     " (truncation is a different operation)");
  Tensor<T> out = Tensor<T>::zeros({target, d});
  for (std::size_t i = 0; i < target; ++i) {
    const T* src = e.data() + (i % m) * d;
    std::copy(src, src + d, out.data() + i * d);
  }
  return out;
}

const char* freeze_mode_name(FreezeMode m) {
  switch (m) {
    case FreezeMode::all_trainable: return "all_trainable";
    case FreezeMode::only_new_positions: return "only_new_positions";
    case FreezeMode::only_positions: return "only_positions";
  }
  return "?";
}

FreezeMode freeze_mode_from_name(const std::string& name) {
  if (name == "all_trainable") return FreezeMode::all_trainable;
  if (name == "only_new_positions") return FreezeMode::only_new_positions;
  if (name == "only_positions") return FreezeMode::only_positions;
  throw UsageError("unknown freeze mode '" + name + "'");
}

std::size_t TrainMask::trainable_count(const std::string& name, std::size_t size) const {
  auto it = entries.find(name);
  if (it == entries.end()) return size;
  return static_cast<std::size_t>(
      std::count(it->second.begin(), it->second.end(), std::uint8_t(1)));
}

template <typename T>
TrainMask apply_freeze(const Model<T>& m, const FreezePolicy& policy) {
  TrainMask mask;
  if (policy.mode == FreezeMode::all_trainable) return mask;
  const std::size_t d = m.cfg.dmodel;
  for (const auto& [name, t] : m.named_params()) {
    if (name == "pos_embed") {
      if (policy.mode == FreezeMode::only_positions) continue;  // fully trainable
      if (policy.original_positions > t.dim(0))
        throw UsageError("apply_freeze: original_positions exceeds the position table");
      std::vector<std::uint8_t> flags(t.size(), 0);
      std::fill(flags.begin() + policy.original_positions * d, flags.end(), std::uint8_t(1));
      mask.entries[name] = std::move(flags);
    } else {
      mask.entries[name] = std::vector<std::uint8_t>(t.size(), 0);  // frozen
    }
  }
  return mask;
}

#define LF_INSTANTIATE_EMBED(T)                                           \
  template Tensor<T> copy_extend_positions<T>(const Tensor<T>&, std::size_t); \
  template TrainMask apply_freeze<T>(const Model<T>&, const FreezePolicy&);

LF_INSTANTIATE_EMBED(float)
LF_INSTANTIATE_EMBED(double)

#undef LF_INSTANTIATE_EMBED

}  // namespace lf
