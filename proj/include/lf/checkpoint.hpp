#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lf/embed_init.hpp"
#include "lf/model.hpp"

namespace lf {

// One serialized tensor of the LFCK container.
struct RawTensor {
  std::string name;
  Dtype dtype = Dtype::f32;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> bytes;  // raw little-endian values

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= static_cast<std::size_t>(d);
    return n;
  }
};

// LFCK v1: magic "LFCK", version u32, tensor_count u32, then per tensor
// name_len u16 + name + dtype u8 + rank u8 + dims u64[rank] + raw data,
// closed by a CRC32 over everything before it. All fields little-endian.
void save_checkpoint_file(const std::string& path, const std::vector<RawTensor>& tensors);
std::vector<RawTensor> load_checkpoint_file(const std::string& path);

const RawTensor* find_tensor(const std::vector<RawTensor>& tensors, const std::string& name);

// Model <-> container. The model configuration rides along as meta.* tensors
// so checkpoints are self-describing.
template <typename T>
std::vector<RawTensor> model_to_raw(const Model<T>& m,
                                    const std::optional<FreezePolicy>& freeze = {});

Dtype checkpoint_dtype(const std::vector<RawTensor>& tensors);
ModelConfig config_from_raw(const std::vector<RawTensor>& tensors);
std::optional<FreezePolicy> freeze_from_raw(const std::vector<RawTensor>& tensors);

// Binds parameters by name; unknown or missing tensor names are errors.
template <typename T>
Model<T> model_from_raw(const std::vector<RawTensor>& tensors);

template <typename T>
void save_model(const Model<T>& m, const std::string& path,
                const std::optional<FreezePolicy>& freeze = {});

}  // namespace lf
