#pragma once

#include <string>

#include "lf/led_task.hpp"
#include "lf/train.hpp"

namespace lf {

// JSON training configuration mirroring the model/schedule field names.
// Unknown keys anywhere in the document are errors.
struct TrainConfig {
  ModelConfig model;
  PhaseSchedule schedule;
  CopyTaskConfig copy_task;
  std::uint64_t seed = 0;
  bool has_schedule = false;
  bool has_copy_task = false;
};

TrainConfig load_train_config(const std::string& path);
TrainConfig parse_train_config(const std::string& text, const std::string& origin);

}  // namespace lf
