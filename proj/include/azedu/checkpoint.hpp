#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "azedu/lr_schedule.hpp"
#include "azedu/network.hpp"

namespace azedu {

// Checkpoint layout (little-endian):
//   "AZCK" | version u32 | NetworkConfig (8 x u32, seed u64) | step u64 |
//   base_lr f64 | max_lr f64 | half_cycle_steps u64 | array count u32 |
//   per array: name length u16, name, rank u8, dims u32 each, f32 values
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CorruptCheckpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointMeta {
  std::uint64_t step = 0;
  CyclicLRConfig lr_schedule;

  friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

struct Checkpoint {
  Weights weights;
  CheckpointMeta meta;
};

void save_checkpoint(const std::string& path, const Weights& weights,
                     const CheckpointMeta& meta);

// Throws CorruptCheckpoint (bad magic, version, truncation) or ShapeMismatch.
Checkpoint load_checkpoint(const std::string& path);

// Also requires the stored network to match `expected`, naming the first
// layer whose shape differs.
Checkpoint load_checkpoint(const std::string& path, const NetworkConfig& expected);

}  // namespace azedu
