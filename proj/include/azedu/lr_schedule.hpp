#pragma once

#include <cstdint>

namespace azedu {

// Triangular cyclic learning rate: climbs linearly from base_lr to max_lr
// over half_cycle_steps, then back down; period 2 * half_cycle_steps.
struct CyclicLRConfig {
  double base_lr = 1e-6;
  double max_lr = 5e-3;
  std::int64_t half_cycle_steps = 2000;

  void validate() const;

  friend bool operator==(const CyclicLRConfig&, const CyclicLRConfig&) = default;
};

// Hits base_lr and max_lr exactly at the cycle turning points.
double cyclic_lr(std::int64_t step, const CyclicLRConfig& config);

}  // namespace azedu
