#include "azedu/lr_schedule.hpp"

#include <stdexcept>

namespace azedu {

void CyclicLRConfig::validate() const {
  if (!(base_lr > 0.0) || !(base_lr < max_lr)) {
    throw std::invalid_argument("cyclic lr: need 0 < base_lr < max_lr");
  }
  if (half_cycle_steps <= 0) {
    throw std::invalid_argument("cyclic lr: half_cycle_steps must be positive");
  }
}

double cyclic_lr(std::int64_t step, const CyclicLRConfig& config) {
  if (step < 0) throw std::invalid_argument("cyclic lr: negative step");
  const std::int64_t half = config.half_cycle_steps;
  const std::int64_t phase = step % (2 * half);
  const std::int64_t rise = phase <= half ? phase : 2 * half - phase;
  const double frac = static_cast<double>(rise) / static_cast<double>(half);
  return config.base_lr * (1.0 - frac) + config.max_lr * frac;
}

}  // namespace azedu
