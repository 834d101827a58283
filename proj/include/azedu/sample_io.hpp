#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "azedu/features.hpp"

namespace azedu {

// Self-play -> trainer interchange. Little-endian:
//   "AZED" | version u32 | board_x u16 | board_y u16 | planes u8 (=21)
//   per record: 21*x*y int8 state | x*y f32 policy | int8 z
inline constexpr std::uint32_t kSampleFormatVersion = 1;

void write_sample_batch(std::ostream& out, int board_x, int board_y,
                        std::span<const TrainingSample> samples);
void write_sample_batch(const std::string& path, int board_x, int board_y,
                        std::span<const TrainingSample> samples);

// Throws std::runtime_error naming the bad field on malformed input.
std::vector<TrainingSample> read_sample_batch(std::istream& in);
std::vector<TrainingSample> read_sample_batch(const std::string& path);

}  // namespace azedu
