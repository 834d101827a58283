#include "azedu/sample_io.hpp"

#include <fstream>

#include "binary_io.hpp"

namespace azedu {

using detail::put;

void write_sample_batch(std::ostream& out, int board_x, int board_y,
                        std::span<const TrainingSample> samples) {
  out.write("AZED", 4);
  put<std::uint32_t>(out, kSampleFormatVersion);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(board_x));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(board_y));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(kInputPlanes));
  const std::size_t cells = static_cast<std::size_t>(board_x) * board_y;
  for (const TrainingSample& s : samples) {
    if (s.state.board_x != board_x || s.state.board_y != board_y ||
        s.policy_target.probs.size() != cells) {
      throw std::invalid_argument("sample dimensions differ from batch header");
    }
    out.write(reinterpret_cast<const char*>(s.state.data.data()),
              static_cast<std::streamsize>(s.state.data.size()));
    for (double p : s.policy_target.probs) put<float>(out, static_cast<float>(p));
    put<std::int8_t>(out, s.z);
  }
  if (!out) throw std::runtime_error("failed writing sample batch");
}

void write_sample_batch(const std::string& path, int board_x, int board_y,
                        std::span<const TrainingSample> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_sample_batch(out, board_x, board_y, samples);
}

std::vector<TrainingSample> read_sample_batch(std::istream& in) {
  detail::Reader r(in, "sample batch");
  char magic[4];
  r.read_bytes(magic, 4, "magic");
  if (std::string(magic, 4) != "AZED") {
    throw std::runtime_error("sample batch: bad magic");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kSampleFormatVersion) {
    throw std::runtime_error("sample batch: unsupported version " +
                             std::to_string(version));
  }
  const int bx = r.get<std::uint16_t>("board_x");
  const int by = r.get<std::uint16_t>("board_y");
  const int planes = r.get<std::uint8_t>("plane count");
  if (planes != kInputPlanes) {
    throw std::runtime_error("sample batch: plane count " + std::to_string(planes));
  }
  if (bx == 0 || by == 0) throw std::runtime_error("sample batch: zero board size");

  const std::size_t cells = static_cast<std::size_t>(bx) * by;
  std::vector<TrainingSample> samples;
  while (!r.at_end()) {
    TrainingSample s;
    s.state = StateTensor(bx, by);
    r.read_bytes(s.state.data.data(), s.state.data.size(), "state");
    s.policy_target.probs.resize(cells);
    for (double& p : s.policy_target.probs) p = r.get<float>("policy");
    s.z = r.get<std::int8_t>("z");
    if (s.z < -1 || s.z > 1) throw std::runtime_error("sample batch: z out of range");
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<TrainingSample> read_sample_batch(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_sample_batch(in);
}

}  // namespace azedu
