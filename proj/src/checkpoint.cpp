#include "azedu/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include "binary_io.hpp"

namespace azedu {

using detail::put;

void save_checkpoint(const std::string& path, const Weights& weights,
                     const CheckpointMeta& meta) {
  check_shapes(weights);
  // Write then rename so a crash never leaves a half-written checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    const NetworkConfig& c = weights.config;
    out.write("AZCK", 4);
    put<std::uint32_t>(out, kCheckpointVersion);
    for (int v : {c.board_x, c.board_y, c.input_planes, c.trunk_channels, c.trunk_blocks,
                  c.policy_channels, c.value_channels, c.value_hidden}) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
    }
    put<std::uint64_t>(out, c.seed);
    put<std::uint64_t>(out, meta.step);
    put<double>(out, meta.lr_schedule.base_lr);
    put<double>(out, meta.lr_schedule.max_lr);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(meta.lr_schedule.half_cycle_steps));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(weights.arrays.size()));
    for (const auto& a : weights.arrays) {
      put<std::uint16_t>(out, static_cast<std::uint16_t>(a.name.size()));
      out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
      put<std::uint8_t>(out, static_cast<std::uint8_t>(a.shape.size()));
      for (auto d : a.shape) put<std::uint32_t>(out, d);
      out.write(reinterpret_cast<const char*>(a.values.data()),
                static_cast<std::streamsize>(a.values.size() * sizeof(float)));
    }
    if (!out.flush()) throw std::runtime_error("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

namespace {

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  try {
    detail::Reader r(in, "checkpoint " + path);
    char magic[4];
    r.read_bytes(magic, 4, "magic");
    if (std::string(magic, 4) != "AZCK") throw CorruptCheckpoint(path + ": bad magic");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
      throw CorruptCheckpoint(path + ": unsupported version " + std::to_string(version));
    }
    Checkpoint ck;
    NetworkConfig& c = ck.weights.config;
    for (int* field : {&c.board_x, &c.board_y, &c.input_planes, &c.trunk_channels,
                       &c.trunk_blocks, &c.policy_channels, &c.value_channels,
                       &c.value_hidden}) {
      *field = static_cast<int>(r.get<std::uint32_t>("network config"));
    }
    c.seed = r.get<std::uint64_t>("seed");
    ck.meta.step = r.get<std::uint64_t>("step");
    ck.meta.lr_schedule.base_lr = r.get<double>("base_lr");
    ck.meta.lr_schedule.max_lr = r.get<double>("max_lr");
    ck.meta.lr_schedule.half_cycle_steps =
        static_cast<std::int64_t>(r.get<std::uint64_t>("half_cycle_steps"));
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw CorruptCheckpoint(path + ": " + e.what());
    }

    const auto count = r.get<std::uint32_t>("array count");
    if (count > 4096) throw CorruptCheckpoint(path + ": implausible array count");
    for (std::uint32_t i = 0; i < count; ++i) {
      ParamArray<float> a;
      a.name.resize(r.get<std::uint16_t>("array name length"));
      r.read_bytes(a.name.data(), a.name.size(), "array name");
      const int rank = r.get<std::uint8_t>("array rank");
      std::size_t n = 1;
      for (int d = 0; d < rank; ++d) {
        a.shape.push_back(r.get<std::uint32_t>("array dims"));
        n *= a.shape.back();
      }
      if (n > (std::size_t{1} << 30)) {
        throw CorruptCheckpoint(path + ": implausible size for " + a.name);
      }
      a.values.resize(n);
      r.read_bytes(a.values.data(), n * sizeof(float), a.name.c_str());
      ck.weights.arrays.push_back(std::move(a));
    }
    if (!r.at_end()) throw CorruptCheckpoint(path + ": trailing bytes after arrays");
    check_shapes(ck.weights);
    return ck;
  } catch (const ShapeMismatch&) {
    throw;
  } catch (const CorruptCheckpoint&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw CorruptCheckpoint(e.what());
  }
}

}  // namespace

Checkpoint load_checkpoint(const std::string& path) { return read_checkpoint(path); }

Checkpoint load_checkpoint(const std::string& path, const NetworkConfig& expected) {
  Checkpoint ck = read_checkpoint(path);
  const auto want = parameter_layout(expected);
  const auto& have = ck.weights.arrays;
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (i >= have.size() || have[i].name != want[i].name || have[i].shape != want[i].shape) {
      throw ShapeMismatch("layer " + want[i].name + ": checkpoint shape does not match " +
                          std::to_string(expected.board_x) + "x" +
                          std::to_string(expected.board_y) + " network");
    }
  }
  if (have.size() != want.size()) {
    throw ShapeMismatch("checkpoint has " + std::to_string(have.size()) +
                        " arrays, network expects " + std::to_string(want.size()));
  }
  return ck;
}

}  // namespace azedu
