#include <gtest/gtest.h>

#include <filesystem>
#include <cstring>
#include <fstream>
#include <unistd.h>

#include "azedu/checkpoint.hpp"
#include "azedu/lr_schedule.hpp"

namespace azedu {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("azedu_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(CyclicLR, Endpoints) {
  const CyclicLRConfig c;
  EXPECT_EQ(cyclic_lr(0, c), 1e-6);
  EXPECT_EQ(cyclic_lr(2000, c), 5e-3);
  EXPECT_EQ(cyclic_lr(4000, c), 1e-6);
  EXPECT_EQ(cyclic_lr(6000, c), 5e-3);
}

// Piecewise linear with period 2*half, rebuilt from the two line segments.
TEST(CyclicLR, MatchesTriangleOracle) {
  CyclicLRConfig c;
  c.half_cycle_steps = 7;
  for (std::int64_t s = 0; s < 100; ++s) {
    const std::int64_t p = s % 14;
    const double expected = p <= 7 ? c.base_lr + (c.max_lr - c.base_lr) * p / 7.0
                                   : c.max_lr - (c.max_lr - c.base_lr) * (p - 7) / 7.0;
    EXPECT_NEAR(cyclic_lr(s, c), expected, 1e-15) << s;
    EXPECT_EQ(cyclic_lr(s, c), cyclic_lr(s + 14, c));
    EXPECT_GE(cyclic_lr(s, c), c.base_lr);
    EXPECT_LE(cyclic_lr(s, c), c.max_lr);
  }
}

TEST(CyclicLR, Validation) {
  CyclicLRConfig c;
  c.half_cycle_steps = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.max_lr = c.base_lr;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(cyclic_lr(-1, CyclicLRConfig{}), std::invalid_argument);
}

NetworkConfig small(int board) {
  NetworkConfig c;
  c.board_x = board;
  c.board_y = board;
  c.trunk_channels = 8;
  c.trunk_blocks = 2;
  c.value_hidden = 16;
  c.seed = 21;
  return c;
}

TEST(Checkpoint, RoundTripBitExact) {
  const fs::path dir = temp_dir("ckpt_rt");
  Weights w = init_network(small(9));
  w.arrays[0].values[3] = -0.0f;
  w.arrays[1].values[0] = 1e-42f;  // denormal
  CheckpointMeta meta;
  meta.step = 123456789012ull;
  meta.lr_schedule.half_cycle_steps = 77;
  meta.lr_schedule.max_lr = 0.25;
  const std::string path = (dir / "a.azck").string();
  save_checkpoint(path, w, meta);
  const Checkpoint ck = load_checkpoint(path);
  EXPECT_EQ(ck.meta, meta);
  EXPECT_EQ(ck.weights.config, w.config);
  ASSERT_EQ(ck.weights.arrays.size(), w.arrays.size());
  for (std::size_t i = 0; i < w.arrays.size(); ++i) {
    EXPECT_EQ(ck.weights.arrays[i].name, w.arrays[i].name);
    EXPECT_EQ(ck.weights.arrays[i].shape, w.arrays[i].shape);
    ASSERT_EQ(std::memcmp(ck.weights.arrays[i].values.data(), w.arrays[i].values.data(),
                          w.arrays[i].values.size() * sizeof(float)), 0);
  }
  save_checkpoint((dir / "b.azck").string(), ck.weights, ck.meta);
  std::ifstream a(path, std::ios::binary), b(dir / "b.azck", std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
  fs::remove_all(dir);
}

TEST(Checkpoint, TruncatedIsCorrupt) {
  const fs::path dir = temp_dir("ckpt_trunc");
  const std::string path = (dir / "a.azck").string();
  save_checkpoint(path, init_network(small(6)), {});
  const auto full = fs::file_size(path);
  for (auto size : {std::uintmax_t{0}, std::uintmax_t{3}, std::uintmax_t{40}, full / 2, full - 1}) {
    fs::copy_file(path, dir / "t.azck", fs::copy_options::overwrite_existing);
    fs::resize_file(dir / "t.azck", size);
    EXPECT_THROW(load_checkpoint((dir / "t.azck").string()), CorruptCheckpoint) << size;
  }
  {
    std::ofstream extra(path, std::ios::app | std::ios::binary);
    extra << "x";
  }
  EXPECT_THROW(load_checkpoint(path), CorruptCheckpoint);
  EXPECT_THROW(load_checkpoint((dir / "missing.azck").string()), std::runtime_error);
  fs::remove_all(dir);
}

TEST(Checkpoint, BoardMismatchNamesLayer) {
  const fs::path dir = temp_dir("ckpt_shape");
  const std::string path = (dir / "nine.azck").string();
  save_checkpoint(path, init_network(small(9)), {});
  try {
    load_checkpoint(path, small(15));
    FAIL();
  } catch (const ShapeMismatch& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("policy.fc.weight"), std::string::npos) << what;
    EXPECT_NE(what.find("15x15"), std::string::npos) << what;
  }
  EXPECT_NO_THROW(load_checkpoint(path, small(9)));
  fs::remove_all(dir);
}

}  // namespace
}  // namespace azedu
