#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "azedu/game.hpp"

namespace azedu {

inline constexpr int kHistoryPlanes = 20;
inline constexpr int kInputPlanes = kHistoryPlanes + 1;

// (21, board_y, board_x) planes, values in {-1, 0, +1} seen from the player
// to move: +1 own stone, -1 opponent stone. Plane k is the position k plies
// ago; planes past the start of the game stay zero.
struct StateTensor {
  int board_x = 0;
  int board_y = 0;
  std::vector<std::int8_t> data;

  StateTensor() = default;
  StateTensor(int bx, int by)
      : board_x(bx),
        board_y(by),
        data(static_cast<std::size_t>(kInputPlanes) * bx * by, 0) {}

  int plane_size() const { return board_x * board_y; }
  std::int8_t at(int plane, int x, int y) const {
    return data[static_cast<std::size_t>(plane) * plane_size() + y * board_x + x];
  }
  std::int8_t& at(int plane, int x, int y) {
    return data[static_cast<std::size_t>(plane) * plane_size() + y * board_x + x];
  }
  std::span<const std::int8_t> plane(int k) const {
    return std::span(data).subspan(static_cast<std::size_t>(k) * plane_size(),
                                   plane_size());
  }

  friend bool operator==(const StateTensor&, const StateTensor&) = default;
};

// Probability per cell, index = y * board_x + x.
struct MoveDistribution {
  std::vector<double> probs;

  double sum() const;
  friend bool operator==(const MoveDistribution&, const MoveDistribution&) = default;
};

struct TrainingSample {
  StateTensor state;
  MoveDistribution policy_target;
  std::int8_t z = 0;  // outcome for the player to move in `state`
};

// The dihedral group of the square. Rotations are clockwise with y pointing
// down; Transpose = FlipH∘Rot90 and AntiTranspose = FlipV∘Rot90.
enum class Transform : std::uint8_t {
  Identity,
  Rot90,
  Rot180,
  Rot270,
  FlipH,
  FlipV,
  Transpose,
  AntiTranspose,
};

inline constexpr std::array<Transform, 8> kAllTransforms = {
    Transform::Identity, Transform::Rot90,     Transform::Rot180,
    Transform::Rot270,   Transform::FlipH,     Transform::FlipV,
    Transform::Transpose, Transform::AntiTranspose};

const char* to_string(Transform g);

class NonSquareRotation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NoLegalMoves : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

bool preserves_shape(Transform g);
Transform inverse(Transform g);
// Returns h with h(p) = outer(inner(p)).
Transform compose(Transform outer, Transform inner);

// Image of `p` on a board_x × board_y board. Throws NonSquareRotation.
Point transform_point(Point p, Transform g, int board_x, int board_y);

// Replays the game with every move mapped through `g`.
BoardState transform_board(const BoardState& state, Transform g);

StateTensor encode_state(const BoardState& state);

StateTensor apply_transform_state(const StateTensor& t, Transform g);
MoveDistribution apply_transform_policy(const MoveDistribution& d, Transform g,
                                        int board_x, int board_y);

// One sample per element of kAllTransforms, in that order.
std::vector<TrainingSample> augment(const TrainingSample& sample);

// Zeroes illegal cells and renormalizes. When the legal cells carry no mass
// the result is uniform over them. Throws NoLegalMoves, or
// std::invalid_argument on negative or mis-sized input.
MoveDistribution mask_and_renormalize(std::span<const double> raw,
                                      std::span<const std::uint8_t> legal);
MoveDistribution mask_and_renormalize(std::span<const double> raw,
                                      const std::vector<Point>& legal,
                                      int board_x, int board_y);

}  // namespace azedu
