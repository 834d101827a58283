#include "azedu/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace azedu {

double MoveDistribution::sum() const {
  return std::accumulate(probs.begin(), probs.end(), 0.0);
}

const char* to_string(Transform g) {
  switch (g) {
    case Transform::Identity: return "identity";
    case Transform::Rot90: return "rot90";
    case Transform::Rot180: return "rot180";
    case Transform::Rot270: return "rot270";
    case Transform::FlipH: return "flip_h";
    case Transform::FlipV: return "flip_v";
    case Transform::Transpose: return "transpose";
    case Transform::AntiTranspose: return "anti_transpose";
  }
  return "?";
}

bool preserves_shape(Transform g) {
  switch (g) {
    case Transform::Identity:
    case Transform::Rot180:
    case Transform::FlipH:
    case Transform::FlipV:
      return true;
    default:
      return false;
  }
}

Transform inverse(Transform g) {
  if (g == Transform::Rot90) return Transform::Rot270;
  if (g == Transform::Rot270) return Transform::Rot90;
  return g;
}

Point transform_point(Point p, Transform g, int board_x, int board_y) {
  if (!preserves_shape(g) && board_x != board_y) {
    throw NonSquareRotation(std::string(to_string(g)) +
                            " needs a square board");
  }
  const int mx = board_x - 1;
  const int my = board_y - 1;
  switch (g) {
    case Transform::Identity: return p;
    case Transform::Rot90: return {mx - p.y, p.x};
    case Transform::Rot180: return {mx - p.x, my - p.y};
    case Transform::Rot270: return {p.y, mx - p.x};
    case Transform::FlipH: return {mx - p.x, p.y};
    case Transform::FlipV: return {p.x, my - p.y};
    case Transform::Transpose: return {p.y, p.x};
    case Transform::AntiTranspose: return {mx - p.y, mx - p.x};
  }
  return p;
}

Transform compose(Transform outer, Transform inner) {
  // Two probe points on a 3×3 board pin down a group element.
  const Point probes[2] = {{0, 0}, {1, 0}};
  for (Transform h : kAllTransforms) {
    bool match = true;
    for (Point p : probes) {
      Point expected = transform_point(transform_point(p, inner, 3, 3), outer, 3, 3);
      if (!(transform_point(p, h, 3, 3) == expected)) {
        match = false;
        break;
      }
    }
    if (match) return h;
  }
  throw std::logic_error("dihedral composition not closed");
}

BoardState transform_board(const BoardState& state, Transform g) {
  const GameConfig& cfg = state.config();
  BoardState out(cfg);
  for (const Move& m : state.history()) {
    out.play(transform_point(m.point, g, cfg.board_x, cfg.board_y));
  }
  return out;
}

StateTensor encode_state(const BoardState& state) {
  const GameConfig& cfg = state.config();
  StateTensor t(cfg.board_x, cfg.board_y);
  const int cells = cfg.cells();
  const Cell own = stone_of(state.to_move());

  std::vector<std::int8_t> board(static_cast<std::size_t>(cells));
  for (int i = 0; i < cells; ++i) {
    const Cell c = state.at(i);
    board[i] = c == Cell::Empty ? 0 : (c == own ? 1 : -1);
  }

  const auto& history = state.history();
  const int n = static_cast<int>(history.size());
  const int filled = std::min(n, kHistoryPlanes);
  for (int k = 0; k <= filled; ++k) {
    std::copy(board.begin(), board.end(),
              t.data.begin() + static_cast<std::ptrdiff_t>(k) * cells);
    if (k < n) board[cfg.index(history[n - 1 - k].point)] = 0;
  }
  return t;
}

namespace {

// perm[i] = destination index of cell i.
std::vector<int> cell_permutation(Transform g, int board_x, int board_y) {
  std::vector<int> perm(static_cast<std::size_t>(board_x) * board_y);
  for (int y = 0; y < board_y; ++y) {
    for (int x = 0; x < board_x; ++x) {
      Point q = transform_point({x, y}, g, board_x, board_y);
      perm[y * board_x + x] = q.y * board_x + q.x;
    }
  }
  return perm;
}

}  // namespace

StateTensor apply_transform_state(const StateTensor& t, Transform g) {
  const auto perm = cell_permutation(g, t.board_x, t.board_y);
  StateTensor out(t.board_x, t.board_y);
  const int cells = t.plane_size();
  for (int k = 0; k < kInputPlanes; ++k) {
    const std::size_t base = static_cast<std::size_t>(k) * cells;
    for (int i = 0; i < cells; ++i) out.data[base + perm[i]] = t.data[base + i];
  }
  return out;
}

MoveDistribution apply_transform_policy(const MoveDistribution& d, Transform g,
                                        int board_x, int board_y) {
  if (d.probs.size() != static_cast<std::size_t>(board_x) * board_y) {
    throw std::invalid_argument("policy size does not match board");
  }
  const auto perm = cell_permutation(g, board_x, board_y);
  MoveDistribution out;
  out.probs.resize(d.probs.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out.probs[perm[i]] = d.probs[i];
  return out;
}

std::vector<TrainingSample> augment(const TrainingSample& sample) {
  const int bx = sample.state.board_x;
  const int by = sample.state.board_y;
  if (bx != by) {
    throw NonSquareRotation("augmentation needs a square board");
  }
  std::vector<TrainingSample> out;
  out.reserve(kAllTransforms.size());
  for (Transform g : kAllTransforms) {
    out.push_back({apply_transform_state(sample.state, g),
                   apply_transform_policy(sample.policy_target, g, bx, by),
                   sample.z});
  }
  return out;
}

MoveDistribution mask_and_renormalize(std::span<const double> raw,
                                      std::span<const std::uint8_t> legal) {
  if (raw.size() != legal.size()) {
    throw std::invalid_argument("score and legality vectors differ in size");
  }
  MoveDistribution out;
  out.probs.assign(raw.size(), 0.0);
  double mass = 0.0;
  std::size_t n_legal = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!(raw[i] >= 0.0) || !std::isfinite(raw[i])) {
      throw std::invalid_argument("scores must be finite and nonnegative");
    }
    if (legal[i]) {
      out.probs[i] = raw[i];
      mass += raw[i];
      ++n_legal;
    }
  }
  if (n_legal == 0) throw NoLegalMoves("no legal moves to distribute over");
  if (mass > 0.0) {
    for (double& p : out.probs) p /= mass;
  } else {
    const double u = 1.0 / static_cast<double>(n_legal);
    for (std::size_t i = 0; i < raw.size(); ++i) out.probs[i] = legal[i] ? u : 0.0;
  }
  return out;
}

MoveDistribution mask_and_renormalize(std::span<const double> raw,
                                      const std::vector<Point>& legal,
                                      int board_x, int board_y) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(board_x) * board_y, 0);
  for (Point p : legal) {
    if (p.x < 0 || p.y < 0 || p.x >= board_x || p.y >= board_y) {
      throw std::invalid_argument("legal move " + format_point(p) + " off the board");
    }
    mask[p.y * board_x + p.x] = 1;
  }
  return mask_and_renormalize(raw, mask);
}

}  // namespace azedu
