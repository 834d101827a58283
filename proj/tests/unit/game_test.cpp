#include "azedu/game.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"

namespace azedu {
namespace {

GameConfig cfg(int bx, int by, int win) {
  GameConfig c;
  c.board_x = bx;
  c.board_y = by;
  c.win_length = win;
  return c;
}

GameError::Code code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const GameError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no GameError thrown";
  return GameError::Code::InvalidConfig;
}

TEST(NewGame, StandardBoard) {
  const BoardState s = new_game(GameConfig{});
  EXPECT_EQ(legal_moves(s).size(), 225u);
  EXPECT_EQ(s.to_move(), Player::Black);
  EXPECT_FALSE(s.is_terminal());
}

TEST(NewGame, SmallBoard) { EXPECT_EQ(legal_moves(new_game(cfg(6, 6, 4))).size(), 36u); }

TEST(NewGame, WinLengthExceedsBoard) {
  EXPECT_EQ(code_of([] { new_game(cfg(3, 3, 5)); }), GameError::Code::InvalidConfig);
  EXPECT_EQ(code_of([] { new_game(cfg(0, 3, 1)); }), GameError::Code::InvalidConfig);
}

TEST(LegalMoves, CountsEmptyCells) {
  BoardState s = new_game(GameConfig{});
  s.play({1, 1});
  s.play({2, 2});
  s.play({3, 3});
  EXPECT_EQ(legal_moves(s).size(), 222u);
  const auto mask = legal_mask(s);
  EXPECT_EQ(mask[s.config().index({2, 2})], 0);
  EXPECT_EQ(mask[s.config().index({0, 0})], 1);
}

TEST(LegalMoves, EmptyWhenWon) {
  const BoardState s = replay(GameConfig{}, {{0, 0}, {0, 1}, {1, 0}, {1, 1}, {2, 0}, {2, 1}, {3, 0}, {3, 1}, {4, 0}});
  ASSERT_TRUE(s.outcome().is_win());
  EXPECT_TRUE(legal_moves(s).empty());
  EXPECT_EQ(code_of([&] { apply_move(s, {9, 9}); }), GameError::Code::GameOver);
}

TEST(ApplyMove, PlacesStone) {
  const BoardState s = apply_move(new_game(GameConfig{}), {7, 7});
  EXPECT_EQ(s.at(Point{7, 7}), Cell::Black);
  EXPECT_EQ(s.to_move(), Player::White);
}

TEST(ApplyMove, Errors) {
  const BoardState s = apply_move(new_game(GameConfig{}), {7, 7});
  EXPECT_EQ(code_of([&] { apply_move(s, {7, 7}); }), GameError::Code::OccupiedCell);
  EXPECT_EQ(code_of([&] { apply_move(s, {15, 0}); }), GameError::Code::OutOfBounds);
  EXPECT_EQ(code_of([&] { apply_move(s, {0, -1}); }), GameError::Code::OutOfBounds);
}

TEST(ApplyMove, FailedPlayLeavesStateUnchanged) {
  BoardState s = apply_move(new_game(GameConfig{}), {7, 7});
  const BoardState before = s;
  EXPECT_THROW(s.play({7, 7}), GameError);
  EXPECT_EQ(s, before);
}

TEST(CheckOutcome, BlackFiveEndingAtFourZero) {
  // Black fills (4,0)..(8,0) with (4,0) played last.
  const BoardState s = replay(GameConfig{}, {{5, 0}, {5, 5}, {6, 0}, {6, 5}, {7, 0}, {7, 5}, {8, 0}, {8, 5}, {4, 0}});
  EXPECT_EQ(s.outcome(), Outcome::win(Player::Black));
}

TEST(CheckOutcome, AntiDiagonalWhite) {
  std::vector<Point> moves;
  for (int i = 0; i < 5; ++i) {
    moves.push_back({i, 14});        // black, scattered on the last row
    moves.push_back({10 - i, i});    // white on the anti-diagonal
  }
  moves[8] = {13, 13};
  const BoardState s = replay(GameConfig{}, moves);
  EXPECT_EQ(s.outcome(), Outcome::win(Player::White));
  EXPECT_EQ(check_outcome(s), s.outcome());
}

TEST(CheckOutcome, OverlineWins) {
  BoardState s = replay(cfg(7, 7, 4), {{0, 0}, {0, 6}, {1, 0}, {1, 6}, {2, 0}, {2, 6}, {4, 0}, {6, 6}});
  ASSERT_FALSE(s.is_terminal());
  s.play({3, 0});  // five in a row with win length 4
  EXPECT_EQ(s.outcome(), Outcome::win(Player::Black));
}

// Enumerates every full 3x3 filling with five black and four white stones.
TEST(CheckOutcome, ThreeByThreeDrawMatchesEnumeration) {
  const GameConfig c = cfg(3, 3, 3);
  const std::vector<Point> draw_moves = {{0, 0}, {1, 0}, {2, 0}, {1, 1}, {0, 1}, {2, 1}, {1, 2}, {0, 2}, {2, 2}};
  const BoardState s = replay(c, draw_moves);
  EXPECT_TRUE(s.outcome().is_draw());

  int fillings = 0, drawn = 0;
  bool found = false;
  for (int mask = 0; mask < 512; ++mask) {
    if (__builtin_popcount(mask) != 5) continue;
    ++fillings;
    oracle::Grid g(3, std::vector<int>(3));
    for (int i = 0; i < 9; ++i) g[i / 3][i % 3] = (mask >> i) & 1 ? 1 : 2;
    if (oracle::full_scan_winner(g, 3)) continue;
    ++drawn;
    bool same = true;
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 3; ++x) same &= g[y][x] == static_cast<int>(s.at(Point{x, y}));
    }
    found |= same;
  }
  EXPECT_EQ(fillings, 126);
  EXPECT_EQ(drawn, 16);
  EXPECT_TRUE(found);
}

TEST(Replay, Examples) {
  const GameConfig c = GameConfig{};
  EXPECT_EQ(replay(c, {}), new_game(c));
  const BoardState s = replay(c, {{0, 0}, {1, 1}});
  EXPECT_EQ(s.stone_count(), 2);
  EXPECT_EQ(s.to_move(), Player::Black);
  try {
    replay(c, {{0, 0}, {0, 0}});
    FAIL();
  } catch (const ReplayError& e) {
    EXPECT_EQ(e.index(), 1u);
    EXPECT_EQ(e.cause(), GameError::Code::OccupiedCell);
  }
}

TEST(GameLog, RoundTrip) {
  const GameConfig c = cfg(9, 7, 4);
  const std::vector<Point> moves = {{0, 0}, {8, 6}, {3, 4}};
  std::stringstream ss;
  write_game_log(ss, c, moves);
  const GameLog log = read_game_log(ss);
  EXPECT_EQ(log.config.board_x, 9);
  EXPECT_EQ(log.config.board_y, 7);
  EXPECT_EQ(log.config.win_length, 4);
  EXPECT_EQ(log.moves, moves);
  EXPECT_EQ(parse_point(format_point({12, 3})), (Point{12, 3}));
  EXPECT_THROW(parse_point("12;3"), std::invalid_argument);
}

// Property suite over random play on boards up to 5x5.
TEST(GameProperties, RandomPlay) {
  std::mt19937_64 rng(7);
  const GameConfig configs[] = {cfg(3, 3, 3), cfg(4, 4, 3), cfg(5, 5, 4), cfg(5, 4, 3), cfg(5, 5, 5), cfg(4, 5, 4)};
  int samples = 0;
  for (int game = 0; samples < 12000; ++game) {
    const GameConfig c = configs[game % std::size(configs)];
    BoardState s(c);
    std::vector<Point> moves;
    while (!s.is_terminal()) {
      const auto legal = legal_moves(s);
      const Point p = legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)];
      s.play(p);
      moves.push_back(p);
      ++samples;

      const auto g = oracle::grid_of(c, moves, moves.size());
      const auto brute = oracle::full_scan_winner(g, c.win_length);
      if (brute) {
        ASSERT_EQ(s.outcome(), Outcome::win(static_cast<Player>(*brute))) << game;
      } else if (static_cast<int>(moves.size()) == c.cells()) {
        ASSERT_TRUE(s.outcome().is_draw());
      } else {
        ASSERT_FALSE(s.is_terminal());
      }

      int empty = 0, black = 0, white = 0;
      for (const Cell cell : s.cells()) {
        empty += cell == Cell::Empty;
        black += cell == Cell::Black;
        white += cell == Cell::White;
      }
      ASSERT_EQ(empty + black + white, c.cells());
      ASSERT_EQ(black + white, static_cast<int>(moves.size()));
    }
    const Outcome final_outcome = s.outcome();
    EXPECT_THROW(s.play(Point{0, 0}), GameError);
    EXPECT_EQ(s.outcome(), final_outcome);
    EXPECT_EQ(replay(c, moves_of(s)), s);
  }
}

}  // namespace
}  // namespace azedu
