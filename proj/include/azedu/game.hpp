#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace azedu {

struct Point {
  int x = 0;  // column
  int y = 0;  // row

  friend bool operator==(const Point&, const Point&) = default;
};

enum class Player : std::uint8_t { Black = 1, White = 2 };

constexpr Player opponent(Player p) {
  return p == Player::Black ? Player::White : Player::Black;
}

const char* to_string(Player p);

enum class Cell : std::uint8_t { Empty = 0, Black = 1, White = 2 };

constexpr Cell stone_of(Player p) { return static_cast<Cell>(p); }

struct GameConfig {
  int board_x = 15;
  int board_y = 15;
  int win_length = 5;

  int cells() const { return board_x * board_y; }
  bool contains(Point p) const {
    return p.x >= 0 && p.y >= 0 && p.x < board_x && p.y < board_y;
  }
  int index(Point p) const { return p.y * board_x + p.x; }
  Point point(int index) const { return {index % board_x, index / board_x}; }

  // Throws GameError(InvalidConfig).
  void validate() const;

  friend bool operator==(const GameConfig&, const GameConfig&) = default;
};

struct Outcome {
  enum class Kind : std::uint8_t { Ongoing, Win, Draw };

  Kind kind = Kind::Ongoing;
  Player winner = Player::Black;  // meaningful only for Win

  static Outcome ongoing() { return {}; }
  static Outcome win(Player p) { return {Kind::Win, p}; }
  static Outcome draw() { return {Kind::Draw, Player::Black}; }

  bool is_terminal() const { return kind != Kind::Ongoing; }
  bool is_win() const { return kind == Kind::Win; }
  bool is_draw() const { return kind == Kind::Draw; }

  friend bool operator==(const Outcome& a, const Outcome& b) {
    return a.kind == b.kind && (a.kind != Kind::Win || a.winner == b.winner);
  }
};

std::string to_string(const Outcome& o);

struct Move {
  Player player;
  Point point;

  friend bool operator==(const Move&, const Move&) = default;
};

class GameError : public std::runtime_error {
 public:
  enum class Code { InvalidConfig, OccupiedCell, OutOfBounds, GameOver };

  GameError(Code code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Code code() const { return code_; }

 private:
  Code code_;
};

class ReplayError : public std::runtime_error {
 public:
  ReplayError(std::size_t index, const GameError& cause);

  std::size_t index() const { return index_; }
  GameError::Code cause() const { return cause_; }

 private:
  std::size_t index_;
  GameError::Code cause_;
};

// A Gomoku position. Copying is cheap enough for search; play() mutates in
// place and is meant for private clones, apply() returns a new value.
class BoardState {
 public:
  explicit BoardState(const GameConfig& config = {});

  const GameConfig& config() const { return config_; }
  Player to_move() const { return to_move_; }
  const std::vector<Move>& history() const { return history_; }
  const Outcome& outcome() const { return outcome_; }
  bool is_terminal() const { return outcome_.is_terminal(); }

  Cell at(Point p) const { return cells_[config_.index(p)]; }
  Cell at(int index) const { return cells_[index]; }
  const std::vector<Cell>& cells() const { return cells_; }
  int stone_count() const { return static_cast<int>(history_.size()); }

  bool is_legal(Point p) const {
    return !is_terminal() && config_.contains(p) &&
           cells_[config_.index(p)] == Cell::Empty;
  }

  // Throws GameError; the state is untouched on error.
  void play(Point p);
  BoardState apply(Point p) const;

  friend bool operator==(const BoardState&, const BoardState&) = default;

 private:
  Outcome outcome_after(Point last) const;

  GameConfig config_;
  std::vector<Cell> cells_;
  Player to_move_ = Player::Black;
  std::vector<Move> history_;
  Outcome outcome_;
};

BoardState new_game(const GameConfig& config);

// Empty cells in row-major order; empty when the game is over.
std::vector<Point> legal_moves(const BoardState& state);

// One byte per cell (index = y * board_x + x), 1 where legal.
std::vector<std::uint8_t> legal_mask(const BoardState& state);

BoardState apply_move(const BoardState& state, Point p);

Outcome check_outcome(const BoardState& state);

// Throws ReplayError naming the first rejected move.
BoardState replay(const GameConfig& config, const std::vector<Point>& moves);

std::vector<Point> moves_of(const BoardState& state);

// Move-list text: one "x,y" per line.
// Text grid: columns numbered across the top, X = black, O = white.
std::string render_board(const BoardState& state);

std::string format_point(Point p);
Point parse_point(const std::string& text);
void write_move_list(std::ostream& out, const std::vector<Point>& moves);
std::vector<Point> read_move_list(std::istream& in);

// Game log: "gomoku v1 <board_x> <board_y> <win_length>" then the move list.
void write_game_log(std::ostream& out, const GameConfig& config,
                    const std::vector<Point>& moves);

struct GameLog {
  GameConfig config;
  std::vector<Point> moves;
};

// Stops at the first blank line or a line starting with '#', so extra
// sections may follow the move list.
GameLog read_game_log(std::istream& in);

}  // namespace azedu
