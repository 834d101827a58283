#include "azedu/game.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace azedu {

const char* to_string(Player p) { return p == Player::Black ? "black" : "white"; }

std::string to_string(const Outcome& o) {
  switch (o.kind) {
    case Outcome::Kind::Ongoing:
      return "ongoing";
    case Outcome::Kind::Draw:
      return "draw";
    case Outcome::Kind::Win:
      return std::string("win:") + to_string(o.winner);
  }
  return "?";
}

void GameConfig::validate() const {
  if (board_x <= 0 || board_y <= 0) {
    throw GameError(GameError::Code::InvalidConfig,
                    "board dimensions must be positive");
  }
  if (win_length <= 0) {
    throw GameError(GameError::Code::InvalidConfig,
                    "win_length must be positive");
  }
  if (win_length > std::max(board_x, board_y)) {
    throw GameError(GameError::Code::InvalidConfig,
                    "win_length " + std::to_string(win_length) +
                        " exceeds board extent");
  }
}

ReplayError::ReplayError(std::size_t index, const GameError& cause)
    : std::runtime_error("move " + std::to_string(index) + ": " + cause.what()),
      index_(index),
      cause_(cause.code()) {}

BoardState::BoardState(const GameConfig& config) : config_(config) {
  config_.validate();
  cells_.assign(static_cast<std::size_t>(config_.cells()), Cell::Empty);
}

void BoardState::play(Point p) {
  if (is_terminal()) {
    throw GameError(GameError::Code::GameOver, "game is over");
  }
  if (!config_.contains(p)) {
    throw GameError(GameError::Code::OutOfBounds,
                    "point " + format_point(p) + " is off the board");
  }
  Cell& cell = cells_[config_.index(p)];
  if (cell != Cell::Empty) {
    throw GameError(GameError::Code::OccupiedCell,
                    "point " + format_point(p) + " is occupied");
  }
  cell = stone_of(to_move_);
  history_.push_back({to_move_, p});
  outcome_ = outcome_after(p);
  to_move_ = opponent(to_move_);
}

BoardState BoardState::apply(Point p) const {
  BoardState next = *this;
  next.play(p);
  return next;
}

// Only lines through the last stone can have changed.
Outcome BoardState::outcome_after(Point last) const {
  static constexpr int kDirections[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
  const Cell stone = cells_[config_.index(last)];
  for (const auto& d : kDirections) {
    int run = 1;
    for (int sign : {1, -1}) {
      Point q{last.x + sign * d[0], last.y + sign * d[1]};
      while (config_.contains(q) && cells_[config_.index(q)] == stone) {
        ++run;
        q.x += sign * d[0];
        q.y += sign * d[1];
      }
    }
    if (run >= config_.win_length) {
      return Outcome::win(static_cast<Player>(stone));
    }
  }
  if (static_cast<int>(history_.size()) == config_.cells()) {
    return Outcome::draw();
  }
  return Outcome::ongoing();
}

BoardState new_game(const GameConfig& config) { return BoardState(config); }

std::vector<Point> legal_moves(const BoardState& state) {
  std::vector<Point> moves;
  if (state.is_terminal()) return moves;
  const GameConfig& cfg = state.config();
  moves.reserve(static_cast<std::size_t>(cfg.cells() - state.stone_count()));
  for (int i = 0; i < cfg.cells(); ++i) {
    if (state.at(i) == Cell::Empty) moves.push_back(cfg.point(i));
  }
  return moves;
}

std::vector<std::uint8_t> legal_mask(const BoardState& state) {
  std::vector<std::uint8_t> mask(state.cells().size(), 0);
  if (state.is_terminal()) return mask;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = state.cells()[i] == Cell::Empty ? 1 : 0;
  }
  return mask;
}

BoardState apply_move(const BoardState& state, Point p) { return state.apply(p); }

Outcome check_outcome(const BoardState& state) { return state.outcome(); }

BoardState replay(const GameConfig& config, const std::vector<Point>& moves) {
  BoardState state(config);
  for (std::size_t i = 0; i < moves.size(); ++i) {
    try {
      state.play(moves[i]);
    } catch (const GameError& e) {
      throw ReplayError(i, e);
    }
  }
  return state;
}

std::vector<Point> moves_of(const BoardState& state) {
  std::vector<Point> moves;
  moves.reserve(state.history().size());
  for (const Move& m : state.history()) moves.push_back(m.point);
  return moves;
}

std::string render_board(const BoardState& state) {
  const GameConfig& cfg = state.config();
  std::ostringstream out;
  out << "   ";
  for (int x = 0; x < cfg.board_x; ++x) out << (x < 10 ? " " : "") << x;
  out << '\n';
  for (int y = 0; y < cfg.board_y; ++y) {
    out << (y < 10 ? "  " : " ") << y;
    for (int x = 0; x < cfg.board_x; ++x) {
      const Cell c = state.at(Point{x, y});
      out << ' ' << (c == Cell::Black ? 'X' : c == Cell::White ? 'O' : '.');
    }
    out << '\n';
  }
  return out.str();
}

std::string format_point(Point p) {
  return std::to_string(p.x) + "," + std::to_string(p.y);
}

Point parse_point(const std::string& text) {
  std::istringstream in(text);
  Point p;
  char comma = 0;
  if (!(in >> p.x >> comma >> p.y) || comma != ',') {
    throw std::invalid_argument("malformed move '" + text + "', expected x,y");
  }
  in >> std::ws;
  if (!in.eof()) {
    throw std::invalid_argument("trailing characters in move '" + text + "'");
  }
  return p;
}

void write_move_list(std::ostream& out, const std::vector<Point>& moves) {
  for (const Point& p : moves) out << p.x << ',' << p.y << '\n';
}

namespace {

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::vector<Point> read_moves_until_section(std::istream& in) {
  std::vector<Point> moves;
  std::string line;
  while (std::getline(in, line)) {
    if (is_blank(line) || line[0] == '#') break;
    if (line.back() == '\r') line.pop_back();
    moves.push_back(parse_point(line));
  }
  return moves;
}

}  // namespace

std::vector<Point> read_move_list(std::istream& in) {
  return read_moves_until_section(in);
}

void write_game_log(std::ostream& out, const GameConfig& config,
                    const std::vector<Point>& moves) {
  out << "gomoku v1 " << config.board_x << ' ' << config.board_y << ' '
      << config.win_length << '\n';
  write_move_list(out, moves);
}

GameLog read_game_log(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) {
    throw std::invalid_argument("empty game log");
  }
  std::istringstream hs(header);
  std::string magic, version;
  GameLog log;
  if (!(hs >> magic >> version >> log.config.board_x >> log.config.board_y >>
        log.config.win_length) ||
      magic != "gomoku" || version != "v1") {
    throw std::invalid_argument("bad game log header '" + header + "'");
  }
  log.config.validate();
  log.moves = read_moves_until_section(in);
  return log;
}

}  // namespace azedu
