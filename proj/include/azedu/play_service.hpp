#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "azedu/game.hpp"
#include "azedu/network.hpp"
#include "azedu/search.hpp"

namespace azedu {

class UnknownCheckpoint : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnknownSession : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IllegalMove : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Engines addressable by id: checkpoints loaded from disk plus any
// evaluator registered directly (the built-in "uniform" engine).
class EngineRegistry {
 public:
  EngineRegistry();

  void add(const std::string& id, std::shared_ptr<Evaluator> evaluator);
  void add(const std::string& id, const Weights& weights);
  // Registers every *.azck file under `dir` by file stem; returns the count.
  std::size_t load_directory(const std::string& dir);

  bool contains(const std::string& id) const;
  // Throws UnknownCheckpoint.
  std::shared_ptr<Evaluator> get(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, std::shared_ptr<Evaluator>> engines_;
};

enum class SessionStatus { AwaitingHuman, Thinking, Finished };

const char* to_string(SessionStatus s);

struct VisitEntry {
  Point move;
  int visits = 0;
};

struct TurnRecord {
  Move move;
  bool by_engine = false;
  std::optional<double> root_value;  // engine turns: value for the engine
};

struct GameSession {
  std::string id;
  BoardState state;
  Player human_color = Player::Black;
  std::string checkpoint;
  int n_simulations = 800;
  std::string opponent;  // label used to group the results table
  SessionStatus status = SessionStatus::AwaitingHuman;
  std::vector<TurnRecord> log;
};

struct MoveReply {
  GameSession session;
  std::optional<Point> engine_move;
  std::optional<double> engine_value;
  std::vector<VisitEntry> top_visits;
};

struct SessionSummary {
  std::string id;
  std::string opponent;
  std::string result;  // "engine", "human", "draw" or "ongoing"
  int move_count = 0;
  std::vector<double> engine_root_values;
};

struct ResultRow {
  std::string opponent;
  int games = 0;
  int engine_wins = 0;
  int human_wins = 0;
  int draws = 0;

  double engine_win_rate() const { return games ? static_cast<double>(engine_wins) / games : 0.0; }
  double human_win_rate() const { return games ? static_cast<double>(human_wins) / games : 0.0; }
  double draw_rate() const { return games ? static_cast<double>(draws) / games : 0.0; }
};

// Finished sessions only; one row per opponent label plus the overall row.
struct ResultsTable {
  std::vector<ResultRow> rows;
  ResultRow overall;
};

struct ServiceOptions {
  GameConfig game;
  int default_simulations = 800;
  std::chrono::milliseconds think_limit{10000};  // engine returns best-so-far after this
  std::optional<std::string> journal_path;
  bool analysis_enabled = true;
  bool reuse_tree = true;
  std::uint64_t seed = 0x5eed;
};

// Hosts human-vs-engine games. Every accepted move is appended to the
// journal before the call returns; constructing a service over an existing
// journal restores its sessions.
class PlayService {
 public:
  PlayService(ServiceOptions options, EngineRegistry engines);
  ~PlayService();

  PlayService(const PlayService&) = delete;
  PlayService& operator=(const PlayService&) = delete;

  const ServiceOptions& options() const { return options_; }
  const EngineRegistry& engines() const { return engines_; }

  // Throws UnknownCheckpoint. If the engine opens, its move is included.
  MoveReply create_session(Player human_color, const std::string& checkpoint,
                           std::optional<int> n_simulations = std::nullopt,
                           const std::string& opponent = "");

  // Throws UnknownSession or IllegalMove (session unchanged).
  MoveReply submit_human_move(const std::string& id, Point p);

  GameSession session(const std::string& id) const;
  std::vector<std::string> session_ids() const;
  SessionSummary session_stats(const std::string& id) const;
  ResultsTable results() const;
  // Visit distribution of the engine's most recent search, if any.
  std::optional<MoveDistribution> analysis(const std::string& id) const;

  // Plays engine replies owed by sessions restored in the Thinking state.
  std::size_t complete_pending_engine_moves();

 private:
  struct Slot;

  std::shared_ptr<Slot> find(const std::string& id) const;
  std::string next_id();
  void engine_reply(Slot& slot, MoveReply& reply);
  void journal(const std::string& line);
  void recover(const std::string& path);

  ServiceOptions options_;
  EngineRegistry engines_;
  mutable std::mutex store_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::vector<std::string> order_;
  Rng id_rng_;
  std::mutex journal_mutex_;
  std::unique_ptr<std::ofstream> journal_;
};

}  // namespace azedu
