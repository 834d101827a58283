#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "azedu/features.hpp"
#include "azedu/game.hpp"
#include "azedu/network.hpp"
#include "azedu/search.hpp"

namespace azedu {

struct SelfPlayConfig {
  GameConfig game;
  int n_workers = 8;
  int games_per_iteration = 50;
  SearchParams search;
  int temperature_moves = 8;  // plies sampled at temperature 1, argmax after
  std::size_t buffer_capacity = 100000;
  bool augment = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GameRecord {
  std::uint64_t game_id = 0;
  int worker_id = 0;
  GameConfig config;
  std::vector<Point> moves;
  std::vector<MoveDistribution> targets;  // root visit distribution per move
  Outcome outcome;
  double wall_time = 0.0;  // seconds
};

class InsufficientSamples : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bounded FIFO; the oldest samples are evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void append(std::vector<TrainingSample> samples);
  // Uniform without replacement. Throws InsufficientSamples.
  std::vector<TrainingSample> sample(std::size_t batch_size, Rng& rng) const;

  std::size_t size() const { return samples_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t total_appended() const { return total_appended_; }
  const TrainingSample& operator[](std::size_t i) const { return samples_[i]; }

 private:
  std::size_t capacity_;
  std::uint64_t total_appended_ = 0;
  std::deque<TrainingSample> samples_;
};

GameRecord play_one_game(Evaluator& evaluator, const SelfPlayConfig& cfg, Rng& rng,
                         std::uint64_t game_id = 0, int worker_id = 0);
GameRecord play_one_game(const Weights& weights, const SelfPlayConfig& cfg, Rng& rng);

// z is +1/-1/0 for the player to move at each position.
std::vector<TrainingSample> record_to_samples(const GameRecord& record, bool augment);

struct WorkerFailure {
  int worker_id = 0;
  std::string message;
};

struct ThroughputReport {
  int games = 0;
  std::size_t samples = 0;
  double seconds = 0.0;
  double games_per_sec = 0.0;
  double samples_per_sec = 0.0;
  std::vector<int> per_worker_games;
  std::vector<std::size_t> per_worker_samples;
  std::vector<WorkerFailure> failures;

  std::string to_json() const;
};

struct IterationOutput {
  std::vector<GameRecord> records;        // worker order, then game order
  std::vector<TrainingSample> samples;    // same order as records
  ThroughputReport report;
};

using EvaluatorFactory = std::function<std::unique_ptr<Evaluator>(int worker_id)>;

// Game g (0-based) goes to worker g % n_workers, whose RNG is seeded with
// seed ^ worker_id. Output order does not depend on thread scheduling.
IterationOutput run_games(const EvaluatorFactory& factory, const SelfPlayConfig& cfg,
                          std::uint64_t first_game_id = 0);

// Each worker gets its own copy of `weights`. Samples are appended to `buffer`.
ThroughputReport run_iteration(const Weights& weights, const SelfPlayConfig& cfg,
                               ReplayBuffer& buffer, std::uint64_t first_game_id = 0,
                               std::vector<GameRecord>* records = nullptr);

// Game log plus "# targets" (one line of probabilities per move) and
// "# outcome <result>" sections.
void write_game_record(std::ostream& out, const GameRecord& record);
GameRecord read_game_record(std::istream& in);

}  // namespace azedu
