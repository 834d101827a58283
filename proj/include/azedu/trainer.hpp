#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "azedu/checkpoint.hpp"
#include "azedu/lr_schedule.hpp"
#include "azedu/network.hpp"
#include "azedu/search.hpp"
#include "azedu/selfplay.hpp"

namespace azedu {

struct TrainConfig {
  int iterations = 10;
  SelfPlayConfig selfplay;
  NetworkConfig net;  // board size follows selfplay.game
  CyclicLRConfig lr_schedule;
  OptimizerConfig optimizer;
  int batch_size = 256;
  int steps_per_iteration = 200;
  int gate_games = 20;
  double gate_threshold = 0.55;  // 0 adopts every candidate
  std::string checkpoint_dir = "checkpoints";

  void validate() const;
};

// Flat "key = value" text; keys mirror the field names, nested with dots
// (selfplay.search.n_simulations, net.trunk_channels, lr_schedule.max_lr, ...).
TrainConfig parse_train_config(std::istream& in);
TrainConfig load_train_config(const std::string& path);
std::string format_train_config(const TrainConfig& cfg);

// ---- arena -------------------------------------------------------------

class Agent {
 public:
  virtual ~Agent() = default;
  virtual Point choose(const BoardState& state, Rng& rng) = 0;
};

class RandomAgent final : public Agent {
 public:
  Point choose(const BoardState& state, Rng& rng) override;
};

// Fresh search per move, argmax-visits (temperature from params).
class SearchAgent final : public Agent {
 public:
  SearchAgent(std::shared_ptr<Evaluator> evaluator, SearchParams params);
  Point choose(const BoardState& state, Rng& rng) override;

 private:
  std::shared_ptr<Evaluator> evaluator_;
  SearchParams params_;
};

struct ArenaResult {
  int wins_a = 0;
  int wins_b = 0;
  int draws = 0;

  int games() const { return wins_a + wins_b + draws; }
  double score_a() const;  // (wins_a + draws/2) / games
};

// Agent a plays Black in even-numbered games, White in odd ones.
ArenaResult play_arena(Agent& a, Agent& b, int games, const GameConfig& game, Rng& rng);
ArenaResult arena(const Weights& a, const Weights& b, int games, const GameConfig& game,
                  const SearchParams& params, Rng& rng);

// ---- gating ------------------------------------------------------------

bool adopt_candidate(double score, double threshold);

struct GateDecision {
  ArenaResult result;
  double score = 0.0;
  bool adopted = false;
};

GateDecision gate(const Weights& current, const Weights& candidate, const TrainConfig& cfg,
                  Rng& rng);

// ---- training loop -----------------------------------------------------

struct LossLogRow {
  std::int64_t step = 0;
  double lr = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double total_loss = 0.0;
};

inline constexpr const char* kLossLogHeader = "step,lr,policy_loss,value_loss,total_loss";

std::vector<LossLogRow> read_loss_log(const std::string& path);
std::string render_loss_svg(const std::vector<LossLogRow>& rows);

struct TrainOptions {
  std::optional<std::string> resume;  // checkpoint to continue from
  std::ostream* progress = nullptr;
};

struct TrainSummary {
  std::string final_checkpoint;  // latest trained network
  std::string best_checkpoint;   // network used for self-play
  std::string loss_log;
  int iterations_run = 0;
  std::uint64_t final_step = 0;
  int adoptions = 0;
};

// Per iteration: self-play with the adopted network, steps_per_iteration
// optimizer steps at cyclic_lr(step), checkpoint, then gate the candidate.
// Files in checkpoint_dir: iter_NNNN.azck, latest.azck, best.azck,
// loss_log.csv, iterations.jsonl.
TrainSummary train(const TrainConfig& cfg, const TrainOptions& options = {});

}  // namespace azedu
