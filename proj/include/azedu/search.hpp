#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "azedu/features.hpp"
#include "azedu/game.hpp"
#include "azedu/network.hpp"

namespace azedu {

using Rng = std::mt19937_64;

struct SearchParams {
  int n_simulations = 400;
  double c_puct = 1.5;
  double dirichlet_alpha = 0.3;
  double dirichlet_epsilon = 0.25;  // set to 0 outside self-play
  double temperature = 0.0;
  // Leaves gathered per network call under virtual loss; 1 evaluates one
  // leaf per simulation and is the reference behaviour.
  int leaf_batch = 1;
  double virtual_loss = 1.0;

  void validate() const;
};

class TerminalRoot : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnknownChild : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Evaluation {
  std::vector<double> policy;  // nonnegative scores per cell, masked by search
  double value = 0.0;          // for the player to move, in [-1, 1]
};

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual std::vector<Evaluation> evaluate(std::span<const BoardState* const> states) = 0;
};

class NetworkEvaluator final : public Evaluator {
 public:
  explicit NetworkEvaluator(std::shared_ptr<const Weights> weights);

  std::vector<Evaluation> evaluate(std::span<const BoardState* const> states) override;
  const Weights& weights() const { return *weights_; }

 private:
  std::shared_ptr<const Weights> weights_;
};

// Uniform priors and a zero value everywhere: search driven by terminal
// outcomes alone.
class UniformEvaluator final : public Evaluator {
 public:
  std::vector<Evaluation> evaluate(std::span<const BoardState* const> states) override;
};

struct SearchResult {
  MoveDistribution visit_distribution;  // root visits, normalised
  std::vector<int> visit_counts;        // per cell
  double root_value = 0.0;              // for the player to move at the root
  std::vector<Point> principal_variation;
  int board_x = 0;
  int simulations = 0;
  bool timed_out = false;
};

struct EdgeStats {
  Point move;
  double prior = 0.0;
  int visits = 0;
  double total_value = 0.0;  // for the player choosing this edge
  double mean_value() const { return visits > 0 ? total_value / visits : 0.0; }
};

struct SimulationTrace {
  int simulation = 0;
  std::vector<int> path;  // cell indices from the root
  double value = 0.0;     // backed-up value for the player to move at the root
};

using TraceSink = std::function<void(const SimulationTrace&)>;

// JSON lines: {"sim":k,"path":[...],"value":v}
TraceSink json_lines_trace(std::ostream& out);

struct SearchLimits {
  std::chrono::steady_clock::time_point deadline =
      std::chrono::steady_clock::time_point::max();
};

// One PUCT tree owned by one caller. Edge statistics live on child nodes.
class SearchTree {
 public:
  explicit SearchTree(BoardState root);

  const BoardState& root_state() const { return root_state_; }

  // Runs params.n_simulations passes (fewer only if the deadline passes
  // after at least one). Throws TerminalRoot.
  SearchResult search(Evaluator& evaluator, const SearchParams& params, Rng& rng,
                      const SearchLimits& limits = {});

  // Keeps the child's subtree as the new root. Throws UnknownChild when
  // `move` is not a legal move of the current root.
  void advance(Point move);

  void set_trace(TraceSink sink) { trace_ = std::move(sink); }

  int root_visits() const { return nodes_[0].visits; }
  bool root_expanded() const { return nodes_[0].expanded; }
  std::vector<EdgeStats> root_edges() const;
  // Edge stats below the root along `path` (cell indices); empty if unexpanded.
  std::vector<EdgeStats> edges_at(std::span<const int> path) const;
  std::size_t node_count() const { return nodes_.size(); }

  // PUCT selection score of `child` given the visits summed over its siblings.
  static double puct_score(double prior, int visits, double total_value,
                           int parent_visits, double c_puct);

 private:
  struct Node {
    std::int32_t parent = -1;
    std::int32_t first_child = -1;
    std::int32_t child_count = 0;
    std::int32_t move = -1;
    float prior = 0.0f;
    std::int32_t visits = 0;
    double value_sum = 0.0;  // for the player who moved into this node
    bool expanded = false;
    bool terminal = false;
    float terminal_value = 0.0f;  // for the player to move at this node
  };

  struct Leaf {
    std::vector<std::int32_t> path;
    BoardState state;
  };

  std::int32_t select_child(std::int32_t node, const SearchParams& params) const;
  void expand(std::int32_t node, const BoardState& state, const Evaluation& eval);
  Leaf descend(const SearchParams& params, bool virtual_loss);
  bool resolve_terminal(std::int32_t node, const BoardState& state);
  void revert_virtual_loss(const std::vector<std::int32_t>& path, const SearchParams& params);
  void backup(const std::vector<std::int32_t>& path, double leaf_value);
  void emit_trace(int simulation, const std::vector<std::int32_t>& path, double leaf_value);
  void prepare_root(Evaluator& evaluator, const SearchParams& params, Rng& rng);
  SearchResult summarize(int simulations, bool timed_out) const;
  std::vector<EdgeStats> edges_of(std::int32_t node) const;

  BoardState root_state_;
  std::vector<Node> nodes_;
  std::vector<float> root_priors_;  // priors used at the root this search (with noise)
  TraceSink trace_;
};

SearchResult run_search(const BoardState& root, Evaluator& evaluator,
                        const SearchParams& params, Rng& rng);
SearchResult run_search(const BoardState& root, const Weights& weights,
                        const SearchParams& params, Rng& rng);

// temperature 0: most visited move, lowest cell index on ties.
// temperature t > 0: sample proportional to visits^(1/t).
Point select_move(const SearchResult& result, double temperature, Rng& rng);

}  // namespace azedu
