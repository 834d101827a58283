#include "azedu/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "json.hpp"

namespace azedu {

void SearchParams::validate() const {
  if (n_simulations <= 0) throw std::invalid_argument("n_simulations must be positive");
  if (!(c_puct > 0.0)) throw std::invalid_argument("c_puct must be positive");
  if (!(dirichlet_alpha > 0.0)) throw std::invalid_argument("dirichlet_alpha must be positive");
  if (!(dirichlet_epsilon >= 0.0 && dirichlet_epsilon <= 1.0)) {
    throw std::invalid_argument("dirichlet_epsilon must be in [0, 1]");
  }
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be nonnegative");
  if (leaf_batch <= 0) throw std::invalid_argument("leaf_batch must be positive");
}

NetworkEvaluator::NetworkEvaluator(std::shared_ptr<const Weights> weights)
    : weights_(std::move(weights)) {
  if (!weights_) throw std::invalid_argument("network evaluator needs weights");
}

std::vector<Evaluation> NetworkEvaluator::evaluate(std::span<const BoardState* const> states) {
  std::vector<StateTensor> batch;
  batch.reserve(states.size());
  for (const BoardState* s : states) batch.push_back(encode_state(*s));
  Prediction pred = forward(*weights_, std::span<const StateTensor>(batch));
  std::vector<Evaluation> out(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    out[i].policy = std::move(pred.policy[i].probs);
    out[i].value = pred.value[i];
  }
  return out;
}

std::vector<Evaluation> UniformEvaluator::evaluate(std::span<const BoardState* const> states) {
  std::vector<Evaluation> out(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    out[i].policy.assign(states[i]->cells().size(), 1.0);
  }
  return out;
}

TraceSink json_lines_trace(std::ostream& out) {
  return [&out](const SimulationTrace& t) {
    nlohmann::json j{{"sim", t.simulation}, {"path", t.path}, {"value", t.value}};
    out << j.dump() << '\n';
  };
}

SearchTree::SearchTree(BoardState root) : root_state_(std::move(root)) {
  nodes_.emplace_back();
}

double SearchTree::puct_score(double prior, int visits, double total_value,
                              int parent_visits, double c_puct) {
  const double q = visits > 0 ? total_value / visits : 0.0;
  return q + c_puct * prior * std::sqrt(static_cast<double>(parent_visits)) / (1.0 + visits);
}

// Ties go to the larger prior, then to the lower cell index.
std::int32_t SearchTree::select_child(std::int32_t node_index, const SearchParams& params) const {
  const Node& node = nodes_[node_index];
  const bool at_root = node_index == 0;
  int parent_visits = 0;
  for (std::int32_t i = 0; i < node.child_count; ++i) {
    parent_visits += nodes_[node.first_child + i].visits;
  }
  std::int32_t best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  double best_prior = -1.0;
  for (std::int32_t i = 0; i < node.child_count; ++i) {
    const Node& child = nodes_[node.first_child + i];
    const double prior = at_root ? root_priors_[i] : child.prior;
    const double score =
        puct_score(prior, child.visits, child.value_sum, parent_visits, params.c_puct);
    if (score > best_score || (score == best_score && prior > best_prior)) {
      best = node.first_child + i;
      best_score = score;
      best_prior = prior;
    }
  }
  return best;
}

void SearchTree::expand(std::int32_t node_index, const BoardState& state, const Evaluation& eval) {
  const auto mask = legal_mask(state);
  const MoveDistribution priors = mask_and_renormalize(eval.policy, mask);
  const auto first = static_cast<std::int32_t>(nodes_.size());
  std::int32_t count = 0;
  for (std::size_t cell = 0; cell < mask.size(); ++cell) {
    if (!mask[cell]) continue;
    Node child;
    child.parent = node_index;
    child.move = static_cast<std::int32_t>(cell);
    child.prior = static_cast<float>(priors.probs[cell]);
    nodes_.push_back(child);
    ++count;
  }
  Node& node = nodes_[node_index];
  node.first_child = first;
  node.child_count = count;
  node.expanded = true;
}

bool SearchTree::resolve_terminal(std::int32_t node_index, const BoardState& state) {
  Node& node = nodes_[node_index];
  if (node.terminal) return true;
  if (!state.is_terminal()) return false;
  node.terminal = true;
  // A decisive result was produced by the previous mover.
  node.terminal_value = state.outcome().is_win() ? -1.0f : 0.0f;
  return true;
}

SearchTree::Leaf SearchTree::descend(const SearchParams& params, bool virtual_loss) {
  Leaf leaf{{0}, root_state_};
  std::int32_t node = 0;
  while (nodes_[node].expanded && !nodes_[node].terminal) {
    node = select_child(node, params);
    leaf.state.play(root_state_.config().point(nodes_[node].move));
    leaf.path.push_back(node);
    if (virtual_loss) {
      nodes_[node].visits += 1;
      nodes_[node].value_sum -= params.virtual_loss;
    }
  }
  return leaf;
}

void SearchTree::revert_virtual_loss(const std::vector<std::int32_t>& path,
                                     const SearchParams& params) {
  for (std::size_t i = 1; i < path.size(); ++i) {
    nodes_[path[i]].visits -= 1;
    nodes_[path[i]].value_sum += params.virtual_loss;
  }
}

// leaf_value is for the player to move at the leaf; each node stores the
// value for the player who moved into it, so the sign flips every ply.
void SearchTree::backup(const std::vector<std::int32_t>& path, double leaf_value) {
  double value = leaf_value;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    Node& n = nodes_[*it];
    n.visits += 1;
    n.value_sum -= value;
    value = -value;
  }
}

void SearchTree::emit_trace(int simulation, const std::vector<std::int32_t>& path,
                            double leaf_value) {
  if (!trace_) return;
  SimulationTrace t;
  t.simulation = simulation;
  for (std::size_t i = 1; i < path.size(); ++i) t.path.push_back(nodes_[path[i]].move);
  const bool odd = (path.size() - 1) % 2 == 1;
  t.value = odd ? -leaf_value : leaf_value;
  trace_(t);
}

void SearchTree::prepare_root(Evaluator& evaluator, const SearchParams& params, Rng& rng) {
  if (!nodes_[0].expanded) {
    const BoardState* s = &root_state_;
    const auto evals = evaluator.evaluate(std::span<const BoardState* const>(&s, 1));
    expand(0, root_state_, evals.at(0));
    nodes_[0].visits += 1;
  }
  const Node& root = nodes_[0];
  root_priors_.resize(root.child_count);
  for (std::int32_t i = 0; i < root.child_count; ++i) {
    root_priors_[i] = nodes_[root.first_child + i].prior;
  }
  if (params.dirichlet_epsilon > 0.0 && root.child_count > 0) {
    std::gamma_distribution<double> gamma(params.dirichlet_alpha, 1.0);
    std::vector<double> noise(root.child_count);
    double total = 0.0;
    for (double& n : noise) total += (n = gamma(rng));
    if (total > 0.0) {
      const double eps = params.dirichlet_epsilon;
      for (std::int32_t i = 0; i < root.child_count; ++i) {
        root_priors_[i] = static_cast<float>((1.0 - eps) * root_priors_[i] + eps * noise[i] / total);
      }
    }
  }
}

SearchResult SearchTree::search(Evaluator& evaluator, const SearchParams& params, Rng& rng,
                                const SearchLimits& limits) {
  params.validate();
  if (root_state_.is_terminal()) throw TerminalRoot("search from a finished game");
  prepare_root(evaluator, params, rng);

  int done = 0;
  bool timed_out = false;
  auto out_of_time = [&] {
    return done > 0 && std::chrono::steady_clock::now() >= limits.deadline;
  };

  if (params.leaf_batch == 1) {
    while (done < params.n_simulations) {
      if (out_of_time()) {
        timed_out = true;
        break;
      }
      Leaf leaf = descend(params, false);
      const std::int32_t node = leaf.path.back();
      double value;
      if (resolve_terminal(node, leaf.state)) {
        value = nodes_[node].terminal_value;
      } else {
        const BoardState* s = &leaf.state;
        const auto evals = evaluator.evaluate(std::span<const BoardState* const>(&s, 1));
        expand(node, leaf.state, evals.at(0));
        value = evals[0].value;
      }
      backup(leaf.path, value);
      emit_trace(done, leaf.path, value);
      ++done;
    }
    return summarize(done, timed_out);
  }

  std::vector<Leaf> pending;
  while (done < params.n_simulations) {
    if (out_of_time()) {
      timed_out = true;
      break;
    }
    pending.clear();
    const int budget = std::min(params.leaf_batch, params.n_simulations - done);
    int claimed = 0;
    while (claimed < budget) {
      Leaf leaf = descend(params, true);
      const std::int32_t node = leaf.path.back();
      if (resolve_terminal(node, leaf.state)) {
        revert_virtual_loss(leaf.path, params);
        const double value = nodes_[node].terminal_value;
        backup(leaf.path, value);
        emit_trace(done, leaf.path, value);
        ++done;
        ++claimed;
        continue;
      }
      const bool duplicate = std::any_of(pending.begin(), pending.end(), [&](const Leaf& p) {
        return p.path.back() == node;
      });
      if (duplicate) {
        revert_virtual_loss(leaf.path, params);
        break;
      }
      pending.push_back(std::move(leaf));
      ++claimed;
    }
    if (pending.empty()) continue;
    std::vector<const BoardState*> states;
    for (const Leaf& l : pending) states.push_back(&l.state);
    const auto evals = evaluator.evaluate(states);
    for (std::size_t i = 0; i < pending.size(); ++i) {
      const Leaf& l = pending[i];
      revert_virtual_loss(l.path, params);
      expand(l.path.back(), l.state, evals.at(i));
      backup(l.path, evals[i].value);
      emit_trace(done, l.path, evals[i].value);
      ++done;
    }
  }
  return summarize(done, timed_out);
}

std::vector<EdgeStats> SearchTree::edges_of(std::int32_t node_index) const {
  std::vector<EdgeStats> edges;
  const Node& node = nodes_[node_index];
  for (std::int32_t i = 0; i < node.child_count; ++i) {
    const Node& c = nodes_[node.first_child + i];
    edges.push_back({root_state_.config().point(c.move), c.prior, c.visits, c.value_sum});
  }
  return edges;
}

std::vector<EdgeStats> SearchTree::root_edges() const { return edges_of(0); }

std::vector<EdgeStats> SearchTree::edges_at(std::span<const int> path) const {
  std::int32_t node = 0;
  for (int cell : path) {
    const Node& n = nodes_[node];
    std::int32_t next = -1;
    for (std::int32_t i = 0; i < n.child_count; ++i) {
      if (nodes_[n.first_child + i].move == cell) next = n.first_child + i;
    }
    if (next < 0) return {};
    node = next;
  }
  return edges_of(node);
}

SearchResult SearchTree::summarize(int simulations, bool timed_out) const {
  const GameConfig& cfg = root_state_.config();
  SearchResult r;
  r.board_x = cfg.board_x;
  r.simulations = simulations;
  r.timed_out = timed_out;
  r.visit_counts.assign(cfg.cells(), 0);
  const Node& root = nodes_[0];
  double total_value = 0.0;
  long total_visits = 0;
  for (std::int32_t i = 0; i < root.child_count; ++i) {
    const Node& c = nodes_[root.first_child + i];
    r.visit_counts[c.move] = c.visits;
    total_value += c.value_sum;
    total_visits += c.visits;
  }
  r.visit_distribution.probs.assign(cfg.cells(), 0.0);
  if (total_visits > 0) {
    for (int i = 0; i < cfg.cells(); ++i) {
      r.visit_distribution.probs[i] = static_cast<double>(r.visit_counts[i]) / total_visits;
    }
    r.root_value = total_value / static_cast<double>(total_visits);
  }

  std::int32_t node = 0;
  while (nodes_[node].expanded && nodes_[node].child_count > 0) {
    const Node& n = nodes_[node];
    std::int32_t best = -1;
    for (std::int32_t i = 0; i < n.child_count; ++i) {
      const std::int32_t c = n.first_child + i;
      if (nodes_[c].visits > 0 && (best < 0 || nodes_[c].visits > nodes_[best].visits)) best = c;
    }
    if (best < 0) break;
    r.principal_variation.push_back(cfg.point(nodes_[best].move));
    node = best;
  }
  return r;
}

void SearchTree::advance(Point move) {
  if (!root_state_.is_legal(move)) {
    throw UnknownChild("move " + format_point(move) + " is not a child of the root");
  }
  const std::int32_t cell = root_state_.config().index(move);
  std::int32_t child = -1;
  const Node& root = nodes_[0];
  for (std::int32_t i = 0; i < root.child_count; ++i) {
    if (nodes_[root.first_child + i].move == cell) child = root.first_child + i;
  }
  root_state_.play(move);

  std::vector<Node> kept;
  kept.emplace_back();
  if (child >= 0) {
    // Copy the subtree breadth-first, re-indexing children contiguously.
    kept[0] = nodes_[child];
    kept[0].parent = -1;
    kept[0].move = -1;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      const std::int32_t count = kept[i].child_count;
      if (count == 0) continue;
      const std::int32_t old_first = kept[i].first_child;
      kept[i].first_child = static_cast<std::int32_t>(kept.size());
      for (std::int32_t k = 0; k < count; ++k) {
        Node c = nodes_[old_first + k];
        c.parent = static_cast<std::int32_t>(i);
        kept.push_back(c);
      }
    }
  }
  nodes_ = std::move(kept);
  root_priors_.clear();
}

SearchResult run_search(const BoardState& root, Evaluator& evaluator,
                        const SearchParams& params, Rng& rng) {
  SearchTree tree(root);
  return tree.search(evaluator, params, rng);
}

SearchResult run_search(const BoardState& root, const Weights& weights,
                        const SearchParams& params, Rng& rng) {
  NetworkEvaluator evaluator(std::make_shared<const Weights>(weights));
  return run_search(root, evaluator, params, rng);
}

Point select_move(const SearchResult& result, double temperature, Rng& rng) {
  const auto& counts = result.visit_counts;
  const int bx = result.board_x;
  if (counts.empty() || bx <= 0) throw std::invalid_argument("empty search result");
  const auto best_it = std::max_element(counts.begin(), counts.end());
  if (*best_it <= 0) throw std::invalid_argument("search result has no visits");
  if (temperature <= 0.0) {
    const int idx = static_cast<int>(best_it - counts.begin());
    return {idx % bx, idx / bx};
  }
  // visits^(1/t) relative to the max, so large exponents cannot overflow.
  const double log_max = std::log(static_cast<double>(*best_it));
  std::vector<double> weights(counts.size(), 0.0);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0) {
      weights[i] = std::exp((std::log(static_cast<double>(counts[i])) - log_max) / temperature);
    }
  }
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  const int idx = pick(rng);
  return {idx % bx, idx / bx};
}

}  // namespace azedu
