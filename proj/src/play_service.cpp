#include "azedu/play_service.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "azedu/checkpoint.hpp"
#include "json.hpp"

namespace azedu {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- engines -----------------------------------------------------------

EngineRegistry::EngineRegistry() { engines_["uniform"] = std::make_shared<UniformEvaluator>(); }

void EngineRegistry::add(const std::string& id, std::shared_ptr<Evaluator> evaluator) {
  engines_[id] = std::move(evaluator);
}

void EngineRegistry::add(const std::string& id, const Weights& weights) {
  engines_[id] = std::make_shared<NetworkEvaluator>(std::make_shared<const Weights>(weights));
}

std::size_t EngineRegistry::load_directory(const std::string& dir) {
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".azck") continue;
    add(entry.path().stem().string(), load_checkpoint(entry.path().string()).weights);
    ++n;
  }
  return n;
}

bool EngineRegistry::contains(const std::string& id) const { return engines_.count(id) > 0; }

std::shared_ptr<Evaluator> EngineRegistry::get(const std::string& id) const {
  const auto it = engines_.find(id);
  if (it == engines_.end()) throw UnknownCheckpoint("unknown checkpoint '" + id + "'");
  return it->second;
}

std::vector<std::string> EngineRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : engines_) out.push_back(id);
  return out;
}

// ---- sessions ----------------------------------------------------------

const char* to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::AwaitingHuman: return "awaiting_human";
    case SessionStatus::Thinking: return "thinking";
    case SessionStatus::Finished: return "finished";
  }
  return "?";
}

// op_mutex serialises mutations of one session (including engine search);
// view_mutex guards the published snapshot that readers copy.
struct PlayService::Slot {
  std::mutex op_mutex;
  mutable std::mutex view_mutex;
  GameSession view;
  std::optional<MoveDistribution> last_visits;

  // Owned by whoever holds op_mutex.
  GameSession work;
  std::shared_ptr<Evaluator> evaluator;
  std::unique_ptr<SearchTree> tree;
  Rng rng;

  void publish() {
    std::lock_guard lock(view_mutex);
    view = work;
  }
};

namespace {

SessionStatus status_for(const GameSession& s) {
  if (s.state.is_terminal()) return SessionStatus::Finished;
  return s.state.to_move() == s.human_color ? SessionStatus::AwaitingHuman
                                            : SessionStatus::Thinking;
}

Player parse_player(const std::string& s) {
  if (s == "black") return Player::Black;
  if (s == "white") return Player::White;
  throw std::invalid_argument("bad color '" + s + "'");
}

}  // namespace

PlayService::PlayService(ServiceOptions options, EngineRegistry engines)
    : options_(std::move(options)),
      engines_(std::move(engines)),
      id_rng_(options_.seed ^ std::random_device{}()) {
  options_.game.validate();
  if (options_.journal_path) {
    if (fs::exists(*options_.journal_path)) recover(*options_.journal_path);
    journal_ = std::make_unique<std::ofstream>(*options_.journal_path, std::ios::app);
    if (!*journal_) throw std::runtime_error("cannot open journal " + *options_.journal_path);
  }
}

PlayService::~PlayService() = default;

std::shared_ptr<PlayService::Slot> PlayService::find(const std::string& id) const {
  std::lock_guard lock(store_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw UnknownSession("unknown session '" + id + "'");
  return it->second;
}

std::string PlayService::next_id() {
  static constexpr char kHex[] = "0123456789abcdef";
  for (;;) {
    std::string id(16, '0');
    std::uint64_t bits = id_rng_();
    for (char& c : id) {
      c = kHex[bits & 0xf];
      bits >>= 4;
    }
    if (!sessions_.count(id)) return id;
  }
}

void PlayService::journal(const std::string& line) {
  if (!journal_) return;
  std::lock_guard lock(journal_mutex_);
  *journal_ << line << '\n';
  journal_->flush();
}

MoveReply PlayService::create_session(Player human_color, const std::string& checkpoint,
                                      std::optional<int> n_simulations,
                                      const std::string& opponent) {
  auto slot = std::make_shared<Slot>();
  slot->evaluator = engines_.get(checkpoint);
  const int sims = n_simulations.value_or(options_.default_simulations);
  if (sims <= 0) throw std::invalid_argument("n_simulations must be positive");

  std::unique_lock op(slot->op_mutex);
  GameSession& s = slot->work;
  s.state = BoardState(options_.game);
  s.human_color = human_color;
  s.checkpoint = checkpoint;
  s.n_simulations = sims;
  s.opponent = opponent;
  s.status = status_for(s);
  {
    std::lock_guard lock(store_mutex_);
    s.id = next_id();
    slot->rng.seed(options_.seed ^ std::hash<std::string>{}(s.id));
    sessions_[s.id] = slot;
    order_.push_back(s.id);
  }
  slot->publish();
  journal(json{{"op", "create"},
               {"id", s.id},
               {"human_color", to_string(human_color)},
               {"checkpoint", checkpoint},
               {"n_simulations", sims},
               {"opponent", opponent}}
              .dump());

  MoveReply reply;
  if (s.status == SessionStatus::Thinking) engine_reply(*slot, reply);
  reply.session = slot->work;
  return reply;
}

MoveReply PlayService::submit_human_move(const std::string& id, Point p) {
  auto slot = find(id);
  std::unique_lock op(slot->op_mutex);
  GameSession& s = slot->work;
  if (s.status == SessionStatus::Finished) throw IllegalMove("game is over");
  if (s.status != SessionStatus::AwaitingHuman) throw IllegalMove("not the human's turn");
  if (!s.state.config().contains(p)) throw IllegalMove("point " + format_point(p) + " is off the board");
  if (s.state.at(p) != Cell::Empty) throw IllegalMove("point " + format_point(p) + " is occupied");

  s.state.play(p);
  s.log.push_back({{s.human_color, p}, false, std::nullopt});
  s.status = status_for(s);
  if (slot->tree) {
    try {
      slot->tree->advance(p);
    } catch (const UnknownChild&) {
      slot->tree.reset();
    }
  }
  slot->publish();
  journal(json{{"op", "move"}, {"id", id}, {"by", "human"}, {"x", p.x}, {"y", p.y}}.dump());

  MoveReply reply;
  if (s.status == SessionStatus::Thinking) engine_reply(*slot, reply);
  reply.session = s;
  return reply;
}

void PlayService::engine_reply(Slot& slot, MoveReply& reply) {
  GameSession& s = slot.work;
  SearchParams params;
  params.n_simulations = s.n_simulations;
  params.dirichlet_epsilon = 0.0;
  params.temperature = 0.0;
  SearchLimits limits;
  if (options_.think_limit.count() > 0) {
    limits.deadline = std::chrono::steady_clock::now() + options_.think_limit;
  }
  if (!options_.reuse_tree || !slot.tree || !(slot.tree->root_state() == s.state)) {
    slot.tree = std::make_unique<SearchTree>(s.state);
  }
  const SearchResult result = slot.tree->search(*slot.evaluator, params, slot.rng, limits);
  const Point move = select_move(result, 0.0, slot.rng);
  if (!s.state.is_legal(move)) {
    throw std::logic_error("engine selected illegal move " + format_point(move));
  }

  const Player engine = opponent(s.human_color);
  s.state.play(move);
  s.log.push_back({{engine, move}, true, result.root_value});
  s.status = status_for(s);
  if (options_.reuse_tree) {
    slot.tree->advance(move);
  } else {
    slot.tree.reset();
  }

  reply.engine_move = move;
  reply.engine_value = result.root_value;
  std::vector<VisitEntry> visits;
  for (std::size_t i = 0; i < result.visit_counts.size(); ++i) {
    if (result.visit_counts[i] > 0) {
      visits.push_back({s.state.config().point(static_cast<int>(i)), result.visit_counts[i]});
    }
  }
  std::stable_sort(visits.begin(), visits.end(),
                   [](const VisitEntry& a, const VisitEntry& b) { return a.visits > b.visits; });
  if (visits.size() > 5) visits.resize(5);
  reply.top_visits = std::move(visits);

  {
    std::lock_guard lock(slot.view_mutex);
    slot.view = s;
    if (options_.analysis_enabled) slot.last_visits = result.visit_distribution;
  }
  journal(json{{"op", "move"},
               {"id", s.id},
               {"by", "engine"},
               {"x", move.x},
               {"y", move.y},
               {"value", result.root_value}}
              .dump());
}

GameSession PlayService::session(const std::string& id) const {
  auto slot = find(id);
  std::lock_guard lock(slot->view_mutex);
  return slot->view;
}

std::vector<std::string> PlayService::session_ids() const {
  std::lock_guard lock(store_mutex_);
  return order_;
}

std::optional<MoveDistribution> PlayService::analysis(const std::string& id) const {
  auto slot = find(id);
  std::lock_guard lock(slot->view_mutex);
  return slot->last_visits;
}

SessionSummary PlayService::session_stats(const std::string& id) const {
  const GameSession s = session(id);
  SessionSummary out;
  out.id = s.id;
  out.opponent = s.opponent;
  out.move_count = static_cast<int>(s.log.size());
  for (const auto& t : s.log) {
    if (t.by_engine && t.root_value) out.engine_root_values.push_back(*t.root_value);
  }
  const Outcome& o = s.state.outcome();
  if (!o.is_terminal()) {
    out.result = "ongoing";
  } else if (o.is_draw()) {
    out.result = "draw";
  } else {
    out.result = o.winner == s.human_color ? "human" : "engine";
  }
  return out;
}

ResultsTable PlayService::results() const {
  ResultsTable table;
  std::map<std::string, std::size_t> row_of;
  for (const auto& id : session_ids()) {
    const SessionSummary s = session_stats(id);
    if (s.result == "ongoing") continue;
    auto [it, inserted] = row_of.try_emplace(s.opponent, table.rows.size());
    if (inserted) table.rows.push_back(ResultRow{s.opponent});
    for (ResultRow* row : {&table.rows[it->second], &table.overall}) {
      ++row->games;
      if (s.result == "engine") ++row->engine_wins;
      if (s.result == "human") ++row->human_wins;
      if (s.result == "draw") ++row->draws;
    }
  }
  table.overall.opponent = "all";
  return table;
}

std::size_t PlayService::complete_pending_engine_moves() {
  std::size_t n = 0;
  for (const auto& id : session_ids()) {
    auto slot = find(id);
    std::unique_lock op(slot->op_mutex);
    if (slot->work.status != SessionStatus::Thinking) continue;
    MoveReply ignored;
    engine_reply(*slot, ignored);
    ++n;
  }
  return n;
}

// A torn final line (crash mid-write) is skipped; any earlier bad line is an error.
void PlayService::recover(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    json j;
    try {
      j = json::parse(lines[i]);
    } catch (const json::parse_error&) {
      if (i + 1 == lines.size()) break;
      throw std::runtime_error(path + ": corrupt journal line " + std::to_string(i + 1));
    }
    const std::string op = j.at("op");
    const std::string id = j.at("id");
    if (op == "create") {
      auto slot = std::make_shared<Slot>();
      GameSession& s = slot->work;
      s.id = id;
      s.state = BoardState(options_.game);
      s.human_color = parse_player(j.at("human_color"));
      s.checkpoint = j.at("checkpoint");
      s.n_simulations = j.at("n_simulations");
      s.opponent = j.value("opponent", "");
      s.status = status_for(s);
      slot->evaluator = engines_.get(s.checkpoint);
      slot->rng.seed(options_.seed ^ std::hash<std::string>{}(id));
      slot->publish();
      sessions_[id] = slot;
      order_.push_back(id);
    } else if (op == "move") {
      const auto it = sessions_.find(id);
      if (it == sessions_.end()) throw std::runtime_error(path + ": move for unknown session " + id);
      GameSession& s = it->second->work;
      const Point p{j.at("x"), j.at("y")};
      const bool by_engine = j.at("by") == "engine";
      const Player mover = s.state.to_move();
      s.state.play(p);
      std::optional<double> value;
      if (j.contains("value")) value = j.at("value").get<double>();
      s.log.push_back({{mover, p}, by_engine, value});
      s.status = status_for(s);
      it->second->publish();
    } else {
      throw std::runtime_error(path + ": unknown journal op '" + op + "'");
    }
  }
}

}  // namespace azedu
