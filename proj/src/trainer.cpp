#include "azedu/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"

namespace azedu {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  selfplay.validate();
  net.validate();
  lr_schedule.validate();
  if (net.board_x != selfplay.game.board_x || net.board_y != selfplay.game.board_y) {
    throw std::invalid_argument("network board size differs from game board size");
  }
  if (iterations < 0) throw std::invalid_argument("iterations must be nonnegative");
  if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  if (static_cast<std::size_t>(batch_size) > selfplay.buffer_capacity) {
    throw std::invalid_argument("batch_size exceeds buffer capacity");
  }
  if (steps_per_iteration <= 0) throw std::invalid_argument("steps_per_iteration must be positive");
  if (gate_threshold != 0.0 && !(gate_threshold >= 0.5 && gate_threshold <= 1.0)) {
    throw std::invalid_argument("gate_threshold must be 0 or within [0.5, 1]");
  }
  if (gate_threshold > 0.0 && gate_games <= 0) {
    throw std::invalid_argument("gating needs gate_games > 0");
  }
  if (checkpoint_dir.empty()) throw std::invalid_argument("checkpoint_dir must be set");
}

// ---- config file -------------------------------------------------------

namespace {

using Setter = std::function<void(TrainConfig&, const std::string&)>;

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value{};
  if (!(in >> value) || !(in >> std::ws).eof()) {
    throw std::invalid_argument("config: bad value '" + text + "' for " + key);
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw std::invalid_argument("config: bad boolean '" + text + "' for " + key);
}

template <typename T, typename Field>
std::pair<std::string, Setter> number(const std::string& key, Field field) {
  return {key, [key, field](TrainConfig& c, const std::string& v) {
            field(c) = parse_number<T>(key, v);
          }};
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto add = [&t](std::pair<std::string, Setter> s) { t.insert(std::move(s)); };
    add(number<int>("iterations", [](TrainConfig& c) -> int& { return c.iterations; }));
    add(number<int>("batch_size", [](TrainConfig& c) -> int& { return c.batch_size; }));
    add(number<int>("steps_per_iteration",
                    [](TrainConfig& c) -> int& { return c.steps_per_iteration; }));
    add(number<int>("gate_games", [](TrainConfig& c) -> int& { return c.gate_games; }));
    add(number<double>("gate_threshold",
                       [](TrainConfig& c) -> double& { return c.gate_threshold; }));
    t["checkpoint_dir"] = [](TrainConfig& c, const std::string& v) { c.checkpoint_dir = v; };

    add(number<int>("selfplay.game.board_x",
                    [](TrainConfig& c) -> int& { return c.selfplay.game.board_x; }));
    add(number<int>("selfplay.game.board_y",
                    [](TrainConfig& c) -> int& { return c.selfplay.game.board_y; }));
    add(number<int>("selfplay.game.win_length",
                    [](TrainConfig& c) -> int& { return c.selfplay.game.win_length; }));
    add(number<int>("selfplay.n_workers",
                    [](TrainConfig& c) -> int& { return c.selfplay.n_workers; }));
    add(number<int>("selfplay.games_per_iteration",
                    [](TrainConfig& c) -> int& { return c.selfplay.games_per_iteration; }));
    add(number<int>("selfplay.temperature_moves",
                    [](TrainConfig& c) -> int& { return c.selfplay.temperature_moves; }));
    add(number<std::size_t>("selfplay.buffer_capacity", [](TrainConfig& c) -> std::size_t& {
      return c.selfplay.buffer_capacity;
    }));
    t["selfplay.augment"] = [](TrainConfig& c, const std::string& v) {
      c.selfplay.augment = parse_bool("selfplay.augment", v);
    };
    add(number<std::uint64_t>("selfplay.seed",
                              [](TrainConfig& c) -> std::uint64_t& { return c.selfplay.seed; }));
    add(number<int>("selfplay.search.n_simulations",
                    [](TrainConfig& c) -> int& { return c.selfplay.search.n_simulations; }));
    add(number<double>("selfplay.search.c_puct",
                       [](TrainConfig& c) -> double& { return c.selfplay.search.c_puct; }));
    add(number<double>("selfplay.search.dirichlet_alpha", [](TrainConfig& c) -> double& {
      return c.selfplay.search.dirichlet_alpha;
    }));
    add(number<double>("selfplay.search.dirichlet_epsilon", [](TrainConfig& c) -> double& {
      return c.selfplay.search.dirichlet_epsilon;
    }));
    add(number<int>("selfplay.search.leaf_batch",
                    [](TrainConfig& c) -> int& { return c.selfplay.search.leaf_batch; }));

    add(number<int>("net.trunk_channels",
                    [](TrainConfig& c) -> int& { return c.net.trunk_channels; }));
    add(number<int>("net.trunk_blocks", [](TrainConfig& c) -> int& { return c.net.trunk_blocks; }));
    add(number<int>("net.policy_channels",
                    [](TrainConfig& c) -> int& { return c.net.policy_channels; }));
    add(number<int>("net.value_channels",
                    [](TrainConfig& c) -> int& { return c.net.value_channels; }));
    add(number<int>("net.value_hidden", [](TrainConfig& c) -> int& { return c.net.value_hidden; }));
    add(number<std::uint64_t>("net.seed",
                              [](TrainConfig& c) -> std::uint64_t& { return c.net.seed; }));

    add(number<double>("lr_schedule.base_lr",
                       [](TrainConfig& c) -> double& { return c.lr_schedule.base_lr; }));
    add(number<double>("lr_schedule.max_lr",
                       [](TrainConfig& c) -> double& { return c.lr_schedule.max_lr; }));
    add(number<std::int64_t>("lr_schedule.half_cycle_steps", [](TrainConfig& c) -> std::int64_t& {
      return c.lr_schedule.half_cycle_steps;
    }));
    add(number<double>("optimizer.momentum",
                       [](TrainConfig& c) -> double& { return c.optimizer.momentum; }));
    add(number<double>("optimizer.weight_decay",
                       [](TrainConfig& c) -> double& { return c.optimizer.weight_decay; }));
    return t;
  }();
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

TrainConfig parse_train_config(std::istream& in) {
  TrainConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" +
                                  key + "'");
    }
    it->second(cfg, value);
  }
  cfg.net.board_x = cfg.selfplay.game.board_x;
  cfg.net.board_y = cfg.selfplay.game.board_y;
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return parse_train_config(in);
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "iterations = " << c.iterations << '\n'
    << "batch_size = " << c.batch_size << '\n'
    << "steps_per_iteration = " << c.steps_per_iteration << '\n'
    << "gate_games = " << c.gate_games << '\n'
    << "gate_threshold = " << c.gate_threshold << '\n'
    << "checkpoint_dir = " << c.checkpoint_dir << '\n'
    << "selfplay.game.board_x = " << c.selfplay.game.board_x << '\n'
    << "selfplay.game.board_y = " << c.selfplay.game.board_y << '\n'
    << "selfplay.game.win_length = " << c.selfplay.game.win_length << '\n'
    << "selfplay.n_workers = " << c.selfplay.n_workers << '\n'
    << "selfplay.games_per_iteration = " << c.selfplay.games_per_iteration << '\n'
    << "selfplay.temperature_moves = " << c.selfplay.temperature_moves << '\n'
    << "selfplay.buffer_capacity = " << c.selfplay.buffer_capacity << '\n'
    << "selfplay.augment = " << (c.selfplay.augment ? "true" : "false") << '\n'
    << "selfplay.seed = " << c.selfplay.seed << '\n'
    << "selfplay.search.n_simulations = " << c.selfplay.search.n_simulations << '\n'
    << "selfplay.search.c_puct = " << c.selfplay.search.c_puct << '\n'
    << "selfplay.search.dirichlet_alpha = " << c.selfplay.search.dirichlet_alpha << '\n'
    << "selfplay.search.dirichlet_epsilon = " << c.selfplay.search.dirichlet_epsilon << '\n'
    << "selfplay.search.leaf_batch = " << c.selfplay.search.leaf_batch << '\n'
    << "net.trunk_channels = " << c.net.trunk_channels << '\n'
    << "net.trunk_blocks = " << c.net.trunk_blocks << '\n'
    << "net.policy_channels = " << c.net.policy_channels << '\n'
    << "net.value_channels = " << c.net.value_channels << '\n'
    << "net.value_hidden = " << c.net.value_hidden << '\n'
    << "net.seed = " << c.net.seed << '\n'
    << "lr_schedule.base_lr = " << c.lr_schedule.base_lr << '\n'
    << "lr_schedule.max_lr = " << c.lr_schedule.max_lr << '\n'
    << "lr_schedule.half_cycle_steps = " << c.lr_schedule.half_cycle_steps << '\n'
    << "optimizer.momentum = " << c.optimizer.momentum << '\n'
    << "optimizer.weight_decay = " << c.optimizer.weight_decay << '\n';
  return o.str();
}

// ---- arena -------------------------------------------------------------

Point RandomAgent::choose(const BoardState& state, Rng& rng) {
  const auto moves = legal_moves(state);
  if (moves.empty()) throw std::invalid_argument("random agent asked to move in a finished game");
  std::uniform_int_distribution<std::size_t> pick(0, moves.size() - 1);
  return moves[pick(rng)];
}

SearchAgent::SearchAgent(std::shared_ptr<Evaluator> evaluator, SearchParams params)
    : evaluator_(std::move(evaluator)), params_(params) {}

Point SearchAgent::choose(const BoardState& state, Rng& rng) {
  SearchTree tree(state);
  const SearchResult res = tree.search(*evaluator_, params_, rng);
  return select_move(res, params_.temperature, rng);
}

double ArenaResult::score_a() const {
  const int n = games();
  return n > 0 ? (wins_a + 0.5 * draws) / n : 0.0;
}

ArenaResult play_arena(Agent& a, Agent& b, int games, const GameConfig& game, Rng& rng) {
  if (games < 1) throw std::invalid_argument("arena needs at least one game");
  ArenaResult result;
  for (int g = 0; g < games; ++g) {
    const Player a_color = g % 2 == 0 ? Player::Black : Player::White;
    BoardState state(game);
    while (!state.is_terminal()) {
      Agent& mover = state.to_move() == a_color ? a : b;
      state.play(mover.choose(state, rng));
    }
    const Outcome& o = state.outcome();
    if (o.is_draw()) {
      ++result.draws;
    } else if (o.winner == a_color) {
      ++result.wins_a;
    } else {
      ++result.wins_b;
    }
  }
  return result;
}

ArenaResult arena(const Weights& a, const Weights& b, int games, const GameConfig& game,
                  const SearchParams& params, Rng& rng) {
  SearchAgent agent_a(std::make_shared<NetworkEvaluator>(std::make_shared<const Weights>(a)),
                      params);
  SearchAgent agent_b(std::make_shared<NetworkEvaluator>(std::make_shared<const Weights>(b)),
                      params);
  return play_arena(agent_a, agent_b, games, game, rng);
}

bool adopt_candidate(double score, double threshold) {
  return threshold <= 0.0 || score >= threshold;
}

GateDecision gate(const Weights& current, const Weights& candidate, const TrainConfig& cfg,
                  Rng& rng) {
  GateDecision d;
  if (cfg.gate_threshold <= 0.0) {
    d.adopted = true;
    return d;
  }
  SearchParams params = cfg.selfplay.search;
  params.dirichlet_epsilon = 0.0;
  params.temperature = 0.0;
  d.result = arena(candidate, current, cfg.gate_games, cfg.selfplay.game, params, rng);
  d.score = d.result.score_a();
  d.adopted = adopt_candidate(d.score, cfg.gate_threshold);
  return d;
}

// ---- loss log ----------------------------------------------------------

std::vector<LossLogRow> read_loss_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open loss log " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kLossLogHeader) {
    throw std::runtime_error(path + ": missing loss log header");
  }
  std::vector<LossLogRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    LossLogRow r;
    char c1, c2, c3, c4;
    std::istringstream ls(line);
    if (!(ls >> r.step >> c1 >> r.lr >> c2 >> r.policy_loss >> c3 >> r.value_loss >> c4 >>
          r.total_loss) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
      throw std::runtime_error(path + ": malformed row '" + line + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

std::string render_loss_svg(const std::vector<LossLogRow>& rows) {
  constexpr double kWidth = 800, kHeight = 480, kLeft = 70, kRight = 20, kTop = 30,
                   kBottom = 50;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  std::int64_t min_step = 0, max_step = 1;
  double max_loss = 1e-9;
  if (!rows.empty()) {
    min_step = rows.front().step;
    max_step = std::max(rows.back().step, min_step + 1);
  }
  for (const auto& r : rows) {
    max_loss = std::max({max_loss, r.policy_loss, r.value_loss, r.total_loss});
  }
  auto sx = [&](double step) {
    return kLeft + plot_w * (step - min_step) / static_cast<double>(max_step - min_step);
  };
  auto sy = [&](double loss) { return kTop + plot_h * (1.0 - loss / max_loss); };

  std::ostringstream o;
  o.precision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
    << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w
    << "\" y2=\"" << kTop + plot_h << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
    << kTop + plot_h << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double loss = max_loss * i / 4.0;
    o << "<text x=\"" << kLeft - 8 << "\" y=\"" << sy(loss) + 4
      << "\" text-anchor=\"end\">" << loss << "</text>\n";
    const double step = min_step + (max_step - min_step) * i / 4.0;
    o << "<text x=\"" << sx(step) << "\" y=\"" << kTop + plot_h + 18
      << "\" text-anchor=\"middle\">" << static_cast<std::int64_t>(step) << "</text>\n";
  }
  o << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 10
    << "\" text-anchor=\"middle\">training step</text>\n";

  struct Series {
    const char* label;
    const char* color;
    double LossLogRow::*field;
  };
  const Series series[] = {{"policy loss", "#1f77b4", &LossLogRow::policy_loss},
                           {"value loss", "#ff7f0e", &LossLogRow::value_loss},
                           {"total loss", "#2ca02c", &LossLogRow::total_loss}};
  int legend = 0;
  for (const Series& s : series) {
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& r : rows) o << sx(static_cast<double>(r.step)) << ',' << sy(r.*s.field) << ' ';
    o << "\"/>\n";
    const double ly = kTop + 10 + 16 * legend++;
    o << "<line x1=\"" << kLeft + plot_w - 120 << "\" y1=\"" << ly << "\" x2=\""
      << kLeft + plot_w - 100 << "\" y2=\"" << ly << "\" stroke=\"" << s.color
      << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << kLeft + plot_w - 95 << "\" y=\"" << ly + 4 << "\">" << s.label
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

// ---- training loop -----------------------------------------------------

namespace {

std::string iteration_checkpoint(const fs::path& dir, int iteration) {
  char name[32];
  std::snprintf(name, sizeof(name), "iter_%04d.azck", iteration);
  return (dir / name).string();
}

void copy_atomically(const std::string& from, const std::string& to) {
  const std::string tmp = to + ".tmp";
  fs::copy_file(from, tmp, fs::copy_options::overwrite_existing);
  fs::rename(tmp, to);
}

}  // namespace

TrainSummary train(const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  const fs::path dir(cfg.checkpoint_dir);
  fs::create_directories(dir);

  TrainSummary summary;
  summary.loss_log = (dir / "loss_log.csv").string();
  summary.final_checkpoint = (dir / "latest.azck").string();
  summary.best_checkpoint = (dir / "best.azck").string();

  Weights candidate;
  CheckpointMeta meta;
  meta.lr_schedule = cfg.lr_schedule;
  Weights best;
  if (options.resume) {
    Checkpoint ck = load_checkpoint(*options.resume, cfg.net);
    candidate = std::move(ck.weights);
    meta = ck.meta;
    if (fs::exists(summary.best_checkpoint)) {
      best = load_checkpoint(summary.best_checkpoint, cfg.net).weights;
    } else {
      best = candidate;
    }
    // Rows past the checkpoint came from an interrupted iteration that will be rerun.
    std::vector<LossLogRow> kept;
    if (fs::exists(summary.loss_log)) kept = read_loss_log(summary.loss_log);
    std::erase_if(kept, [&](const LossLogRow& r) {
      return r.step < 0 || static_cast<std::uint64_t>(r.step) >= meta.step;
    });
    std::ofstream log(summary.loss_log, std::ios::trunc);
    log.precision(17);
    log << kLossLogHeader << '\n';
    for (const auto& r : kept) {
      log << r.step << ',' << r.lr << ',' << r.policy_loss << ',' << r.value_loss << ','
          << r.total_loss << '\n';
    }
  } else {
    candidate = init_network(cfg.net);
    best = candidate;
    std::ofstream log(summary.loss_log, std::ios::trunc);
    log << kLossLogHeader << '\n';
    std::ofstream(dir / "iterations.jsonl", std::ios::trunc);
    save_checkpoint(summary.best_checkpoint, best, meta);
  }

  std::uint64_t step = meta.step;
  const int first_iteration = static_cast<int>(step / cfg.steps_per_iteration);
  SgdOptimizer optimizer(cfg.optimizer);
  ReplayBuffer buffer(cfg.selfplay.buffer_capacity);
  std::ofstream loss_log(summary.loss_log, std::ios::app);
  std::ofstream iteration_log(dir / "iterations.jsonl", std::ios::app);
  loss_log.precision(17);

  for (int it = first_iteration; it < cfg.iterations; ++it) {
    SelfPlayConfig sp = cfg.selfplay;
    sp.seed = cfg.selfplay.seed + 7919ull * static_cast<std::uint64_t>(it);
    const ThroughputReport report =
        run_iteration(best, sp, buffer,
                      static_cast<std::uint64_t>(it) * cfg.selfplay.games_per_iteration);
    if (!report.failures.empty() && report.games == 0) {
      throw std::runtime_error("self-play iteration " + std::to_string(it) +
                               " failed: " + report.failures.front().message);
    }

    Rng batch_rng(cfg.selfplay.seed * 31 + static_cast<std::uint64_t>(it));
    double last_total = 0.0;
    for (int s = 0; s < cfg.steps_per_iteration; ++s) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, buffer.size());
      const auto batch = buffer.sample(n, batch_rng);
      const double lr = cyclic_lr(static_cast<std::int64_t>(step), meta.lr_schedule);
      const LossReport r = optimizer.step(candidate, batch, lr);
      loss_log << step << ',' << lr << ',' << r.policy_loss << ',' << r.value_loss << ','
               << r.total_loss << '\n';
      last_total = r.total_loss;
      ++step;
    }
    loss_log.flush();

    meta.step = step;
    const std::string iter_path = iteration_checkpoint(dir, it + 1);
    save_checkpoint(iter_path, candidate, meta);

    Rng gate_rng(cfg.selfplay.seed * 131 + static_cast<std::uint64_t>(it));
    const GateDecision decision = gate(best, candidate, cfg, gate_rng);
    if (decision.adopted) {
      best = candidate;
      ++summary.adoptions;
    }
    CheckpointMeta best_meta = meta;
    save_checkpoint(summary.best_checkpoint, best, best_meta);
    // latest.azck is written last: resuming from it implies best.azck is current.
    copy_atomically(iter_path, summary.final_checkpoint);

    nlohmann::json entry{{"iteration", it + 1},
                         {"step", step},
                         {"selfplay", nlohmann::json::parse(report.to_json())},
                         {"buffer_size", buffer.size()},
                         {"last_total_loss", last_total},
                         {"gate",
                          {{"enabled", cfg.gate_threshold > 0.0},
                           {"wins_candidate", decision.result.wins_a},
                           {"wins_current", decision.result.wins_b},
                           {"draws", decision.result.draws},
                           {"score", decision.score},
                           {"threshold", cfg.gate_threshold},
                           {"adopted", decision.adopted}}}};
    iteration_log << entry.dump() << '\n';
    iteration_log.flush();
    if (options.progress) {
      *options.progress << "iteration " << it + 1 << "/" << cfg.iterations << ": "
                        << report.games << " games, " << buffer.size() << " samples, loss "
                        << last_total << ", gate score " << decision.score
                        << (decision.adopted ? " (adopted)" : " (kept current)") << std::endl;
    }
    ++summary.iterations_run;
  }
  summary.final_step = step;
  return summary;
}

}  // namespace azedu
