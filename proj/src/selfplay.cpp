#include "azedu/selfplay.hpp"

#include <algorithm>
#include <chrono>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace azedu {

void SelfPlayConfig::validate() const {
  game.validate();
  search.validate();
  if (n_workers <= 0) throw std::invalid_argument("n_workers must be positive");
  if (games_per_iteration <= 0) throw std::invalid_argument("games_per_iteration must be positive");
  if (temperature_moves < 0) throw std::invalid_argument("temperature_moves must be nonnegative");
  if (buffer_capacity == 0) throw std::invalid_argument("buffer_capacity must be positive");
  if (augment && game.board_x != game.board_y) {
    throw std::invalid_argument("augmentation needs a square board");
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::append(std::vector<TrainingSample> samples) {
  total_appended_ += samples.size();
  for (auto& s : samples) {
    if (samples_.size() == capacity_) samples_.pop_front();
    samples_.push_back(std::move(s));
  }
}

std::vector<TrainingSample> ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (batch_size > samples_.size()) {
    throw InsufficientSamples("requested " + std::to_string(batch_size) + " samples, buffer holds " +
                              std::to_string(samples_.size()));
  }
  // Partial Fisher-Yates over indices.
  std::vector<std::size_t> idx(samples_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<TrainingSample> batch;
  batch.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
    batch.push_back(samples_[idx[i]]);
  }
  return batch;
}

GameRecord play_one_game(Evaluator& evaluator, const SelfPlayConfig& cfg, Rng& rng,
                         std::uint64_t game_id, int worker_id) {
  const auto start = std::chrono::steady_clock::now();
  GameRecord rec;
  rec.game_id = game_id;
  rec.worker_id = worker_id;
  rec.config = cfg.game;
  BoardState state(cfg.game);
  while (!state.is_terminal()) {
    SearchTree tree(state);
    SearchResult res = tree.search(evaluator, cfg.search, rng);
    const int ply = static_cast<int>(rec.moves.size());
    const double temperature = ply < cfg.temperature_moves ? 1.0 : 0.0;
    const Point move = select_move(res, temperature, rng);
    rec.targets.push_back(std::move(res.visit_distribution));
    rec.moves.push_back(move);
    state.play(move);
  }
  rec.outcome = state.outcome();
  rec.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

GameRecord play_one_game(const Weights& weights, const SelfPlayConfig& cfg, Rng& rng) {
  NetworkEvaluator evaluator(std::make_shared<const Weights>(weights));
  return play_one_game(evaluator, cfg, rng);
}

std::vector<TrainingSample> record_to_samples(const GameRecord& record, bool augment) {
  std::vector<TrainingSample> out;
  if (record.moves.empty()) return out;
  if (record.targets.size() != record.moves.size()) {
    throw std::invalid_argument("game record needs one target per move");
  }
  out.reserve(record.moves.size() * (augment ? 8 : 1));
  BoardState state(record.config);
  for (std::size_t i = 0; i < record.moves.size(); ++i) {
    TrainingSample s;
    s.state = encode_state(state);
    s.policy_target = record.targets[i];
    if (record.outcome.is_win()) {
      s.z = record.outcome.winner == state.to_move() ? 1 : -1;
    }
    if (augment) {
      for (auto& a : azedu::augment(s)) out.push_back(std::move(a));
    } else {
      out.push_back(std::move(s));
    }
    state.play(record.moves[i]);
  }
  return out;
}

std::string ThroughputReport::to_json() const {
  nlohmann::json failures_json = nlohmann::json::array();
  for (const auto& f : failures) {
    failures_json.push_back({{"worker_id", f.worker_id}, {"message", f.message}});
  }
  nlohmann::json j{{"games", games},
                   {"samples", samples},
                   {"seconds", seconds},
                   {"games_per_sec", games_per_sec},
                   {"samples_per_sec", samples_per_sec},
                   {"per_worker_games", per_worker_games},
                   {"per_worker_samples", per_worker_samples},
                   {"failures", failures_json}};
  return j.dump();
}

IterationOutput run_games(const EvaluatorFactory& factory, const SelfPlayConfig& cfg,
                          std::uint64_t first_game_id) {
  cfg.validate();
  const int n = cfg.n_workers;
  struct WorkerOutput {
    std::vector<GameRecord> records;
    std::vector<TrainingSample> samples;
    std::optional<std::string> error;
  };
  std::vector<WorkerOutput> outputs(n);

  auto work = [&](int worker) {
    WorkerOutput& out = outputs[worker];
    try {
      std::unique_ptr<Evaluator> evaluator = factory(worker);
      Rng rng(cfg.seed ^ static_cast<std::uint64_t>(worker));
      for (int g = worker; g < cfg.games_per_iteration; g += n) {
        GameRecord rec = play_one_game(*evaluator, cfg, rng, first_game_id + g, worker);
        auto samples = record_to_samples(rec, cfg.augment);
        out.samples.insert(out.samples.end(), std::make_move_iterator(samples.begin()),
                           std::make_move_iterator(samples.end()));
        out.records.push_back(std::move(rec));
      }
    } catch (const std::exception& e) {
      out.error = e.what();
    } catch (...) {
      out.error = "unknown error";
    }
  };

  const auto start = std::chrono::steady_clock::now();
  if (n == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n);
    for (int w = 0; w < n; ++w) threads.emplace_back(work, w);
    for (auto& t : threads) t.join();
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  IterationOutput result;
  ThroughputReport& rep = result.report;
  for (int w = 0; w < n; ++w) {
    WorkerOutput& out = outputs[w];
    rep.per_worker_games.push_back(static_cast<int>(out.records.size()));
    rep.per_worker_samples.push_back(out.samples.size());
    if (out.error) rep.failures.push_back({w, *out.error});
    for (auto& r : out.records) result.records.push_back(std::move(r));
    for (auto& s : out.samples) result.samples.push_back(std::move(s));
  }
  rep.games = static_cast<int>(result.records.size());
  rep.samples = result.samples.size();
  rep.seconds = seconds;
  if (seconds > 0.0) {
    rep.games_per_sec = rep.games / seconds;
    rep.samples_per_sec = static_cast<double>(rep.samples) / seconds;
  }
  return result;
}

ThroughputReport run_iteration(const Weights& weights, const SelfPlayConfig& cfg,
                               ReplayBuffer& buffer, std::uint64_t first_game_id,
                               std::vector<GameRecord>* records) {
  EvaluatorFactory factory = [&weights](int) -> std::unique_ptr<Evaluator> {
    return std::make_unique<NetworkEvaluator>(std::make_shared<const Weights>(weights));
  };
  IterationOutput out = run_games(factory, cfg, first_game_id);
  buffer.append(std::move(out.samples));
  if (records) *records = std::move(out.records);
  return out.report;
}

void write_game_record(std::ostream& out, const GameRecord& record) {
  write_game_log(out, record.config, record.moves);
  out << "# targets\n";
  std::ostringstream line;
  line.precision(9);
  for (const auto& t : record.targets) {
    line.str("");
    for (std::size_t i = 0; i < t.probs.size(); ++i) {
      if (i) line << ' ';
      line << t.probs[i];
    }
    out << line.str() << '\n';
  }
  out << "# outcome " << to_string(record.outcome) << '\n';
}

GameRecord read_game_record(std::istream& in) {
  GameLog log = read_game_log(in);  // consumes the "# targets" line
  GameRecord rec;
  rec.config = log.config;
  rec.moves = std::move(log.moves);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# outcome ", 0) == 0) {
      const std::string result = line.substr(10);
      if (result == "draw") {
        rec.outcome = Outcome::draw();
      } else if (result == "win:black") {
        rec.outcome = Outcome::win(Player::Black);
      } else if (result == "win:white") {
        rec.outcome = Outcome::win(Player::White);
      } else if (result != "ongoing") {
        throw std::invalid_argument("bad outcome line '" + line + "'");
      }
      break;
    }
    std::istringstream ls(line);
    MoveDistribution d;
    double p;
    while (ls >> p) d.probs.push_back(p);
    if (d.probs.size() != static_cast<std::size_t>(rec.config.cells())) {
      throw std::invalid_argument("target line has wrong cell count");
    }
    rec.targets.push_back(std::move(d));
  }
  if (rec.targets.size() != rec.moves.size()) {
    throw std::invalid_argument("game record needs one target per move");
  }
  return rec;
}

}  // namespace azedu
