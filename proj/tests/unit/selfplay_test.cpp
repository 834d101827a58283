#include "azedu/selfplay.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"

namespace azedu {
namespace {

GameConfig game(int n, int win) {
  GameConfig g;
  g.board_x = n;
  g.board_y = n;
  g.win_length = win;
  return g;
}

SelfPlayConfig small_cfg(int workers, int games) {
  SelfPlayConfig c;
  c.game = game(6, 4);
  c.n_workers = workers;
  c.games_per_iteration = games;
  c.search.n_simulations = 24;
  c.seed = 42;
  return c;
}

EvaluatorFactory uniform_factory() {
  return [](int) -> std::unique_ptr<Evaluator> { return std::make_unique<UniformEvaluator>(); };
}

class FailingEvaluator final : public Evaluator {
 public:
  std::vector<Evaluation> evaluate(std::span<const BoardState* const>) override {
    throw std::runtime_error("device lost");
  }
};

// A 30-ply non-terminal game on the standard board with uniform-legal targets.
GameRecord thirty_move_record(Outcome outcome) {
  std::mt19937_64 rng(1);
  for (;;) {
    GameRecord rec;
    rec.config = GameConfig{};
    BoardState s(rec.config);
    while (s.stone_count() < 30 && !s.is_terminal()) {
      const auto legal = legal_moves(s);
      MoveDistribution t{std::vector<double>(s.config().cells(), 0.0)};
      for (const Point p : legal) t.probs[s.config().index(p)] = 1.0 / legal.size();
      const Point p = legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)];
      rec.moves.push_back(p);
      rec.targets.push_back(t);
      s.play(p);
    }
    if (s.is_terminal()) continue;
    rec.outcome = outcome;
    return rec;
  }
}

TEST(ReplayBuffer, EvictsOldest) {
  ReplayBuffer buf(10);
  std::vector<TrainingSample> in(15);
  for (int i = 0; i < 15; ++i) in[i].z = static_cast<std::int8_t>(i);
  buf.append(in);
  EXPECT_EQ(buf.size(), 10u);
  EXPECT_EQ(buf.total_appended(), 15u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(buf[i].z, i + 5);
}

TEST(ReplayBuffer, SampleAllIsPermutation) {
  ReplayBuffer buf(10);
  std::vector<TrainingSample> in(10);
  for (int i = 0; i < 10; ++i) in[i].z = static_cast<std::int8_t>(i);
  buf.append(in);
  Rng rng(3);
  const auto out = buf.sample(10, rng);
  std::multiset<int> seen;
  for (const auto& s : out) seen.insert(s.z);
  EXPECT_EQ(seen, (std::multiset<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
  EXPECT_THROW(buf.sample(11, rng), InsufficientSamples);
  EXPECT_THROW(ReplayBuffer(0), std::invalid_argument);
}

TEST(RecordToSamples, Counts) {
  const GameRecord rec = thirty_move_record(Outcome::win(Player::Black));
  EXPECT_EQ(record_to_samples(rec, false).size(), 30u);
  EXPECT_EQ(record_to_samples(rec, true).size(), 240u);
  GameRecord empty;
  EXPECT_TRUE(record_to_samples(empty, true).empty());
}

TEST(RecordToSamples, OutcomePerspective) {
  const auto black = record_to_samples(thirty_move_record(Outcome::win(Player::Black)), false);
  for (std::size_t i = 0; i < black.size(); ++i) EXPECT_EQ(black[i].z, i % 2 == 0 ? 1 : -1);
  const auto white = record_to_samples(thirty_move_record(Outcome::win(Player::White)), true);
  for (std::size_t i = 0; i < white.size(); ++i) EXPECT_EQ(white[i].z, (i / 8) % 2 == 0 ? -1 : 1);
  for (const auto& s : record_to_samples(thirty_move_record(Outcome::draw()), true)) EXPECT_EQ(s.z, 0);
}

TEST(RecordToSamples, MismatchedTargets) {
  GameRecord rec = thirty_move_record(Outcome::draw());
  rec.targets.pop_back();
  EXPECT_THROW(record_to_samples(rec, false), std::invalid_argument);
}

TEST(PlayOneGame, RecordInvariants) {
  UniformEvaluator eval;
  SelfPlayConfig cfg = small_cfg(1, 1);
  Rng rng(5);
  for (int g = 0; g < 6; ++g) {
    const GameRecord rec = play_one_game(eval, cfg, rng, g, 0);
    ASSERT_EQ(rec.moves.size(), rec.targets.size());
    const BoardState end = replay(cfg.game, rec.moves);
    EXPECT_TRUE(end.is_terminal());
    EXPECT_EQ(end.outcome(), rec.outcome);

    BoardState s(cfg.game);
    for (std::size_t i = 0; i < rec.moves.size(); ++i) {
      const auto legal = legal_mask(s);
      EXPECT_NEAR(rec.targets[i].sum(), 1.0, 1e-9);
      for (int c = 0; c < cfg.game.cells(); ++c) {
        if (!legal[c]) EXPECT_EQ(rec.targets[i].probs[c], 0.0);
      }
      s.play(rec.moves[i]);
    }

    const auto samples = record_to_samples(rec, false);
    for (std::size_t i = 1; i < samples.size(); ++i) {
      if (rec.outcome.is_win()) {
        EXPECT_EQ(samples[i].z, -samples[i - 1].z);
      } else {
        EXPECT_EQ(samples[i].z, 0);
      }
    }
  }
}

TEST(PlayOneGame, DrawsGiveZero) {
  UniformEvaluator eval;
  SelfPlayConfig cfg = small_cfg(1, 1);
  cfg.game = game(3, 3);
  cfg.augment = true;
  Rng rng(6);
  int draws = 0;
  for (int g = 0; g < 40; ++g) {
    const GameRecord rec = play_one_game(eval, cfg, rng);
    if (!rec.outcome.is_draw()) continue;
    ++draws;
    for (const auto& s : record_to_samples(rec, true)) EXPECT_EQ(s.z, 0);
  }
  EXPECT_GT(draws, 0);
}

TEST(RunGames, WorkerIndependence) {
  const SelfPlayConfig cfg = small_cfg(3, 7);
  const IterationOutput out = run_games(uniform_factory(), cfg, 100);
  EXPECT_TRUE(out.report.failures.empty());
  EXPECT_EQ(out.report.games, 7);
  EXPECT_EQ(out.report.per_worker_games, (std::vector<int>{3, 2, 2}));
  std::size_t per_worker = 0;
  for (auto n : out.report.per_worker_samples) per_worker += n;
  EXPECT_EQ(per_worker, out.samples.size());
  EXPECT_EQ(out.report.samples, out.samples.size());
  std::set<std::uint64_t> ids;
  std::size_t moves = 0;
  for (const auto& r : out.records) {
    ids.insert(r.game_id);
    EXPECT_EQ(static_cast<int>((r.game_id - 100) % 3), r.worker_id);
    moves += r.moves.size();
  }
  EXPECT_EQ(ids.size(), 7u);
  EXPECT_EQ(*ids.begin(), 100u);
  EXPECT_EQ(out.samples.size(), moves * 8);
}

TEST(RunGames, SingleWorkerDeterministic) {
  const SelfPlayConfig cfg = small_cfg(1, 4);
  const IterationOutput a = run_games(uniform_factory(), cfg);
  const IterationOutput b = run_games(uniform_factory(), cfg);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    ASSERT_EQ(a.samples[i].state, b.samples[i].state);
    ASSERT_EQ(a.samples[i].policy_target, b.samples[i].policy_target);
    ASSERT_EQ(a.samples[i].z, b.samples[i].z);
  }
  EXPECT_EQ(a.report.games, 4);
}

TEST(RunGames, MultiWorkerOutputIndependentOfScheduling) {
  const SelfPlayConfig cfg = small_cfg(4, 8);
  const IterationOutput a = run_games(uniform_factory(), cfg);
  const IterationOutput b = run_games(uniform_factory(), cfg);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].moves, b.records[i].moves);
}

TEST(RunGames, WorkerFailureReported) {
  const SelfPlayConfig cfg = small_cfg(3, 6);
  EvaluatorFactory factory = [](int w) -> std::unique_ptr<Evaluator> {
    if (w == 1) return std::make_unique<FailingEvaluator>();
    return std::make_unique<UniformEvaluator>();
  };
  const IterationOutput out = run_games(factory, cfg);
  ASSERT_EQ(out.report.failures.size(), 1u);
  EXPECT_EQ(out.report.failures[0].worker_id, 1);
  EXPECT_NE(out.report.failures[0].message.find("device lost"), std::string::npos);
  EXPECT_EQ(out.report.per_worker_games, (std::vector<int>{2, 0, 2}));
  EXPECT_EQ(out.records.size(), 4u);
  EXPECT_NE(out.report.to_json().find("\"failures\":[{"), std::string::npos);
}

TEST(RunIteration, AppendsToBuffer) {
  NetworkConfig net;
  net.board_x = net.board_y = 6;
  net.trunk_channels = 8;
  net.trunk_blocks = 1;
  net.value_hidden = 8;
  const Weights w = init_network(net);
  SelfPlayConfig cfg = small_cfg(2, 2);
  ReplayBuffer buf(100000);
  std::vector<GameRecord> records;
  const ThroughputReport rep = run_iteration(w, cfg, buf, 0, &records);
  EXPECT_EQ(rep.games, 2);
  EXPECT_EQ(buf.size(), rep.samples);
  EXPECT_EQ(records.size(), 2u);
}

TEST(SelfPlayConfig, Validation) {
  SelfPlayConfig c = small_cfg(0, 1);
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_cfg(1, 1);
  c.game.board_x = 7;
  EXPECT_THROW(c.validate(), std::invalid_argument);  // augmentation on a non-square board
  c.augment = false;
  EXPECT_NO_THROW(c.validate());
}

TEST(GameRecordIo, RoundTrip) {
  UniformEvaluator eval;
  Rng rng(8);
  const GameRecord rec = play_one_game(eval, small_cfg(1, 1), rng);
  std::stringstream ss;
  write_game_record(ss, rec);
  const GameRecord back = read_game_record(ss);
  EXPECT_EQ(back.moves, rec.moves);
  EXPECT_EQ(back.outcome, rec.outcome);
  ASSERT_EQ(back.targets.size(), rec.targets.size());
  for (std::size_t i = 0; i < rec.targets.size(); ++i) {
    for (std::size_t k = 0; k < rec.targets[i].probs.size(); ++k) {
      EXPECT_NEAR(back.targets[i].probs[k], rec.targets[i].probs[k], 1e-8);
    }
  }
}

}  // namespace
}  // namespace azedu
