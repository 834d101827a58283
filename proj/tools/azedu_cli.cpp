#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "azedu/checkpoint.hpp"
#include "azedu/game.hpp"
#include "azedu/http_api.hpp"
#include "azedu/play_service.hpp"
#include "azedu/sample_io.hpp"
#include "azedu/selfplay.hpp"
#include "azedu/trainer.hpp"
#include "httplib.h"

namespace fs = std::filesystem;
using namespace azedu;

namespace {

GameConfig game_for(const NetworkConfig& net, int win_length) {
  GameConfig g;
  g.board_x = net.board_x;
  g.board_y = net.board_y;
  g.win_length = win_length;
  g.validate();
  return g;
}

// "random" and "uniform" are built-in players; anything else is a checkpoint path.
std::unique_ptr<Agent> make_agent(const std::string& spec, const SearchParams& params,
                                  std::optional<NetworkConfig>& net) {
  if (spec == "random") return std::make_unique<RandomAgent>();
  if (spec == "uniform") return std::make_unique<SearchAgent>(std::make_shared<UniformEvaluator>(), params);
  Checkpoint ck = load_checkpoint(spec);
  if (net && (net->board_x != ck.weights.config.board_x || net->board_y != ck.weights.config.board_y)) {
    throw std::invalid_argument("checkpoints disagree on board size");
  }
  net = ck.weights.config;
  auto w = std::make_shared<const Weights>(std::move(ck.weights));
  return std::make_unique<SearchAgent>(std::make_shared<NetworkEvaluator>(w), params);
}

int cmd_train(const std::string& config, const std::string& resume) {
  TrainConfig cfg = load_train_config(config);
  TrainOptions opts;
  if (!resume.empty()) opts.resume = resume;
  opts.progress = &std::cout;
  const TrainSummary s = train(cfg, opts);
  std::cout << "iterations " << s.iterations_run << ", step " << s.final_step << ", adopted "
            << s.adoptions << "\nlatest " << s.final_checkpoint << "\nbest " << s.best_checkpoint
            << "\nloss log " << s.loss_log << '\n';
  return 0;
}

int cmd_selfplay(const std::string& checkpoint, SelfPlayConfig cfg, const std::string& out_dir) {
  std::shared_ptr<const Weights> weights;
  if (checkpoint != "uniform") {
    weights = std::make_shared<const Weights>(load_checkpoint(checkpoint).weights);
    cfg.game.board_x = weights->config.board_x;
    cfg.game.board_y = weights->config.board_y;
  }
  cfg.augment = cfg.game.board_x == cfg.game.board_y;
  EvaluatorFactory factory = [weights](int) -> std::unique_ptr<Evaluator> {
    if (!weights) return std::make_unique<UniformEvaluator>();
    return std::make_unique<NetworkEvaluator>(weights);
  };
  IterationOutput out = run_games(factory, cfg, 0);
  fs::create_directories(out_dir);
  write_sample_batch((fs::path(out_dir) / "samples.azed").string(), cfg.game.board_x,
                     cfg.game.board_y, out.samples);
  std::ofstream games(fs::path(out_dir) / "games.txt");
  for (const auto& r : out.records) {
    write_game_record(games, r);
    games << '\n';
  }
  std::cout << out.report.to_json() << '\n';
  return out.report.failures.empty() ? 0 : 1;
}

int cmd_eval(const std::string& a, const std::string& b, int games, int sims, int win,
             std::uint64_t seed) {
  SearchParams params;
  params.n_simulations = sims;
  params.dirichlet_epsilon = 0.0;
  std::optional<NetworkConfig> net;
  auto agent_a = make_agent(a, params, net);
  auto agent_b = make_agent(b, params, net);
  if (!net) throw std::invalid_argument("at least one side must be a checkpoint");
  Rng rng(seed);
  const ArenaResult r = play_arena(*agent_a, *agent_b, games, game_for(*net, win), rng);
  std::cout << "a wins " << r.wins_a << ", b wins " << r.wins_b << ", draws " << r.draws
            << ", score(a) " << r.score_a() << '\n';
  return 0;
}

int cmd_plot(const std::string& log, const std::string& out) {
  const auto rows = read_loss_log(log);
  std::ofstream f(out);
  f << render_loss_svg(rows);
  if (!f) throw std::runtime_error("cannot write " + out);
  std::cout << rows.size() << " rows -> " << out << '\n';
  return 0;
}

int cmd_play(const std::string& checkpoint, const std::string& color, int sims, int win) {
  EngineRegistry engines;
  ServiceOptions opts;
  std::string engine_id = "uniform";
  if (checkpoint != "uniform") {
    Checkpoint ck = load_checkpoint(checkpoint);
    opts.game = game_for(ck.weights.config, win);
    engine_id = "cli";
    engines.add(engine_id, ck.weights);
  } else {
    opts.game.win_length = win;
  }
  PlayService service(opts, std::move(engines));
  const Player human = color == "white" ? Player::White : Player::Black;
  MoveReply r = service.create_session(human, engine_id, sims);
  const std::string id = r.session.id;
  auto show = [](const MoveReply& reply) {
    if (reply.engine_move) {
      std::cout << "engine plays " << format_point(*reply.engine_move) << " (value "
                << *reply.engine_value << ")\n";
    }
    std::cout << render_board(reply.session.state);
  };
  show(r);
  std::string line;
  while (r.session.status != SessionStatus::Finished) {
    std::cout << "your move (x,y): " << std::flush;
    if (!std::getline(std::cin, line)) return 0;
    try {
      r = service.submit_human_move(id, parse_point(line));
      show(r);
    } catch (const std::exception& e) {
      std::cout << e.what() << '\n';
    }
  }
  std::cout << "result: " << service.session_stats(id).result << '\n';
  return 0;
}

int cmd_serve(const std::string& host, int port, const std::string& checkpoints,
              const std::string& ui_dir, const std::string& journal, ServiceOptions opts) {
  EngineRegistry engines;
  if (!checkpoints.empty()) {
    std::cout << "loaded " << engines.load_directory(checkpoints) << " checkpoints\n";
  }
  if (!journal.empty()) opts.journal_path = journal;
  PlayService service(opts, std::move(engines));
  service.complete_pending_engine_moves();
  httplib::Server server;
  mount_api(server, service);
  if (!ui_dir.empty() && !server.set_mount_point("/", ui_dir)) {
    throw std::invalid_argument("ui dir " + ui_dir + " does not exist");
  }
  std::cout << "listening on " << host << ':' << port << std::endl;
  return server.listen(host, port) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gomoku self-play training and play"};
  app.require_subcommand(1);

  std::string config, resume;
  auto* train_cmd = app.add_subcommand("train", "run the self-play training loop");
  train_cmd->add_option("--config", config, "flat key = value config file")->required();
  train_cmd->add_option("--resume", resume, "checkpoint to resume from");

  std::string sp_ckpt = "uniform", sp_out = "selfplay_out";
  SelfPlayConfig sp;
  auto* sp_cmd = app.add_subcommand("selfplay", "generate self-play games and samples");
  sp_cmd->add_option("--checkpoint", sp_ckpt, "checkpoint path or 'uniform'");
  sp_cmd->add_option("--games", sp.games_per_iteration);
  sp_cmd->add_option("--workers", sp.n_workers);
  sp_cmd->add_option("--sims", sp.search.n_simulations);
  sp_cmd->add_option("--board", sp.game.board_x, "board size when using 'uniform'");
  sp_cmd->add_option("--win", sp.game.win_length);
  sp_cmd->add_option("--seed", sp.seed);
  sp_cmd->add_option("--out", sp_out, "output directory");

  std::string ev_a, ev_b;
  int ev_games = 20, ev_sims = 200, ev_win = 5;
  std::uint64_t ev_seed = 1;
  auto* eval_cmd = app.add_subcommand("eval", "play an arena match");
  eval_cmd->add_option("--a", ev_a, "checkpoint, 'uniform' or 'random'")->required();
  eval_cmd->add_option("--b", ev_b, "checkpoint, 'uniform' or 'random'")->required();
  eval_cmd->add_option("--games", ev_games);
  eval_cmd->add_option("--sims", ev_sims);
  eval_cmd->add_option("--win", ev_win);
  eval_cmd->add_option("--seed", ev_seed);

  std::string pl_log = "checkpoints/loss_log.csv", pl_out = "loss.svg";
  auto* plot_cmd = app.add_subcommand("plot-loss", "render the loss log as SVG");
  plot_cmd->add_option("--log", pl_log);
  plot_cmd->add_option("--out", pl_out);

  std::string play_ckpt, play_color = "black";
  int play_sims = 800, play_win = 5;
  auto* play_cmd = app.add_subcommand("play", "play against the engine in the terminal");
  play_cmd->add_option("--checkpoint", play_ckpt, "checkpoint path or 'uniform'")->required();
  play_cmd->add_option("--color", play_color)->check(CLI::IsMember({"black", "white"}));
  play_cmd->add_option("--sims", play_sims);
  play_cmd->add_option("--win", play_win);

  std::string sv_host = "127.0.0.1", sv_ckpts, sv_ui, sv_journal;
  int sv_port = 8080, sv_think_ms = 10000;
  ServiceOptions sv;
  auto* serve_cmd = app.add_subcommand("serve", "serve the HTTP JSON API");
  serve_cmd->add_option("--host", sv_host);
  serve_cmd->add_option("--port", sv_port);
  serve_cmd->add_option("--checkpoints", sv_ckpts, "directory of *.azck files");
  serve_cmd->add_option("--ui-dir", sv_ui, "static files served at /");
  serve_cmd->add_option("--journal", sv_journal, "session journal (JSON lines)");
  serve_cmd->add_option("--board", sv.game.board_x);
  serve_cmd->add_option("--win", sv.game.win_length);
  serve_cmd->add_option("--sims", sv.default_simulations, "default search budget");
  serve_cmd->add_option("--think-ms", sv_think_ms, "wall-clock cap per engine move");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_train(config, resume);
    if (*sp_cmd) {
      sp.game.board_y = sp.game.board_x;
      return cmd_selfplay(sp_ckpt, sp, sp_out);
    }
    if (*eval_cmd) return cmd_eval(ev_a, ev_b, ev_games, ev_sims, ev_win, ev_seed);
    if (*plot_cmd) return cmd_plot(pl_log, pl_out);
    if (*play_cmd) return cmd_play(play_ckpt, play_color, play_sims, play_win);
    if (*serve_cmd) {
      sv.game.board_y = sv.game.board_x;
      sv.think_limit = std::chrono::milliseconds(sv_think_ms);
      return cmd_serve(sv_host, sv_port, sv_ckpts, sv_ui, sv_journal, sv);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
