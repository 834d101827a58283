#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>

#include "azedu/checkpoint.hpp"
#include "azedu/features.hpp"
#include "azedu/game.hpp"
#include "azedu/lr_schedule.hpp"
#include "azedu/network.hpp"
#include "azedu/search.hpp"
#include "azedu/trainer.hpp"

namespace py = pybind11;
using namespace azedu;

namespace {

py::array_t<std::uint8_t> board_array(const BoardState& s) {
  const GameConfig& c = s.config();
  py::array_t<std::uint8_t> out({c.board_y, c.board_x});
  auto v = out.mutable_unchecked<2>();
  for (int y = 0; y < c.board_y; ++y) {
    for (int x = 0; x < c.board_x; ++x) v(y, x) = static_cast<std::uint8_t>(s.at(Point{x, y}));
  }
  return out;
}

py::array_t<std::int8_t> encode_array(const BoardState& s) {
  const StateTensor t = encode_state(s);
  py::array_t<std::int8_t> out({kInputPlanes, t.board_y, t.board_x});
  std::copy(t.data.begin(), t.data.end(), out.mutable_data());
  return out;
}

py::array_t<double> grid_of(const std::vector<double>& cells, int bx, int by) {
  py::array_t<double> out({by, bx});
  std::copy(cells.begin(), cells.end(), out.mutable_data());
  return out;
}

Transform transform_named(const std::string& name) {
  for (Transform g : kAllTransforms) {
    if (name == to_string(g)) return g;
  }
  throw std::invalid_argument("unknown transform '" + name + "'");
}

py::dict search_position(const BoardState& state, std::shared_ptr<Weights> weights,
                         int n_simulations, double c_puct, std::uint64_t seed) {
  SearchParams params;
  params.n_simulations = n_simulations;
  params.c_puct = c_puct;
  params.dirichlet_epsilon = 0.0;
  SearchResult r;
  {
    py::gil_scoped_release release;
    Rng rng(seed);
    if (weights) {
      NetworkEvaluator eval(weights);
      r = run_search(state, eval, params, rng);
    } else {
      UniformEvaluator eval;
      r = run_search(state, eval, params, rng);
    }
  }
  Rng pick(seed);
  const Point best = select_move(r, 0.0, pick);
  const GameConfig& c = state.config();
  std::vector<double> visits(r.visit_counts.begin(), r.visit_counts.end());
  py::dict out;
  out["visits"] = grid_of(visits, c.board_x, c.board_y);
  out["root_value"] = r.root_value;
  out["best"] = py::make_tuple(best.x, best.y);
  out["simulations"] = r.simulations;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gomoku self-play engine: rules, features, network, search and training";

  py::register_exception<GameError>(m, "GameError", PyExc_ValueError);
  py::register_exception<CorruptCheckpoint>(m, "CorruptCheckpoint", PyExc_IOError);
  py::register_exception<ShapeMismatch>(m, "ShapeMismatch", PyExc_ValueError);

  py::enum_<Player>(m, "Player").value("BLACK", Player::Black).value("WHITE", Player::White);

  py::class_<GameConfig>(m, "GameConfig")
      .def(py::init([](int bx, int by, int win) {
             GameConfig c{bx, by, win};
             c.validate();
             return c;
           }),
           py::arg("board_x") = 15, py::arg("board_y") = 15, py::arg("win_length") = 5)
      .def_readonly("board_x", &GameConfig::board_x)
      .def_readonly("board_y", &GameConfig::board_y)
      .def_readonly("win_length", &GameConfig::win_length);

  py::class_<BoardState>(m, "BoardState")
      .def(py::init<const GameConfig&>(), py::arg("config") = GameConfig{})
      .def_property_readonly("config", &BoardState::config)
      .def_property_readonly("to_move", &BoardState::to_move)
      .def_property_readonly("stone_count", &BoardState::stone_count)
      .def("is_terminal", &BoardState::is_terminal)
      .def("is_legal", [](const BoardState& s, int x, int y) { return s.is_legal({x, y}); })
      .def("play", [](BoardState& s, int x, int y) { s.play({x, y}); })
      .def("legal_moves",
           [](const BoardState& s) {
             std::vector<std::pair<int, int>> out;
             for (const Point p : legal_moves(s)) out.emplace_back(p.x, p.y);
             return out;
           })
      .def_property_readonly("outcome", [](const BoardState& s) { return to_string(s.outcome()); })
      .def_property_readonly("winner",
                             [](const BoardState& s) -> std::optional<Player> {
                               if (!s.outcome().is_win()) return std::nullopt;
                               return s.outcome().winner;
                             })
      .def("board", &board_array)
      .def("copy", [](const BoardState& s) { return s; })
      .def("__str__", &render_board);

  m.def("encode_state", &encode_array, "(21, board_y, board_x) int8 planes for the player to move");
  m.def(
      "transform_point",
      [](int x, int y, const std::string& g, int bx, int by) {
        const Point p = transform_point({x, y}, transform_named(g), bx, by);
        return std::make_pair(p.x, p.y);
      },
      py::arg("x"), py::arg("y"), py::arg("transform"), py::arg("board_x"), py::arg("board_y"));
  m.def("transforms", [] {
    std::vector<std::string> out;
    for (Transform g : kAllTransforms) out.emplace_back(to_string(g));
    return out;
  });
  m.def("mask_and_renormalize", [](const std::vector<double>& raw, const std::vector<bool>& legal) {
    std::vector<std::uint8_t> mask(legal.begin(), legal.end());
    return mask_and_renormalize(raw, mask).probs;
  });
  m.def(
      "cyclic_lr",
      [](std::int64_t step, double base_lr, double max_lr, std::int64_t half_cycle_steps) {
        return cyclic_lr(step, {base_lr, max_lr, half_cycle_steps});
      },
      py::arg("step"), py::arg("base_lr") = 1e-6, py::arg("max_lr") = 5e-3,
      py::arg("half_cycle_steps") = 2000);

  py::class_<NetworkConfig>(m, "NetworkConfig")
      .def(py::init<>())
      .def_readwrite("board_x", &NetworkConfig::board_x)
      .def_readwrite("board_y", &NetworkConfig::board_y)
      .def_readwrite("trunk_channels", &NetworkConfig::trunk_channels)
      .def_readwrite("trunk_blocks", &NetworkConfig::trunk_blocks)
      .def_readwrite("value_hidden", &NetworkConfig::value_hidden)
      .def_readwrite("seed", &NetworkConfig::seed);

  py::class_<Weights, std::shared_ptr<Weights>>(m, "Weights")
      .def_property_readonly("config", [](const Weights& w) { return w.config; })
      .def("parameter_count", [](const Weights& w) {
        std::size_t n = 0;
        for (const auto& a : w.arrays) n += a.values.size();
        return n;
      });

  m.def("init_network", [](const NetworkConfig& c) { return std::make_shared<Weights>(init_network(c)); });
  m.def("predict", [](const Weights& w, const BoardState& s) {
    const std::vector<StateTensor> batch{encode_state(s)};
    const Prediction p = forward(w, std::span<const StateTensor>(batch));
    return py::make_tuple(grid_of(p.policy[0].probs, w.config.board_x, w.config.board_y), p.value[0]);
  });
  m.def("save_checkpoint", [](const std::string& path, const Weights& w, std::uint64_t step) {
    save_checkpoint(path, w, CheckpointMeta{step, {}});
  });
  m.def("load_checkpoint", [](const std::string& path) {
    Checkpoint c = load_checkpoint(path);
    return py::make_tuple(std::make_shared<Weights>(std::move(c.weights)), c.meta.step);
  });

  m.def("search", &search_position, py::arg("state"), py::arg("weights") = nullptr,
        py::arg("n_simulations") = 400, py::arg("c_puct") = 1.5, py::arg("seed") = 0,
        "PUCT search without root noise; weights=None searches with uniform priors");

  m.def(
      "train",
      [](const std::string& config_path, std::optional<std::string> resume) {
        const TrainConfig cfg = load_train_config(config_path);
        TrainOptions opts;
        opts.resume = std::move(resume);
        TrainSummary s;
        {
          py::gil_scoped_release release;
          s = train(cfg, opts);
        }
        py::dict out;
        out["final_checkpoint"] = s.final_checkpoint;
        out["best_checkpoint"] = s.best_checkpoint;
        out["loss_log"] = s.loss_log;
        out["iterations_run"] = s.iterations_run;
        out["final_step"] = s.final_step;
        out["adoptions"] = s.adoptions;
        return out;
      },
      py::arg("config_path"), py::arg("resume") = std::nullopt);
  m.def("read_loss_log", [](const std::string& path) {
    py::list out;
    for (const auto& r : read_loss_log(path)) {
      py::dict d;
      d["step"] = r.step;
      d["lr"] = r.lr;
      d["policy_loss"] = r.policy_loss;
      d["value_loss"] = r.value_loss;
      d["total_loss"] = r.total_loss;
      out.append(d);
    }
    return out;
  });
}
