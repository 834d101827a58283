#include "azedu/http_api.hpp"

#include "httplib.h"

namespace azedu {

using nlohmann::json;

namespace {

json point_json(Point p) { return {{"x", p.x}, {"y", p.y}}; }

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send(res, status, {{"error", message}});
}

json history_json(const GameSession& s) {
  json out = json::array();
  for (const auto& t : s.log) {
    json row = point_json(t.move.point);
    row["player"] = static_cast<int>(t.move.player);
    row["by"] = t.by_engine ? "engine" : "human";
    if (t.root_value) row["root_value"] = *t.root_value;
    out.push_back(std::move(row));
  }
  return out;
}

json reply_json(const MoveReply& r) {
  json out{{"id", r.session.id}, {"state", state_json(r.session)}};
  if (r.engine_move) out["engine_move"] = point_json(*r.engine_move);
  if (r.engine_value) out["engine_value"] = *r.engine_value;
  if (!r.top_visits.empty()) {
    json visits = json::array();
    for (const auto& v : r.top_visits) {
      json row = point_json(v.move);
      row["visits"] = v.visits;
      visits.push_back(std::move(row));
    }
    out["top_visits"] = std::move(visits);
  }
  return out;
}

json row_json(const ResultRow& r) {
  return {{"opponent", r.opponent},
          {"games", r.games},
          {"engine_wins", r.engine_wins},
          {"human_wins", r.human_wins},
          {"draws", r.draws},
          {"engine_win_rate", r.engine_win_rate()},
          {"human_win_rate", r.human_win_rate()},
          {"draw_rate", r.draw_rate()}};
}

Player parse_color(const json& body) {
  const std::string c = body.value("human_color", "black");
  if (c == "black" || c == "1") return Player::Black;
  if (c == "white" || c == "2") return Player::White;
  throw std::invalid_argument("human_color must be \"black\" or \"white\"");
}

// Runs a handler and maps service exceptions onto status codes.
template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const json::exception& e) {
      send_error(res, 400, std::string("bad request body: ") + e.what());
    } catch (const UnknownSession& e) {
      send_error(res, 404, e.what());
    } catch (const UnknownCheckpoint& e) {
      send_error(res, 404, e.what());
    } catch (const IllegalMove& e) {
      send_error(res, 409, e.what());
    } catch (const std::invalid_argument& e) {
      send_error(res, 400, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

}  // namespace

json state_json(const GameSession& s) {
  const GameConfig& cfg = s.state.config();
  json board = json::array();
  for (int y = 0; y < cfg.board_y; ++y) {
    json row = json::array();
    for (int x = 0; x < cfg.board_x; ++x) row.push_back(static_cast<int>(s.state.at(Point{x, y})));
    board.push_back(std::move(row));
  }
  json out{{"board", std::move(board)},
           {"to_move", static_cast<int>(s.state.to_move())},
           {"status", to_string(s.status)}};
  const Outcome& o = s.state.outcome();
  if (o.is_win()) out["winner"] = static_cast<int>(o.winner);
  if (o.is_terminal()) out["outcome"] = to_string(o);
  return out;
}

json results_json(const ResultsTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows) rows.push_back(row_json(r));
  return {{"rows", std::move(rows)}, {"overall", row_json(table.overall)}};
}

void mount_api(httplib::Server& server, PlayService& service) {
  server.Post("/api/games", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    const json body = req.body.empty() ? json::object() : json::parse(req.body);
    const std::string checkpoint = body.value("checkpoint", "uniform");
    std::optional<int> sims;
    if (body.contains("n_simulations") && !body["n_simulations"].is_null()) {
      sims = body["n_simulations"].get<int>();
    }
    const MoveReply r =
        service.create_session(parse_color(body), checkpoint, sims, body.value("opponent", ""));
    send(res, 201, reply_json(r));
  }));

  server.Post(R"(/api/games/([0-9a-f]+)/moves)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const json body = json::parse(req.body);
                const Point p{body.at("x").get<int>(), body.at("y").get<int>()};
                send(res, 200, reply_json(service.submit_human_move(req.matches[1], p)));
              }));

  server.Get(R"(/api/games/([0-9a-f]+))",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               const GameSession s = service.session(req.matches[1]);
               send(res, 200,
                    {{"id", s.id},
                     {"state", state_json(s)},
                     {"status", to_string(s.status)},
                     {"human_color", static_cast<int>(s.human_color)},
                     {"checkpoint", s.checkpoint},
                     {"n_simulations", s.n_simulations},
                     {"history", history_json(s)}});
             }));

  server.Get(R"(/api/games/([0-9a-f]+)/analysis)",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               if (!service.options().analysis_enabled) {
                 send_error(res, 404, "analysis is disabled");
                 return;
               }
               const auto d = service.analysis(req.matches[1]);
               json body{{"visit_distribution", nullptr}};
               if (d) body["visit_distribution"] = d->probs;
               send(res, 200, body);
             }));

  server.Get("/api/stats", guarded([&service](const httplib::Request&, httplib::Response& res) {
    json sessions = json::array();
    for (const auto& id : service.session_ids()) {
      const SessionSummary s = service.session_stats(id);
      sessions.push_back({{"id", s.id},
                          {"opponent", s.opponent},
                          {"result", s.result},
                          {"move_count", s.move_count},
                          {"engine_root_values", s.engine_root_values}});
    }
    json body = results_json(service.results());
    body["sessions"] = std::move(sessions);
    send(res, 200, body);
  }));
}

}  // namespace azedu
