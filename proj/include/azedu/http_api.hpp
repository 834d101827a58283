#pragma once

#include <string>

#include "azedu/play_service.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace azedu {

// {board: [[0|1|2]] indexed [y][x], to_move: 1|2, status, winner?}
nlohmann::json state_json(const GameSession& session);
nlohmann::json results_json(const ResultsTable& table);

// Registers the /api routes. Errors come back as {"error": message} with
// 400 (bad request body), 404 (unknown session or checkpoint) or 409 (illegal move).
void mount_api(httplib::Server& server, PlayService& service);

}  // namespace azedu
