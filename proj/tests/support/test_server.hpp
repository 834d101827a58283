#pragma once

#include <memory>
#include <thread>

#include "azedu/http_api.hpp"
#include "httplib.h"

// Serves a PlayService on an ephemeral localhost port for the lifetime of the object.
class TestServer {
 public:
  explicit TestServer(azedu::PlayService& service) {
    azedu::mount_api(server_, service);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~TestServer() {
    server_.stop();
    thread_.join();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(60, 0);
    return c;
  }
  int port() const { return port_; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};
