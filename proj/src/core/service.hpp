#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "core/session.hpp"

namespace httplib {
class Server;
}

namespace gems {

// Drives Session::tick from its own thread at a fixed simulated step.
// `time_scale` > 1 runs faster than wall clock.
class SessionRunner {
 public:
  SessionRunner(std::shared_ptr<Session> session, double tick_ms, double time_scale = 1.0);
  ~SessionRunner();
  void start();
  void stop();

 private:
  std::shared_ptr<Session> session_;
  double tick_ms_;
  double time_scale_;
  std::atomic<bool> running_{false};
  std::thread thread_;
};

// HTTP surface of a session:
//   GET  /events   NDJSON stream; a snapshot record first, then live events
//                  (?since=N resumes after seq N without a snapshot,
//                   ?follow=0 returns what exists and closes)
//   POST /command  {"verb": ...} or {"text": "EMS ..."} or a plain-text body
//   GET  /state    current snapshot
//   GET  /chain    kinematic chain and joint limits
//   GET  /health
class SessionService {
 public:
  explicit SessionService(std::shared_ptr<Session> session);
  ~SessionService();

  // "host:port"; port 0 picks a free port. Returns the bound port; throws
  // Io when the address cannot be bound.
  int start(const std::string& bind);
  void stop();
  int port() const { return port_; }

 private:
  std::shared_ptr<Session> session_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
  int port_ = 0;
};

std::pair<std::string, int> parse_bind_address(const std::string& bind);

}  // namespace gems
