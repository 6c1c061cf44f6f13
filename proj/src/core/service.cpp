#include "core/service.hpp"

#include <chrono>

#include <httplib.h>

#include "core/knowledge_base.hpp"

namespace gems {

SessionRunner::SessionRunner(std::shared_ptr<Session> session, double tick_ms, double time_scale)
    : session_(std::move(session)), tick_ms_(tick_ms), time_scale_(time_scale) {
  if (tick_ms_ <= 0 || time_scale_ <= 0) throw Error(ErrorKind::InvalidArgument, "tick and time scale must be positive");
}

SessionRunner::~SessionRunner() { stop(); }

void SessionRunner::start() {
  if (running_.exchange(true)) return;
  thread_ = std::thread([this] {
    const auto period = std::chrono::duration<double, std::milli>(tick_ms_ / time_scale_);
    auto next = std::chrono::steady_clock::now();
    while (running_) {
      session_->tick(tick_ms_);
      next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
      std::this_thread::sleep_until(next);
    }
  });
}

void SessionRunner::stop() {
  running_ = false;
  if (thread_.joinable()) thread_.join();
}

std::pair<std::string, int> parse_bind_address(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorKind::InvalidArgument, "bind address must be host:port, got '" + bind + "'");
  std::string host = bind.substr(0, colon);
  const std::string port_text = bind.substr(colon + 1);
  int port = -1;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    if (used != port_text.size()) port = -1;
  } catch (const std::exception&) {
    port = -1;
  }
  if (port < 0 || port > 65535) throw Error(ErrorKind::InvalidArgument, "invalid port in bind address '" + bind + "'");
  if (host.empty()) host = "127.0.0.1";
  return {host, port};
}

SessionService::SessionService(std::shared_ptr<Session> session)
    : session_(std::move(session)), server_(std::make_unique<httplib::Server>()) {}

SessionService::~SessionService() { stop(); }

namespace {

void json_reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump() + "\n", "application/json");
}

}  // namespace

int SessionService::start(const std::string& bind) {
  const auto [host, port] = parse_bind_address(bind);
  auto& srv = *server_;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  // The library default also sets SO_REUSEPORT, which would let a second
  // service share the port instead of failing to bind.
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });

  srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  srv.Get("/health", [](const httplib::Request&, httplib::Response& res) { json_reply(res, 200, {{"ok", true}}); });

  srv.Get("/state", [this](const httplib::Request&, httplib::Response& res) {
    json_reply(res, 200, session_->snapshot());
  });

  srv.Get("/chain", [this](const httplib::Request&, httplib::Response& res) {
    const auto& kb = *session_->scenario().kb;
    json_reply(res, 200, {{"schema_version", 1}, {"chain", chain_to_json(kb.model)}, {"limits", limits_to_json(kb.limits)}});
  });

  srv.Post("/command", [this](const httplib::Request& req, httplib::Response& res) {
    std::string error;
    std::optional<Command> cmd;
    const bool is_json = req.get_header_value("Content-Type").find("json") != std::string::npos ||
                         (!req.body.empty() && req.body.front() == '{');
    if (is_json) {
      try {
        cmd = command_from_json(nlohmann::json::parse(req.body), &error);
      } catch (const nlohmann::json::exception& e) {
        error = std::string("malformed JSON: ") + e.what();
      }
    } else {
      cmd = parse_command(req.body, &error);
    }
    if (!cmd) {
      json_reply(res, 400, {{"accepted", false}, {"error", error}});
      return;
    }
    session_->submit(*cmd);
    json_reply(res, 202, {{"accepted", true}, {"command", to_json(*cmd)}});
  });

  srv.Get("/events", [this](const httplib::Request& req, httplib::Response& res) {
    const bool follow = req.get_param_value("follow") != "0";
    std::uint64_t cursor = 0;
    std::string head;
    if (req.has_param("since")) {
      try {
        cursor = std::stoull(req.get_param_value("since"));
      } catch (const std::exception&) {
        json_reply(res, 400, {{"error", "since must be an event sequence number"}});
        return;
      }
    } else {
      auto snap = session_->snapshot();
      cursor = snap["last_seq"].get<std::uint64_t>();
      Event e{cursor, snap["clock_ms"].get<double>(), "snapshot", std::move(snap)};
      head = e.to_line() + "\n";
    }
    if (!follow) {
      res.set_content(head + to_ndjson(session_->events().since(cursor)), "application/x-ndjson");
      return;
    }
    auto state = std::make_shared<std::pair<std::uint64_t, std::string>>(cursor, std::move(head));
    res.set_chunked_content_provider("application/x-ndjson", [this, state](std::size_t, httplib::DataSink& sink) {
      if (!state->second.empty()) {
        if (!sink.write(state->second.data(), state->second.size())) return false;
        state->second.clear();
      }
      if (stopping_) {
        sink.done();
        return true;
      }
      session_->events().wait_for(state->first, std::chrono::milliseconds(200));
      const auto fresh = session_->events().since(state->first);
      if (!fresh.empty()) {
        const auto text = to_ndjson(fresh);
        if (!sink.write(text.data(), text.size())) return false;
        state->first = fresh.back().seq;
      }
      return sink.is_writable();
    });
  });

  if (port == 0) {
    port_ = srv.bind_to_any_port(host);
    if (port_ <= 0) throw Error(ErrorKind::Io, "cannot bind " + host + " on any port");
  } else {
    if (!srv.bind_to_port(host, port)) throw Error(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
    port_ = port;
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  // A stop() issued before the listener runs would otherwise be lost.
  server_->wait_until_ready();
  return port_;
}

void SessionService::stop() {
  stopping_ = true;
  session_->events().notify_all();
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace gems
