#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace gems {

inline constexpr int kEventSchemaVersion = 1;

struct Event {
  std::uint64_t seq = 0;  // 1-based, dense
  double t_ms = 0.0;      // simulated session clock
  std::string type;
  nlohmann::json data;

  // {"v":1,"seq":..,"t_ms":..,"type":..,"data":..} on one line.
  std::string to_line() const;
};

// Append-only, readable from any thread while the session appends.
class EventLog {
 public:
  std::uint64_t append(std::string type, nlohmann::json data, double t_ms);
  std::vector<Event> since(std::uint64_t after_seq) const;
  // Blocks until an event newer than `after_seq` exists or the timeout ends.
  bool wait_for(std::uint64_t after_seq, std::chrono::milliseconds timeout) const;
  std::uint64_t last_seq() const;
  void notify_all() const { cv_.notify_all(); }

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::vector<Event> events_;
};

std::string to_ndjson(const std::vector<Event>& events);

}  // namespace gems
