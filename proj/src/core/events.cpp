#include "core/events.hpp"

namespace gems {

std::string Event::to_line() const {
  nlohmann::ordered_json j;
  j["v"] = kEventSchemaVersion;
  j["seq"] = seq;
  j["t_ms"] = t_ms;
  j["type"] = type;
  j["data"] = data;
  return j.dump();
}

std::uint64_t EventLog::append(std::string type, nlohmann::json data, double t_ms) {
  std::uint64_t seq;
  {
    std::lock_guard lock(mu_);
    seq = events_.size() + 1;
    events_.push_back(Event{seq, t_ms, std::move(type), std::move(data)});
  }
  cv_.notify_all();
  return seq;
}

std::vector<Event> EventLog::since(std::uint64_t after_seq) const {
  std::lock_guard lock(mu_);
  if (after_seq >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(after_seq), events_.end()};
}

bool EventLog::wait_for(std::uint64_t after_seq, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] { return events_.size() > after_seq; });
}

std::uint64_t EventLog::last_seq() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

std::string to_ndjson(const std::vector<Event>& events) {
  std::string out;
  for (const auto& e : events) {
    out += e.to_line();
    out += '\n';
  }
  return out;
}

}  // namespace gems
