#include "core/model_client.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "core/json_util.hpp"
#include "core/types.hpp"

namespace gems {

nlohmann::json to_json(const std::vector<TranscriptEntry>& t) {
  nlohmann::json calls = nlohmann::json::array();
  for (const auto& e : t) {
    calls.push_back({{"stage", e.stage},
                     {"condition", e.condition},
                     {"system", e.system},
                     {"user", e.user},
                     {"response", e.response}});
  }
  return {{"schema_version", 1}, {"calls", calls}};
}

std::vector<TranscriptEntry> transcript_from_json(const nlohmann::json& j) {
  json_util::check_schema_version(j, 1, "transcript");
  const auto& calls = json_util::require(j, "calls", "transcript");
  if (!calls.is_array()) throw Error(ErrorKind::Schema, "transcript.calls: expected an array");
  std::vector<TranscriptEntry> out;
  for (std::size_t i = 0; i < calls.size(); ++i) {
    const std::string w = "transcript.calls[" + std::to_string(i) + "]";
    out.push_back({json_util::get_string(calls[i], "stage", w), json_util::get_string(calls[i], "condition", w),
                   json_util::get_string(calls[i], "system", w), json_util::get_string(calls[i], "user", w),
                   json_util::get_string(calls[i], "response", w)});
  }
  return out;
}

std::unique_ptr<MockClient> MockClient::from_file(const std::filesystem::path& path) {
  return from_json(json_util::parse_file(path), path.string());
}

std::unique_ptr<MockClient> MockClient::from_json(const nlohmann::json& doc, const std::string& where) {
  json_util::check_schema_version(doc, 1, where);
  const std::string scenario = json_util::get_string_or(doc, "scenario", where, "*");
  const auto& list = json_util::require(doc, "responses", where);
  if (!list.is_array()) throw Error(ErrorKind::Schema, where + ": 'responses' must be an array");
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string w = where + ": responses[" + std::to_string(i) + "]";
    Entry e;
    e.scenario = json_util::get_string_or(list[i], "scenario", w, scenario);
    e.stage = json_util::get_string(list[i], "stage", w);
    e.condition = json_util::get_string_or(list[i], "condition", w, "*");
    e.prompt_contains = json_util::get_string_or(list[i], "prompt_contains", w, "");
    const auto& text = json_util::require(list[i], "text", w);
    if (text.is_array()) {
      // Multi-line responses may be written as an array of lines.
      for (const auto& line : text) {
        if (!line.is_string()) throw Error(ErrorKind::Schema, w + ".text: expected strings");
        e.text += line.get<std::string>() + "\n";
      }
    } else if (text.is_string()) {
      e.text = text.get<std::string>();
    } else {
      throw Error(ErrorKind::Schema, w + ".text: expected a string or array of strings");
    }
    entries.push_back(std::move(e));
  }
  return std::make_unique<MockClient>(std::move(entries));
}

std::string MockClient::complete(const ModelRequest& req) {
  const Entry* best = nullptr;
  int best_score = -1;
  for (const auto& e : entries_) {
    if (e.stage != req.stage) continue;
    if (e.scenario != "*" && e.scenario != req.scenario) continue;
    if (e.condition != "*" && e.condition != req.condition) continue;
    if (!e.prompt_contains.empty() && req.user.find(e.prompt_contains) == std::string::npos) continue;
    const int score = (e.scenario != "*" ? 1 : 0) + (e.condition != "*" ? 2 : 0) + (e.prompt_contains.empty() ? 0 : 4);
    if (score > best_score) {
      best = &e;
      best_score = score;
    }
  }
  if (!best || best->text.find_first_not_of(" \t\r\n") == std::string::npos)
    throw Error(ErrorKind::EmptyResponse, "mock script has no response for scenario '" + req.scenario +
                                              "', stage '" + req.stage + "', condition '" + req.condition + "'");
  return best->text;
}

std::string ReplayClient::complete(const ModelRequest& req) {
  std::lock_guard lock(mu_);
  if (next_ >= transcript_.size())
    throw Error(ErrorKind::EmptyResponse, "replay transcript exhausted at call " + std::to_string(next_ + 1));
  const auto& e = transcript_[next_];
  if (e.stage != req.stage || e.system != req.system || e.user != req.user)
    throw Error(ErrorKind::Transport, "replay diverged at call " + std::to_string(next_ + 1) + " (stage '" +
                                          req.stage + "', recorded '" + e.stage + "')");
  ++next_;
  return e.response;
}

HttpModelClient::HttpModelClient(HttpClientConfig cfg) : cfg_(std::move(cfg)) {
  const auto scheme_end = cfg_.base_url.find("://");
  if (scheme_end == std::string::npos)
    throw Error(ErrorKind::InvalidArgument, "base URL needs a scheme: '" + cfg_.base_url + "'");
  const auto path_start = cfg_.base_url.find('/', scheme_end + 3);
  origin_ = cfg_.base_url.substr(0, path_start);
  prefix_ = path_start == std::string::npos ? "" : cfg_.base_url.substr(path_start);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

std::string HttpModelClient::complete(const ModelRequest& req) {
  httplib::Client cli(origin_);
  cli.set_connection_timeout(std::chrono::milliseconds(cfg_.connect_timeout_ms));
  cli.set_read_timeout(std::chrono::milliseconds(cfg_.read_timeout_ms));
  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  nlohmann::json messages = nlohmann::json::array();
  if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
  messages.push_back({{"role", "user"}, {"content", req.user}});
  const nlohmann::json body{{"model", cfg_.model}, {"messages", messages}, {"temperature", cfg_.temperature}};
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(200 * attempt));
    auto res = cli.Post(prefix_ + "/chat/completions", headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw Error(ErrorKind::Transport, req.stage + ": HTTP " + std::to_string(res->status) + ": " + res->body);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Transport, req.stage + ": malformed response body: " + e.what());
    }
    std::string text;
    if (doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
      const auto& msg = doc["choices"][0].value("message", nlohmann::json::object());
      if (msg.contains("content") && msg["content"].is_string()) text = msg["content"].get<std::string>();
    }
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
      throw Error(ErrorKind::EmptyResponse, req.stage + ": model returned no content");
    return text;
  }
  throw Error(ErrorKind::Transport, req.stage + ": " + last_error + " after " + std::to_string(cfg_.retries + 1) +
                                        " attempt(s) to " + origin_);
}

}  // namespace gems
