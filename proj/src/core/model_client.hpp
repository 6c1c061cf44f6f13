#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace gems {

struct ModelRequest {
  std::string scenario;   // scenario id, used by the mock to pick a script
  std::string stage;      // tutorial | movements | stimulation | naive | checkpoint
  std::string condition;  // ablation condition name
  std::string system;
  std::string user;
};

struct TranscriptEntry {
  std::string stage;
  std::string condition;
  std::string system;
  std::string user;
  std::string response;

  bool operator==(const TranscriptEntry&) const = default;
};

nlohmann::json to_json(const std::vector<TranscriptEntry>& t);
std::vector<TranscriptEntry> transcript_from_json(const nlohmann::json& j);

class ModelClient {
 public:
  virtual ~ModelClient() = default;
  // Returns non-empty text or throws Transport / EmptyResponse.
  virtual std::string complete(const ModelRequest& req) = 0;
};

// Scripted responses keyed by (scenario, stage, condition). An entry may use
// "*" for scenario or condition and may require a substring of the user
// prompt. The most specific matching entry wins; ties go to file order.
class MockClient : public ModelClient {
 public:
  struct Entry {
    std::string scenario = "*";
    std::string stage;
    std::string condition = "*";
    std::string prompt_contains;
    std::string text;
  };

  explicit MockClient(std::vector<Entry> entries) : entries_(std::move(entries)) {}
  static std::unique_ptr<MockClient> from_file(const std::filesystem::path& path);
  static std::unique_ptr<MockClient> from_json(const nlohmann::json& doc, const std::string& where);

  std::string complete(const ModelRequest& req) override;

 private:
  std::vector<Entry> entries_;
};

// Answers from a recorded transcript, in order. Stage and prompts must match
// the recording.
class ReplayClient : public ModelClient {
 public:
  explicit ReplayClient(std::vector<TranscriptEntry> transcript) : transcript_(std::move(transcript)) {}
  std::string complete(const ModelRequest& req) override;

 private:
  std::mutex mu_;
  std::vector<TranscriptEntry> transcript_;
  std::size_t next_ = 0;
};

struct HttpClientConfig {
  std::string base_url;  // e.g. https://api.example.com/v1
  std::string model = "gpt-4.1";
  std::string api_key_env = "MODEL_API_KEY";
  int connect_timeout_ms = 10000;
  int read_timeout_ms = 120000;
  int retries = 2;
  double temperature = 0.0;
};

// Chat-completion style endpoint: POST {base_url}/chat/completions.
class HttpModelClient : public ModelClient {
 public:
  explicit HttpModelClient(HttpClientConfig cfg);
  std::string complete(const ModelRequest& req) override;

 private:
  HttpClientConfig cfg_;
  std::string origin_;  // scheme://host[:port]
  std::string prefix_;  // path below the origin, without trailing slash
};

}  // namespace gems
