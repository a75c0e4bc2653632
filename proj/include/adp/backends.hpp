#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "adp/prompting.hpp"

namespace adp {

enum class BackendKind { remote, surrogate, replay };

std::string to_string(BackendKind k);
BackendKind parse_backend_kind(const std::string& s);

struct BackendConfig {
  BackendKind kind = BackendKind::surrogate;
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string model_name = "gpt-4.1";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 0.0;
  int max_retries = 3;
  double backoff_base_s = 1.0;
  int concurrency_limit = 4;
  std::filesystem::path cache_dir = "adp_cache";

  void validate() const;
};

struct MatchParams {
  Eigen::Index position_tol = 5;
  double unmatched_penalty = 0.1;

  void validate() const;
};

/// Walks `from` in descending amplitude; each entry claims the nearest unused
/// entry of `to` within position_tol and adds min(amplitudes). Every entry
/// left unmatched on either side costs unmatched_penalty.
double greedy_match_score(const SCSignature& from, const SCSignature& to, const MatchParams& mp);

/// Mean of the two directional greedy scores, so it is symmetric.
double surrogate_score(const SCSignature& query, const SCSignature& proto, const MatchParams& mp);

/// Class of the best-scoring prototype. Ties go to the earlier candidate
/// class, then the lower cluster id.
Verdict classify_surrogate(const SCSignature& query, const std::vector<Prototype>& prototypes,
                           const MatchParams& mp, const TaskContext& ctx);

/// Result of classifying one query. No verdict means an abstention.
struct QueryOutcome {
  std::optional<Verdict> verdict;
  std::string error;
  bool backend_failure = false;

  bool abstained() const { return !verdict.has_value(); }
};

struct QueryJob {
  const PromptDocument* prompt = nullptr;
  const SCSignature* query = nullptr;
  const std::vector<Prototype>* prototypes = nullptr;
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::string name() const = 0;
  /// Outcomes aligned with `jobs`. Never throws for per-query failures.
  virtual std::vector<QueryOutcome> classify(const std::vector<QueryJob>& jobs,
                                             const TaskContext& ctx) = 0;
};

class SurrogateClassifier final : public Classifier {
 public:
  explicit SurrogateClassifier(MatchParams mp = {}) : mp_(mp) {}
  std::string name() const override { return "surrogate"; }
  std::vector<QueryOutcome> classify(const std::vector<QueryJob>& jobs,
                                     const TaskContext& ctx) override;

 private:
  MatchParams mp_;
};

struct CacheEntry {
  std::string prompt_sha;
  std::string model;
  std::string response;
  std::string timestamp;
};

/// One JSON file per sha256(prompt text + model name). Writes go through a
/// temporary file and a rename.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  static std::string key(const std::string& prompt_text, const std::string& model);
  std::filesystem::path path_for(const std::string& key) const { return dir_ / (key + ".json"); }
  std::optional<CacheEntry> load(const std::string& key) const;
  void store(const std::string& key, const CacheEntry& entry) const;

 private:
  std::filesystem::path dir_;
};

struct HttpResponse {
  int status = 0;  // 0 = transport failure
  std::string body;
  std::string error;
};

/// Sends one JSON POST. Swappable so tests can script the endpoint.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual HttpResponse post(const std::string& url,
                            const std::vector<std::pair<std::string, std::string>>& headers,
                            const std::string& body) = 0;
};

/// cpp-httplib backed transport (http:// and https://).
class HttpTransport final : public ChatTransport {
 public:
  HttpResponse post(const std::string& url,
                    const std::vector<std::pair<std::string, std::string>>& headers,
                    const std::string& body) override;
};

std::string build_chat_request(const std::string& prompt_text, const BackendConfig& cfg);
/// choices[0].message.content of a chat-completion response body.
std::string extract_chat_content(const std::string& body);

/// Counting gate bounding concurrent requests.
class ConcurrencyGate {
 public:
  explicit ConcurrencyGate(int limit) : free_(limit) {}
  void acquire();
  void release();

 private:
  std::mutex m_;
  std::condition_variable cv_;
  int free_;
};

/// Remote chat-completion classifier with retry, bounded concurrency and a
/// replayable response cache. With kind == replay it never touches the network.
class RemoteClassifier final : public Classifier {
 public:
  RemoteClassifier(BackendConfig cfg, std::shared_ptr<ChatTransport> transport = nullptr);

  // Remote and replay share a name so replayed reports match the recorded ones.
  std::string name() const override { return "llm:" + cfg_.model_name; }
  std::vector<QueryOutcome> classify(const std::vector<QueryJob>& jobs,
                                     const TaskContext& ctx) override;

  /// Raw response text for one prompt (cache first, then network unless replaying).
  std::string complete(const std::string& prompt_text);
  std::size_t network_requests() const;

 private:
  std::string request_with_retry(const std::string& prompt_text);

  BackendConfig cfg_;
  std::shared_ptr<ChatTransport> transport_;
  ResponseCache cache_;
  ConcurrencyGate gate_;
  mutable std::mutex stats_m_;
  std::size_t requests_ = 0;
};

/// Verdict for one prompt through the remote backend. Throws BackendUnavailable
/// or UnparseableVerdict.
Verdict classify_remote(const PromptDocument& prompt, RemoteClassifier& backend, const TaskContext& ctx);

std::unique_ptr<Classifier> make_classifier(const BackendConfig& cfg, const MatchParams& mp = {});

}  // namespace adp
