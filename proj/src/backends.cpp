#include "adp/backends.hpp"

#include <unistd.h>

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <thread>

#include "adp/digest.hpp"

namespace adp {

using nlohmann::json;

std::string to_string(BackendKind k) {
  switch (k) {
    case BackendKind::remote: return "remote";
    case BackendKind::surrogate: return "surrogate";
    case BackendKind::replay: return "replay";
  }
  return "?";
}

BackendKind parse_backend_kind(const std::string& s) {
  if (s == "remote") return BackendKind::remote;
  if (s == "surrogate") return BackendKind::surrogate;
  if (s == "replay") return BackendKind::replay;
  throw InvalidParameter("unknown backend '" + s + "'");
}

void BackendConfig::validate() const {
  if (!(temperature >= 0.0)) throw InvalidParameter("temperature must be >= 0");
  if (concurrency_limit < 1) throw InvalidParameter("concurrency_limit must be >= 1");
  if (max_retries < 0) throw InvalidParameter("max_retries must be >= 0");
  if (!(backoff_base_s >= 0.0)) throw InvalidParameter("backoff_base_s must be >= 0");
}

void MatchParams::validate() const {
  if (position_tol < 0) throw InvalidParameter("position_tol must be >= 0");
  if (!(unmatched_penalty >= 0.0)) throw InvalidParameter("unmatched_penalty must be >= 0");
}

double greedy_match_score(const SCSignature& from, const SCSignature& to, const MatchParams& mp) {
  std::vector<std::size_t> order(from.entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return from.entries[a].amplitude > from.entries[b].amplitude;
  });

  std::vector<bool> used(to.entries.size(), false);
  double score = 0.0;
  std::size_t matched = 0;
  for (auto i : order) {
    const auto& q = from.entries[i];
    std::optional<std::size_t> best;
    Eigen::Index best_d = 0;
    for (std::size_t j = 0; j < to.entries.size(); ++j) {
      if (used[j]) continue;
      const Eigen::Index d = std::abs(to.entries[j].range_index - q.range_index);
      if (d > mp.position_tol) continue;
      if (!best || d < best_d) {
        best = j;
        best_d = d;
      }
    }
    if (best) {
      used[*best] = true;
      ++matched;
      score += std::min(q.amplitude, to.entries[*best].amplitude);
    }
  }
  const auto unmatched = (from.entries.size() - matched) + (to.entries.size() - matched);
  return score - mp.unmatched_penalty * static_cast<double>(unmatched);
}

double surrogate_score(const SCSignature& query, const SCSignature& proto, const MatchParams& mp) {
  return 0.5 * (greedy_match_score(query, proto, mp) + greedy_match_score(proto, query, mp));
}

Verdict classify_surrogate(const SCSignature& query, const std::vector<Prototype>& prototypes,
                           const MatchParams& mp, const TaskContext& ctx) {
  if (prototypes.empty()) throw InvalidParameter("no prototypes to match against");
  auto rank = [&](const std::string& label) {
    const auto it = std::find(ctx.candidate_classes.begin(), ctx.candidate_classes.end(), label);
    return static_cast<std::size_t>(it - ctx.candidate_classes.begin());
  };

  std::size_t best = 0;
  std::vector<double> scores(prototypes.size());
  for (std::size_t i = 0; i < prototypes.size(); ++i) {
    scores[i] = surrogate_score(query, prototypes[i].signature, mp);
    if (i == 0) continue;
    const auto& a = prototypes[i];
    const auto& b = prototypes[best];
    if (scores[i] > scores[best] ||
        (scores[i] == scores[best] &&
         (rank(a.class_label) < rank(b.class_label) ||
          (rank(a.class_label) == rank(b.class_label) && a.cluster_id < b.cluster_id))))
      best = i;
  }

  Verdict v;
  v.predicted = prototypes[best].class_label;
  std::ostringstream table;
  table << "class\tcluster\tscore\n";
  for (std::size_t i = 0; i < prototypes.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", scores[i]);
    table << prototypes[i].class_label << '\t' << prototypes[i].cluster_id << '\t' << buf << '\n';
  }
  v.rationale = table.str();
  v.raw = "Predicted Target Class: " + v.predicted + "\n" + v.rationale;
  return v;
}

std::vector<QueryOutcome> SurrogateClassifier::classify(const std::vector<QueryJob>& jobs,
                                                        const TaskContext& ctx) {
  std::vector<QueryOutcome> out(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    try {
      out[i].verdict = classify_surrogate(*jobs[i].query, *jobs[i].prototypes, mp_, ctx);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string ResponseCache::key(const std::string& prompt_text, const std::string& model) {
  return sha256_hex(prompt_text + model);
}

std::optional<CacheEntry> ResponseCache::load(const std::string& key) const {
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return std::nullopt;
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("response")) return std::nullopt;
  return CacheEntry{j.value("prompt_sha", ""), j.value("model", ""), j.at("response").get<std::string>(),
                    j.value("timestamp", "")};
}

void ResponseCache::store(const std::string& key, const CacheEntry& entry) const {
  std::filesystem::create_directories(dir_);
  const json j = {{"prompt_sha", entry.prompt_sha},
                  {"model", entry.model},
                  {"response", entry.response},
                  {"timestamp", entry.timestamp}};
  static std::atomic<unsigned> counter{0};
  const auto tmp = dir_ / (key + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++) + "." +
                           std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path_for(key));
}

// ---------------------------------------------------------------------------

HttpResponse HttpTransport::post(const std::string& url,
                                 const std::vector<std::pair<std::string, std::string>>& headers,
                                 const std::string& body) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) return {0, {}, "malformed endpoint url '" + url + "'"};
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  client.set_connection_timeout(10);
  client.set_read_timeout(300);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(path, h, body, "application/json");
  if (!res) return {0, {}, httplib::to_string(res.error())};
  return {res->status, res->body, {}};
}

std::string build_chat_request(const std::string& prompt_text, const BackendConfig& cfg) {
  const json j = {{"model", cfg.model_name},
                  {"messages", json::array({{{"role", "user"}, {"content", prompt_text}}})},
                  {"temperature", cfg.temperature}};
  return j.dump();
}

std::string extract_chat_content(const std::string& body) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw BackendUnavailable("response is not JSON");
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendUnavailable(std::string("unexpected response shape: ") + e.what());
  }
}

void ConcurrencyGate::acquire() {
  std::unique_lock lock(m_);
  cv_.wait(lock, [&] { return free_ > 0; });
  --free_;
}

void ConcurrencyGate::release() {
  {
    std::lock_guard lock(m_);
    ++free_;
  }
  cv_.notify_one();
}

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RemoteClassifier::RemoteClassifier(BackendConfig cfg, std::shared_ptr<ChatTransport> transport)
    : cfg_(std::move(cfg)),
      transport_(transport ? std::move(transport) : std::make_shared<HttpTransport>()),
      cache_(cfg_.cache_dir),
      gate_(cfg_.concurrency_limit) {
  cfg_.validate();
}

std::size_t RemoteClassifier::network_requests() const {
  std::lock_guard lock(stats_m_);
  return requests_;
}

std::string RemoteClassifier::request_with_retry(const std::string& prompt_text) {
  std::vector<std::pair<std::string, std::string>> headers;
  if (!cfg_.api_key_env.empty()) {
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (!key || !*key)
      throw BackendUnavailable("environment variable " + cfg_.api_key_env + " is not set");
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  const auto body = build_chat_request(prompt_text, cfg_);

  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double wait = cfg_.backoff_base_s * std::pow(2.0, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
    HttpResponse res;
    gate_.acquire();
    try {
      {
        std::lock_guard lock(stats_m_);
        ++requests_;
      }
      res = transport_->post(cfg_.endpoint_url, headers, body);
    } catch (const std::exception& e) {
      res = {0, {}, e.what()};
    }
    gate_.release();

    if (res.status == 200) return extract_chat_content(res.body);
    const bool retryable = res.status == 0 || res.status == 429 || res.status >= 500;
    last_error = res.status == 0 ? "transport error: " + res.error
                                 : "HTTP " + std::to_string(res.status);
    if (!retryable) break;
  }
  throw BackendUnavailable("request failed after retries: " + last_error);
}

std::string RemoteClassifier::complete(const std::string& prompt_text) {
  const auto key = ResponseCache::key(prompt_text, cfg_.model_name);
  if (auto hit = cache_.load(key)) return hit->response;
  if (cfg_.kind == BackendKind::replay)
    throw BackendUnavailable("no cached response for prompt " + key.substr(0, 12));
  auto response = request_with_retry(prompt_text);
  cache_.store(key, {sha256_hex(prompt_text), cfg_.model_name, response, utc_timestamp()});
  return response;
}

Verdict classify_remote(const PromptDocument& prompt, RemoteClassifier& backend, const TaskContext& ctx) {
  return parse_verdict(backend.complete(prompt.text), ctx);
}

std::vector<QueryOutcome> RemoteClassifier::classify(const std::vector<QueryJob>& jobs,
                                                     const TaskContext& ctx) {
  std::vector<QueryOutcome> out(jobs.size());
  auto work = [&](std::size_t i) {
    try {
      out[i].verdict = classify_remote(*jobs[i].prompt, *this, ctx);
    } catch (const UnparseableVerdict& e) {
      out[i].error = e.what();
    } catch (const std::exception& e) {
      out[i].error = e.what();
      out[i].backend_failure = true;
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(cfg_.concurrency_limit), jobs.size());
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) work(i);
      });
  }
  return out;
}

std::unique_ptr<Classifier> make_classifier(const BackendConfig& cfg, const MatchParams& mp) {
  cfg.validate();
  if (cfg.kind == BackendKind::surrogate) return std::make_unique<SurrogateClassifier>(mp);
  return std::make_unique<RemoteClassifier>(cfg);
}

}  // namespace adp
