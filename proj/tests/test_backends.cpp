#include <doctest.h>

#include <random>

#include "adp/backends.hpp"
#include "adp/digest.hpp"
#include "adp/io.hpp"
#include "support.hpp"

using namespace adp;
using testsupport::fixture;

namespace {

SCSignature sig(std::initializer_list<std::pair<Eigen::Index, double>> e, Eigen::Index len = 400) {
  SCSignature s;
  s.profile_len = len;
  for (auto [i, a] : e) s.entries.push_back({i, a});
  return s;
}

Prototype proto(const std::string& cls, Eigen::Index id, SCSignature s) {
  Prototype p;
  p.class_label = cls;
  p.cluster_id = id;
  p.member_count = 1;
  p.signature = std::move(s);
  return p;
}

// Replays a fixed list of statuses, then answers 200 forever.
class ScriptedTransport final : public ChatTransport {
 public:
  explicit ScriptedTransport(std::vector<int> statuses, std::string answer = "Predicted Target Class: b")
      : statuses_(std::move(statuses)), answer_(std::move(answer)) {}
  HttpResponse post(const std::string&, const std::vector<std::pair<std::string, std::string>>& headers,
                    const std::string& body) override {
    std::lock_guard lock(m_);
    last_headers = headers;
    last_body = body;
    times.push_back(std::chrono::steady_clock::now());
    const std::size_t i = calls++;
    const int status = i < statuses_.size() ? statuses_[i] : 200;
    if (status != 200) return {status, "{}", {}};
    const nlohmann::json out = {{"choices", {{{"message", {{"content", answer_}}}}}}};
    return {200, out.dump(), {}};
  }
  std::size_t calls = 0;
  std::vector<std::chrono::steady_clock::time_point> times;
  std::vector<std::pair<std::string, std::string>> last_headers;
  std::string last_body;

 private:
  std::mutex m_;
  std::vector<int> statuses_;
  std::string answer_;
};

class SlowTransport final : public ChatTransport {
 public:
  HttpResponse post(const std::string&, const std::vector<std::pair<std::string, std::string>>&,
                    const std::string&) override {
    const int now = ++in_flight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --in_flight;
    const nlohmann::json out = {{"choices", {{{"message", {{"content", "Predicted Target Class: a"}}}}}}};
    return {200, out.dump(), {}};
  }
  std::atomic<int> in_flight{0}, peak{0};
};

BackendConfig test_config(const std::filesystem::path& cache) {
  BackendConfig cfg;
  cfg.kind = BackendKind::remote;
  cfg.endpoint_url = "http://127.0.0.1:9/v1/chat/completions";
  cfg.api_key_env = "";
  cfg.backoff_base_s = 0.01;
  cfg.cache_dir = cache;
  return cfg;
}

TaskContext ab_ctx() {
  TaskContext ctx;
  ctx.candidate_classes = {"a", "b"};
  ctx.profile_len = 400;
  return ctx;
}

}  // namespace

TEST_CASE("sha256 test vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("surrogate score examples") {
  const MatchParams mp;
  CHECK(mp.position_tol == 5);
  CHECK(mp.unmatched_penalty == 0.1);
  const auto q = sig({{100, 1.0}, {150, 0.7}, {190, 0.3}});
  CHECK(surrogate_score(q, q, mp) == doctest::Approx(2.0));
  CHECK(surrogate_score(q, sig({{10, 1.0}, {40, 0.2}}), mp) == doctest::Approx(-0.5));
  CHECK(surrogate_score(sig({{100, 1.0}, {110, 0.5}}), sig({{102, 0.9}, {200, 0.4}}), mp) == doctest::Approx(0.7));
  CHECK(surrogate_score(sig({}), sig({}), mp) == 0.0);
}

TEST_CASE("one-directional greedy matching") {
  const MatchParams mp;
  const auto a = sig({{100, 1.0}, {104, 0.9}});
  const auto b = sig({{103, 1.0}, {108, 0.5}});
  // a->b: 100 takes 103, 104 takes 108. b->a: 103 takes 104, 108 finds nothing.
  CHECK(greedy_match_score(a, b, mp) == doctest::Approx(1.5));
  CHECK(greedy_match_score(b, a, mp) == doctest::Approx(0.7));
  CHECK(surrogate_score(a, b, mp) == doctest::Approx(1.1));
}

TEST_CASE("surrogate score is symmetric") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> cell(0, 80);
  std::uniform_real_distribution<double> amp(0.1, 1.0);
  const MatchParams mp;
  for (int t = 0; t < 500; ++t) {
    SCSignature a, b;
    const int n = 1 + t % 6;
    for (int i = 0; i < n; ++i) a.entries.push_back({cell(rng), amp(rng)});
    for (int i = 0; i < n + t % 2; ++i) b.entries.push_back({cell(rng), amp(rng)});
    CHECK(surrogate_score(a, b, mp) == surrogate_score(b, a, mp));
  }
}

TEST_CASE("reference query against the reference prototypes") {
  const auto protos = load_prototypes(fixture("reference_prototypes.jsonl"));
  const auto q = signature_from_json(nlohmann::json::parse(testsupport::read_text(fixture("reference_query.json"))));
  const MatchParams mp;
  // hand enumeration of both greedy directions, averaged
  CHECK(surrogate_score(q, protos[0].signature, mp) == doctest::Approx(1.321).epsilon(1e-9));
  CHECK(surrogate_score(q, protos[1].signature, mp) == doctest::Approx((1.448 + 0.794) / 2).epsilon(1e-9));
  CHECK(surrogate_score(q, protos[2].signature, mp) == doctest::Approx((1.777 + 2.003) / 2).epsilon(1e-9));
  TaskContext ctx;
  ctx.candidate_classes = {"an26", "citation", "yark42"};
  ctx.profile_len = 1080;
  CHECK(classify_surrogate(q, protos, mp, ctx).predicted == "yark42");
}

TEST_CASE("classify_surrogate rules") {
  const auto ctx = ab_ctx();
  const MatchParams mp;
  const auto p1 = sig({{100, 1.0}, {150, 0.5}});
  const auto p2 = sig({{200, 1.0}, {260, 0.4}});
  const auto p3 = sig({{300, 1.0}, {350, 0.8}});
  CHECK(classify_surrogate(p3, {proto("b", 0, p1)}, mp, ctx).predicted == "b");
  const std::vector<Prototype> ps = {proto("a", 0, p1), proto("b", 0, p2), proto("a", 1, p3)};
  CHECK(classify_surrogate(p1, ps, mp, ctx).predicted == "a");
  CHECK(classify_surrogate(p2, ps, mp, ctx).predicted == "b");
  CHECK(classify_surrogate(p3, ps, mp, ctx).predicted == "a");
  // a tie goes to the earlier candidate class
  const std::vector<Prototype> tie = {proto("b", 0, p1), proto("a", 0, p1)};
  CHECK(classify_surrogate(p1, tie, mp, ctx).predicted == "a");
  const auto v = classify_surrogate(p1, ps, mp, ctx);
  CHECK(v.rationale.find("a") != std::string::npos);
  CHECK(classify_surrogate(p1, ps, mp, ctx).predicted == v.predicted);
}

TEST_CASE("chat wire format") {
  BackendConfig cfg;
  cfg.model_name = "m1";
  cfg.temperature = 0.0;
  const auto body = nlohmann::json::parse(build_chat_request("hello", cfg));
  CHECK(body["model"] == "m1");
  CHECK(body["temperature"] == 0.0);
  CHECK(body["messages"].size() == 1);
  CHECK(body["messages"][0]["role"] == "user");
  CHECK(body["messages"][0]["content"] == "hello");
  CHECK(extract_chat_content(R"({"choices":[{"message":{"content":"x"}}]})") == "x");
  CHECK_THROWS_AS(extract_chat_content("not json"), BackendUnavailable);
  CHECK_THROWS_AS(extract_chat_content(R"({"choices":[]})"), BackendUnavailable);
}

TEST_CASE("response cache layout") {
  testsupport::ScratchDir dir("cache");
  ResponseCache cache(dir.path);
  const auto key = ResponseCache::key("prompt text", "model-x");
  CHECK(key == sha256_hex("prompt textmodel-x"));
  CHECK_FALSE(cache.load(key).has_value());
  cache.store(key, {sha256_hex("prompt text"), "model-x", "Predicted Target Class: a", "2026-01-01T00:00:00Z"});
  const auto hit = cache.load(key);
  REQUIRE(hit);
  CHECK(hit->response == "Predicted Target Class: a");
  const auto j = nlohmann::json::parse(testsupport::read_text(cache.path_for(key)));
  for (const char* field : {"prompt_sha", "model", "response", "timestamp"}) CHECK(j.contains(field));
  CHECK(j["prompt_sha"] == sha256_hex("prompt text"));
}

TEST_CASE("remote retry policy") {
  testsupport::ScratchDir dir("retry");
  SUBCASE("429 then 200") {
    auto t = std::make_shared<ScriptedTransport>(std::vector<int>{429});
    RemoteClassifier rc(test_config(dir.path), t);
    CHECK(rc.complete("p1") == "Predicted Target Class: b");
    CHECK(t->calls == 2);
    CHECK(rc.network_requests() == 2);
    CHECK(std::chrono::duration<double>(t->times[1] - t->times[0]).count() >= 0.01);
  }
  SUBCASE("exhausted") {
    auto t = std::make_shared<ScriptedTransport>(std::vector<int>{500, 503, 502, 500, 500});
    RemoteClassifier rc(test_config(dir.path), t);
    CHECK_THROWS_AS(rc.complete("p2"), BackendUnavailable);
    CHECK(t->calls == 4);
  }
  SUBCASE("client errors are not retried") {
    auto t = std::make_shared<ScriptedTransport>(std::vector<int>{400});
    RemoteClassifier rc(test_config(dir.path), t);
    CHECK_THROWS_AS(rc.complete("p3"), BackendUnavailable);
    CHECK(t->calls == 1);
  }
  SUBCASE("cache hit skips the network") {
    auto t = std::make_shared<ScriptedTransport>(std::vector<int>{});
    RemoteClassifier rc(test_config(dir.path), t);
    const auto first = rc.complete("p4");
    const auto second = rc.complete("p4");
    CHECK(first == second);
    CHECK(t->calls == 1);
  }
  SUBCASE("replay needs a cached answer") {
    auto cfg = test_config(dir.path);
    cfg.kind = BackendKind::replay;
    auto t = std::make_shared<ScriptedTransport>(std::vector<int>{});
    RemoteClassifier rc(cfg, t);
    CHECK_THROWS_AS(rc.complete("never seen"), BackendUnavailable);
    CHECK(t->calls == 0);
  }
  SUBCASE("api key comes from the environment") {
    auto cfg = test_config(dir.path);
    cfg.api_key_env = "ADP_TEST_KEY_UNSET_VARIABLE";
    ::unsetenv("ADP_TEST_KEY_UNSET_VARIABLE");
    auto t = std::make_shared<ScriptedTransport>(std::vector<int>{});
    RemoteClassifier rc(cfg, t);
    CHECK_THROWS_AS(rc.complete("p5"), BackendUnavailable);
    ::setenv("ADP_TEST_KEY_UNSET_VARIABLE", "sk-test", 1);
    CHECK_NOTHROW(rc.complete("p5"));
    REQUIRE(t->last_headers.size() == 1);
    CHECK(t->last_headers[0].second == "Bearer sk-test");
    ::unsetenv("ADP_TEST_KEY_UNSET_VARIABLE");
  }
}

TEST_CASE("remote classify outcomes") {
  testsupport::ScratchDir dir("outcomes");
  const auto ctx = ab_ctx();
  std::vector<PromptDocument> docs(3);
  for (int i = 0; i < 3; ++i) docs[i].text = "prompt " + std::to_string(i);
  std::vector<QueryJob> jobs;
  for (auto& d : docs) jobs.push_back({&d, nullptr, nullptr});

  SUBCASE("unparseable answer is an abstention, not a backend failure") {
    auto t = std::make_shared<ScriptedTransport>(std::vector<int>{}, "no clue");
    RemoteClassifier rc(test_config(dir.path), t);
    for (const auto& o : rc.classify(jobs, ctx)) {
      CHECK(o.abstained());
      CHECK_FALSE(o.backend_failure);
    }
  }
  SUBCASE("dead backend marks backend failures") {
    auto t = std::make_shared<ScriptedTransport>(std::vector<int>(100, 503));
    auto cfg = test_config(dir.path);
    cfg.max_retries = 1;
    cfg.backoff_base_s = 0.001;
    RemoteClassifier rc(cfg, t);
    for (const auto& o : rc.classify(jobs, ctx)) {
      CHECK(o.abstained());
      CHECK(o.backend_failure);
    }
  }
  SUBCASE("answers align with jobs") {
    auto t = std::make_shared<ScriptedTransport>(std::vector<int>{});
    RemoteClassifier rc(test_config(dir.path), t);
    const auto out = rc.classify(jobs, ctx);
    REQUIRE(out.size() == 3);
    for (const auto& o : out) CHECK(o.verdict->predicted == "b");
  }
}

TEST_CASE("in-flight requests stay under the limit") {
  testsupport::ScratchDir dir("gate");
  auto t = std::make_shared<SlowTransport>();
  auto cfg = test_config(dir.path);
  cfg.concurrency_limit = 3;
  RemoteClassifier rc(cfg, t);
  std::vector<PromptDocument> docs(24);
  std::vector<QueryJob> jobs;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    docs[i].text = "q" + std::to_string(i);
    jobs.push_back({&docs[i], nullptr, nullptr});
  }
  const auto out = rc.classify(jobs, ab_ctx());
  CHECK(out.size() == 24);
  CHECK(t->peak.load() <= 3);
  CHECK(t->peak.load() >= 2);
}

TEST_CASE("http transport against a local endpoint") {
  testsupport::FakeChatServer server([](std::size_t call, const std::string&) -> std::pair<int, std::string> {
    if (call == 0) return {429, ""};
    return {200, "Predicted Target Class: a"};
  });
  testsupport::ScratchDir dir("http");
  auto cfg = test_config(dir.path);
  cfg.endpoint_url = server.url();
  RemoteClassifier rc(cfg);
  CHECK(rc.complete("hello") == "Predicted Target Class: a");
  CHECK(server.calls() == 2);

  HttpTransport raw;
  CHECK(raw.post("not a url", {}, "{}").status == 0);
}

TEST_CASE("backend config") {
  BackendConfig cfg;
  CHECK(cfg.kind == BackendKind::surrogate);
  CHECK(cfg.temperature == 0.0);
  CHECK(cfg.max_retries == 3);
  CHECK(cfg.backoff_base_s == 1.0);
  CHECK(cfg.concurrency_limit == 4);
  cfg.temperature = -1;
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
  cfg.temperature = 0;
  cfg.concurrency_limit = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
  CHECK(parse_backend_kind("replay") == BackendKind::replay);
  CHECK_THROWS_AS(parse_backend_kind("local"), InvalidParameter);
  CHECK(make_classifier(BackendConfig{})->name() == "surrogate");
}
