#include <doctest.h>

#include <sstream>

#include "adp/cli.hpp"
#include "adp/io.hpp"
#include "support.hpp"

using namespace adp;
using testsupport::fixture;
using testsupport::read_text;
using testsupport::ScratchDir;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "adp");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<RangeProfile> tiny_dataset() {
  const RadarParamsd p = RadarParamsd::dft_aligned(400e6, 64);
  const std::vector<SyntheticClassSpec> specs = {
      {"a", {{0.0, {{10, {1.0, 0}}, {30, {0.5, 0}}}}}},
      {"b", {{0.0, {{20, {1.0, 0}}, {50, {0.7, 0}}}}}},
  };
  return generate_aspect_dataset(specs, {0.0, 15.0}, 3, p, 20.0, 4);
}

}  // namespace

TEST_CASE("dataset round trip is exact") {
  ScratchDir dir("roundtrip");
  auto data = tiny_dataset();
  data[0].values(3) = {1.0 / 3.0, -2e-17};
  const Provenance prov{"abc", 5, kToolVersion};
  write_dataset(dir / "d.jsonl", data, prov, true);
  const auto back = load_dataset(dir / "d.jsonl");
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back[i].magnitude == data[i].magnitude);
    CHECK(back[i].values == data[i].values);
    CHECK(back[i].label == data[i].label);
    CHECK(back[i].aspect_deg == data[i].aspect_deg);
    CHECK(back[i].source == data[i].source);
  }
  const auto first = nlohmann::json::parse(lines_of(read_text(dir / "d.jsonl")).front());
  CHECK(is_provenance_record(first));
  CHECK(first["provenance"]["config_digest"] == "abc");
  CHECK(first["provenance"]["seed"] == 5);
  CHECK(first["provenance"]["tool_version"] == kToolVersion);

  write_dataset(dir / "m.jsonl", data, prov, false);
  const auto mag_only = load_dataset(dir / "m.jsonl");
  CHECK(mag_only[0].magnitude == data[0].magnitude);
  CHECK(mag_only[0].values.size() == 0);
}

TEST_CASE("dataset schema checks") {
  ScratchDir dir("schema");
  const auto good = R"({"label":"a","aspect_deg":0,"cells":3,"magnitude":[0.1,0.2,0.3],"source":"synthetic"})";
  SUBCASE("valid records") {
    std::string text;
    for (int i = 0; i < 60; ++i) text += std::string(good) + "\n";
    CHECK(parse_dataset(text).size() == 60);
  }
  auto expect_line = [](const std::string& text, std::size_t line) {
    try {
      parse_dataset(text);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == line);
      CHECK(std::string(e.what()).find("line " + std::to_string(line)) != std::string::npos);
    }
  };
  SUBCASE("empty magnitude") {
    expect_line(std::string(good) + "\n" + R"({"label":"a","cells":0,"magnitude":[]})" + "\n", 2);
  }
  SUBCASE("mixed lengths") {
    expect_line(std::string(good) + "\n" + good + "\n" + R"({"label":"a","cells":2,"magnitude":[0.1,0.2]})", 3);
  }
  SUBCASE("negative or non-numeric magnitude") {
    expect_line(R"({"label":"a","cells":2,"magnitude":[0.1,-0.2]})", 1);
    expect_line(R"({"label":"a","cells":2,"magnitude":[0.1,null]})", 1);
  }
  SUBCASE("cell count mismatch, missing label, bad JSON") {
    expect_line(R"({"label":"a","cells":5,"magnitude":[0.1,0.2]})", 1);
    expect_line(R"({"cells":2,"magnitude":[0.1,0.2]})", 1);
    expect_line(std::string(good) + "\n{oops", 2);
  }
  SUBCASE("missing file") { CHECK_THROWS(load_dataset(dir / "nope.jsonl")); }
}

TEST_CASE("prototype and episode stores") {
  ScratchDir dir("stores");
  Prototype p;
  p.class_label = "a";
  p.cluster_id = 2;
  p.member_count = 4;
  p.mean_profile = Eigen::VectorXd::LinSpaced(5, 0, 1);
  p.signature = {{{4, 1.0}, {1, 0.37}}, 5};
  write_prototypes(dir / "p.jsonl", {p}, {}, true);
  const auto back = load_prototypes(dir / "p.jsonl");
  REQUIRE(back.size() == 1);
  CHECK(back[0].class_label == "a");
  CHECK(back[0].cluster_id == 2);
  CHECK(back[0].member_count == 4);
  CHECK(back[0].signature == p.signature);
  CHECK(back[0].mean_profile == p.mean_profile);
  const auto rec = nlohmann::json::parse(lines_of(read_text(dir / "p.jsonl"))[1]);
  for (const char* k : {"class", "cluster_id", "member_count", "signature", "mean_profile"}) CHECK(rec.contains(k));
  CHECK(rec["signature"]["entries"][0] == nlohmann::json::array({4, 1.0}));

  EpisodeOutcome e{3, 5, "adp", "surrogate", {"a", "b"}, {"a", "b"}, {std::string("a"), std::nullopt}, 1};
  atomic_write(dir / "e.jsonl", episodes_jsonl({e}, {}));
  const auto eps = load_episodes(dir / "e.jsonl");
  REQUIRE(eps.size() == 1);
  CHECK(eps[0].episode == 3);
  CHECK(eps[0].k == 5);
  CHECK(eps[0].truth == e.truth);
  CHECK(eps[0].pred == e.pred);
  CHECK(eps[0].backend_failures == 1);
  const auto erec = nlohmann::json::parse(lines_of(read_text(dir / "e.jsonl"))[1]);
  for (const char* k : {"episode", "K", "method", "truth", "pred"}) CHECK(erec.contains(k));
}

TEST_CASE("run configuration") {
  ScratchDir dir("config");
  const RunConfig def;
  CHECK(def.peak.prominence == 0.15);
  CHECK(def.cluster.policy == KPolicy::sqrt_rule);
  CHECK(def.cluster.restarts == 8);
  CHECK(def.backend.kind == BackendKind::surrogate);
  CHECK(def.match.position_tol == 5);
  CHECK(def.radar.num_cells == 306);

  std::ofstream(dir / "c.json") << R"({"seed": 9, "peak": {"min_spacing": 7}, "cluster": {"k_policy": "fixed", "k": 2}})";
  const auto cfg = load_config(dir / "c.json");
  CHECK(cfg.seed == 9);
  CHECK(cfg.peak.min_spacing == 7);
  CHECK(cfg.peak.prominence == 0.15);
  CHECK(cfg.cluster.policy == KPolicy::fixed);
  CHECK(cfg.cluster.fixed_k == 2);
  CHECK(config_digest(cfg) == config_digest(load_config(dir / "c.json")));
  CHECK(config_digest(cfg) != config_digest(def));

  RunConfig round;
  merge_json(round, to_json(cfg));
  CHECK(to_json(round) == to_json(cfg));

  std::ofstream(dir / "bad.json") << R"({"peak": {"prominance": 0.2}})";
  CHECK_THROWS_AS(load_config(dir / "bad.json"), InvalidParameter);
  std::ofstream(dir / "broken.json") << R"({"seed": )";
  CHECK_THROWS(load_config(dir / "broken.json"));
}

TEST_CASE("cli help and usage errors") {
  const auto help = cli({"--help"});
  CHECK(help.code == 0);
  for (const char* sub : {"simulate", "extract", "prototypes", "prompt", "evaluate", "sweep", "report"})
    CHECK(help.out.find(sub) != std::string::npos);
  CHECK(cli({}).code == 1);
  CHECK(cli({"simulate", "--bogus"}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"evaluate", "--help"}).code == 0);
}

TEST_CASE("cli simulate, extract, prototypes, prompt") {
  ScratchDir dir("cli");
  const auto d = (dir / "d.jsonl").string();
  auto r = cli({"--seed", "7", "simulate", "--classes", "3", "--aspects", "2", "--per-aspect", "20", "--out", d});
  REQUIRE(r.code == 0);
  const auto lines = lines_of(read_text(d));
  CHECK(lines.size() == 121);
  CHECK(is_provenance_record(nlohmann::json::parse(lines[0])));
  CHECK(load_dataset(d).size() == 120);

  CHECK(cli({"--seed", "7", "simulate", "--out", (dir / "d2.jsonl").string(), "--per-aspect", "20"}).code == 0);
  CHECK(read_text(d) == read_text(dir / "d2.jsonl"));

  r = cli({"extract", "--in", d, "--out", (dir / "s.jsonl").string()});
  CHECK(r.code == 0);
  CHECK(lines_of(read_text(dir / "s.jsonl")).size() == 121);

  r = cli({"prototypes", "--in", d, "--out", (dir / "p.jsonl").string(), "--k-policy", "fixed", "--k", "2"});
  CHECK(r.code == 0);
  CHECK(load_prototypes(dir / "p.jsonl").size() == 6);

  r = cli({"prompt", "--prototypes", (dir / "p.jsonl").string(), "--dataset", d, "--index", "4"});
  CHECK(r.code == 0);
  CHECK(r.out.find("--- Reference Prototype 6 ---") != std::string::npos);

  CHECK(cli({"extract", "--in", (dir / "missing.jsonl").string(), "--out", (dir / "x").string()}).code == 1);
  CHECK(cli({"simulate", "--classes", "0", "--out", (dir / "z.jsonl").string()}).code == 1);
}

TEST_CASE("cli prompt reproduces the reference prompt") {
  const auto r = cli({"prompt", "--prototypes", fixture("reference_prototypes.jsonl").string(), "--query",
                      fixture("reference_query.json").string(), "--classes", "an26,citation,yark42"});
  CHECK(r.code == 0);
  CHECK(r.out == read_text(fixture("reference_prompt.txt")) + "\n");
}

TEST_CASE("cli evaluate is reproducible and report re-renders") {
  ScratchDir dir("eval");
  const auto d = (dir / "d.jsonl").string();
  REQUIRE(cli({"--seed", "3", "simulate", "--per-aspect", "12", "--out", d}).code == 0);
  for (const char* out : {"r1", "r2"}) {
    const auto r = cli({"--seed", "7", "evaluate", "--in", d, "--backend", "surrogate", "--k", "3", "--episodes", "4",
                        "--n-query", "9", "--methods", "adp,monolithic,nearest_centroid", "--out-dir",
                        (dir / out).string()});
    REQUIRE(r.code == 0);
  }
  for (const char* f : {"report.csv", "report.txt", "episodes.jsonl", "metrics.json"}) {
    CHECK(read_text(dir / "r1" / f) == read_text(dir / "r2" / f));
    CHECK(read_text(dir / "r1" / f).find("provenance") != std::string::npos);
  }
  const auto csv = lines_of(read_text(dir / "r1" / "report.csv"));
  REQUIRE(csv.size() == 5);
  CHECK(csv[1] == "method,backend,K,episodes,mean_acc,macro_f1,abstentions");

  const auto rep = cli({"report", "--in", (dir / "r1" / "episodes.jsonl").string(), "--csv", (dir / "again.csv").string()});
  CHECK(rep.code == 0);
  CHECK(read_text(dir / "again.csv") == read_text(dir / "r1" / "report.csv").substr(csv[0].size() + 1));

  const auto sw = cli({"--seed", "7", "sweep", "--in", d, "--k-values", "1,3", "--episodes", "2", "--n-query", "6"});
  CHECK(sw.code == 0);
  CHECK(lines_of(sw.out).size() == 5);

  // too few samples for the requested shots
  CHECK(cli({"evaluate", "--in", d, "--k", "30"}).code == 1);
}

TEST_CASE("cli config file with flag overrides") {
  ScratchDir dir("cfgcli");
  std::ofstream(dir / "c.json") << R"({"seed": 11, "synthetic": {"classes": 2, "aspects": 2, "per_aspect": 3}})";
  const auto out = (dir / "d.jsonl").string();
  REQUIRE(cli({"--config", (dir / "c.json").string(), "simulate", "--out", out}).code == 0);
  CHECK(load_dataset(out).size() == 12);
  REQUIRE(cli({"--config", (dir / "c.json").string(), "simulate", "--classes", "3", "--out", out}).code == 0);
  CHECK(load_dataset(out).size() == 18);
  const auto prov = nlohmann::json::parse(lines_of(read_text(out))[0]);
  CHECK(prov["provenance"]["seed"] == 11);

  std::ofstream(dir / "bad.json") << R"({"sed": 1})";
  CHECK(cli({"--config", (dir / "bad.json").string(), "simulate", "--out", out}).code == 1);
}

TEST_CASE("cli exits 2 when the backend is unreachable") {
  ScratchDir dir("dead");
  const auto d = (dir / "d.jsonl").string();
  REQUIRE(cli({"simulate", "--per-aspect", "6", "--out", d}).code == 0);
  std::ofstream(dir / "c.json") << R"({"backend": {"max_retries": 0, "api_key_env": "", "backoff_base_s": 0}})";
  const auto r = cli({"--config", (dir / "c.json").string(), "evaluate", "--in", d, "--backend", "remote", "--endpoint",
                      "http://127.0.0.1:9/v1/chat/completions", "--cache-dir", (dir / "cache").string(), "--k", "1",
                      "--episodes", "1", "--n-query", "3", "--methods", "adp", "--out-dir", (dir / "out").string()});
  CHECK(r.code == 2);
  const auto eps = load_episodes(dir / "out" / "episodes.jsonl");
  REQUIRE(eps.size() == 1);
  CHECK(eps[0].backend_failures == 3);
  for (const auto& p : eps[0].pred) CHECK_FALSE(p.has_value());
}
