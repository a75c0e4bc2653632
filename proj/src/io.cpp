#include "adp/io.hpp"

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "adp/digest.hpp"

namespace adp {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidParameter("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Calls fn(json, line_number) for each non-blank, non-provenance line.
template <typename Fn>
void for_each_record(const std::string& text, Fn&& fn) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    if (is_provenance_record(j)) continue;
    fn(j, lineno);
  }
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidParameter("config section '" + where + "' must be an object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw InvalidParameter("unknown config key '" + where + (where.empty() ? "" : ".") + k + "'");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

void RunConfig::validate() const {
  radar.validate();
  peak.validate();
  cluster.validate();
  backend.validate();
  match.validate();
  episode.validate();
  if (k_values.empty()) throw InvalidParameter("k_values is empty");
  for (auto k : k_values)
    if (k < 1) throw InvalidParameter("K values must be >= 1");
  for (const auto& m : methods) parse_method(m);
  if (layout != "interleaved" && layout != "separable") throw InvalidParameter("layout must be interleaved or separable");
  if (!dataset_in.empty() && !std::filesystem::exists(dataset_in))
    throw InvalidParameter("dataset '" + dataset_in.string() + "' does not exist");
}

json to_json(const RunConfig& c) {
  return {
      {"radar",
       {{"carrier_hz", c.radar.carrier_hz},
        {"bandwidth_hz", c.radar.bandwidth_hz},
        {"pulse_width_s", c.radar.pulse_width_s},
        {"num_cells", c.radar.num_cells},
        {"freq_step_hz", c.radar.freq_step_hz}}},
      {"peak", {{"prominence", c.peak.prominence}, {"min_spacing", c.peak.min_spacing}, {"max_peaks", c.peak.max_peaks}}},
      {"cluster",
       {{"k_policy", to_string(c.cluster.policy)},
        {"k", c.cluster.fixed_k},
        {"max_iter", c.cluster.max_iter},
        {"tol", c.cluster.tol},
        {"restarts", c.cluster.restarts}}},
      {"backend",
       {{"kind", to_string(c.backend.kind)},
        {"endpoint_url", c.backend.endpoint_url},
        {"model_name", c.backend.model_name},
        {"api_key_env", c.backend.api_key_env},
        {"temperature", c.backend.temperature},
        {"max_retries", c.backend.max_retries},
        {"backoff_base_s", c.backend.backoff_base_s},
        {"concurrency_limit", c.backend.concurrency_limit},
        {"cache_dir", c.backend.cache_dir.string()}}},
      {"match", {{"position_tol", c.match.position_tol}, {"unmatched_penalty", c.match.unmatched_penalty}}},
      {"episode",
       {{"n_way", c.episode.n_way},
        {"k_shot", c.episode.k_shot},
        {"n_query", c.episode.n_query},
        {"episodes", c.episode.episodes}}},
      {"sgd", {{"epochs", c.sgd.epochs}, {"step", c.sgd.step}, {"regularization", c.sgd.regularization}}},
      {"k_values", c.k_values},
      {"methods", c.methods},
      {"dataset_blurb", c.dataset_blurb},
      {"synthetic",
       {{"classes", c.classes},
        {"aspects", c.aspects},
        {"per_aspect", c.per_aspect},
        {"snr_db", c.snr_db},
        {"layout", c.layout}}},
      {"paths",
       {{"dataset_in", c.dataset_in.string()},
        {"prototypes_out", c.prototypes_out.string()},
        {"report_out", c.report_out.string()}}},
      {"seed", c.seed},
  };
}

void merge_json(RunConfig& c, const json& j) {
  try {
    check_keys(j, {"radar", "peak", "cluster", "backend", "match", "episode", "sgd", "k_values", "methods",
                   "dataset_blurb", "synthetic", "paths", "seed"},
               "");
    if (j.contains("radar")) {
      const auto& r = j["radar"];
      check_keys(r, {"carrier_hz", "bandwidth_hz", "pulse_width_s", "num_cells", "freq_step_hz"}, "radar");
      take(r, "carrier_hz", c.radar.carrier_hz);
      take(r, "bandwidth_hz", c.radar.bandwidth_hz);
      take(r, "pulse_width_s", c.radar.pulse_width_s);
      take(r, "num_cells", c.radar.num_cells);
      if (r.contains("freq_step_hz"))
        take(r, "freq_step_hz", c.radar.freq_step_hz);
      else
        c.radar.freq_step_hz = c.radar.bandwidth_hz / static_cast<double>(c.radar.num_cells);
    }
    if (j.contains("peak")) {
      const auto& p = j["peak"];
      check_keys(p, {"prominence", "min_spacing", "max_peaks"}, "peak");
      take(p, "prominence", c.peak.prominence);
      take(p, "min_spacing", c.peak.min_spacing);
      take(p, "max_peaks", c.peak.max_peaks);
    }
    if (j.contains("cluster")) {
      const auto& p = j["cluster"];
      check_keys(p, {"k_policy", "k", "max_iter", "tol", "restarts"}, "cluster");
      if (p.contains("k_policy")) c.cluster.policy = parse_k_policy(p["k_policy"].get<std::string>());
      take(p, "k", c.cluster.fixed_k);
      take(p, "max_iter", c.cluster.max_iter);
      take(p, "tol", c.cluster.tol);
      take(p, "restarts", c.cluster.restarts);
    }
    if (j.contains("backend")) {
      const auto& b = j["backend"];
      check_keys(b, {"kind", "endpoint_url", "model_name", "api_key_env", "temperature", "max_retries",
                     "backoff_base_s", "concurrency_limit", "cache_dir"},
                 "backend");
      if (b.contains("kind")) c.backend.kind = parse_backend_kind(b["kind"].get<std::string>());
      take(b, "endpoint_url", c.backend.endpoint_url);
      take(b, "model_name", c.backend.model_name);
      take(b, "api_key_env", c.backend.api_key_env);
      take(b, "temperature", c.backend.temperature);
      take(b, "max_retries", c.backend.max_retries);
      take(b, "backoff_base_s", c.backend.backoff_base_s);
      take(b, "concurrency_limit", c.backend.concurrency_limit);
      if (b.contains("cache_dir")) c.backend.cache_dir = b["cache_dir"].get<std::string>();
    }
    if (j.contains("match")) {
      const auto& m = j["match"];
      check_keys(m, {"position_tol", "unmatched_penalty"}, "match");
      take(m, "position_tol", c.match.position_tol);
      take(m, "unmatched_penalty", c.match.unmatched_penalty);
    }
    if (j.contains("episode")) {
      const auto& e = j["episode"];
      check_keys(e, {"n_way", "k_shot", "n_query", "episodes"}, "episode");
      take(e, "n_way", c.episode.n_way);
      take(e, "k_shot", c.episode.k_shot);
      take(e, "n_query", c.episode.n_query);
      take(e, "episodes", c.episode.episodes);
    }
    if (j.contains("sgd")) {
      const auto& s = j["sgd"];
      check_keys(s, {"epochs", "step", "regularization"}, "sgd");
      take(s, "epochs", c.sgd.epochs);
      take(s, "step", c.sgd.step);
      take(s, "regularization", c.sgd.regularization);
    }
    take(j, "k_values", c.k_values);
    take(j, "methods", c.methods);
    take(j, "dataset_blurb", c.dataset_blurb);
    if (j.contains("synthetic")) {
      const auto& s = j["synthetic"];
      check_keys(s, {"classes", "aspects", "per_aspect", "snr_db", "layout"}, "synthetic");
      take(s, "classes", c.classes);
      take(s, "aspects", c.aspects);
      take(s, "per_aspect", c.per_aspect);
      take(s, "snr_db", c.snr_db);
      take(s, "layout", c.layout);
    }
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      check_keys(p, {"dataset_in", "prototypes_out", "report_out"}, "paths");
      if (p.contains("dataset_in")) c.dataset_in = p["dataset_in"].get<std::string>();
      if (p.contains("prototypes_out")) c.prototypes_out = p["prototypes_out"].get<std::string>();
      if (p.contains("report_out")) c.report_out = p["report_out"].get<std::string>();
    }
    take(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw InvalidParameter(std::string("malformed config: ") + e.what());
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  const auto text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidParameter("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  RunConfig cfg;
  merge_json(cfg, j);
  return cfg;
}

std::string config_digest(const RunConfig& cfg) { return sha256_hex(to_json(cfg).dump()); }

json provenance_record(const Provenance& p) {
  return {{"provenance", {{"config_digest", p.config_digest}, {"seed", p.seed}, {"tool_version", p.tool_version}}}};
}

bool is_provenance_record(const json& j) { return j.is_object() && j.size() == 1 && j.contains("provenance"); }

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  static std::atomic<unsigned> counter{0};
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidParameter("cannot write '" + path.string() + "'");
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------

json profile_to_json(const RangeProfile& p, bool include_complex) {
  json j;
  j["label"] = p.label.value_or("");
  if (p.aspect_deg) j["aspect_deg"] = *p.aspect_deg;
  j["cells"] = p.cells();
  j["magnitude"] = std::vector<double>(p.magnitude.data(), p.magnitude.data() + p.magnitude.size());
  if (include_complex && p.values.size() > 0) {
    json c = json::array();
    for (Eigen::Index k = 0; k < p.values.size(); ++k) c.push_back({p.values(k).real(), p.values(k).imag()});
    j["complex"] = std::move(c);
  }
  j["source"] = p.source == ProfileSource::synthetic ? "synthetic" : "loaded";
  return j;
}

RangeProfile profile_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError("record is not an object", line);
  RangeProfile p;
  p.source = ProfileSource::loaded;
  try {
    if (!j.contains("label") || !j["label"].is_string()) throw ParseError("missing string field 'label'", line);
    p.label = j["label"].get<std::string>();
    if (j.contains("aspect_deg")) {
      if (!j["aspect_deg"].is_number()) throw ParseError("'aspect_deg' must be a number", line);
      p.aspect_deg = j["aspect_deg"].get<double>();
    }
    if (!j.contains("magnitude") || !j["magnitude"].is_array()) throw ParseError("missing array field 'magnitude'", line);
    const auto& mag = j["magnitude"];
    if (mag.empty()) throw ParseError("'magnitude' is empty", line);
    p.magnitude.resize(static_cast<Eigen::Index>(mag.size()));
    for (std::size_t k = 0; k < mag.size(); ++k) {
      if (!mag[k].is_number()) throw ParseError("'magnitude' holds a non-number", line);
      const double v = mag[k].get<double>();
      if (!std::isfinite(v) || v < 0) throw ParseError("'magnitude' must be finite and >= 0", line);
      p.magnitude(static_cast<Eigen::Index>(k)) = v;
    }
    if (j.contains("cells") && j["cells"].get<Eigen::Index>() != p.magnitude.size())
      throw ParseError("'cells' does not match the magnitude length", line);
    if (j.contains("complex")) {
      const auto& c = j["complex"];
      if (!c.is_array() || c.size() != mag.size()) throw ParseError("'complex' must match the magnitude length", line);
      p.values.resize(static_cast<Eigen::Index>(c.size()));
      for (std::size_t k = 0; k < c.size(); ++k) {
        if (!c[k].is_array() || c[k].size() != 2) throw ParseError("'complex' entries must be [re, im]", line);
        p.values(static_cast<Eigen::Index>(k)) = {c[k][0].get<double>(), c[k][1].get<double>()};
      }
    }
    if (j.contains("source")) {
      const auto s = j["source"].get<std::string>();
      if (s == "synthetic") p.source = ProfileSource::synthetic;
      else if (s != "loaded") throw ParseError("unknown source '" + s + "'", line);
    }
  } catch (const json::exception& e) {
    throw ParseError(e.what(), line);
  }
  return p;
}

std::string dataset_jsonl(const std::vector<RangeProfile>& profiles, const Provenance& prov, bool include_complex) {
  std::string out = provenance_record(prov).dump() + "\n";
  for (const auto& p : profiles) out += profile_to_json(p, include_complex).dump() + "\n";
  return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<RangeProfile>& profiles,
                   const Provenance& prov, bool include_complex) {
  atomic_write(path, dataset_jsonl(profiles, prov, include_complex));
}

std::vector<RangeProfile> parse_dataset(const std::string& text) {
  std::vector<RangeProfile> out;
  for_each_record(text, [&](const json& j, std::size_t line) {
    auto p = profile_from_json(j, line);
    if (!out.empty() && p.cells() != out.front().cells())
      throw ParseError("profile length " + std::to_string(p.cells()) + " differs from " +
                           std::to_string(out.front().cells()) + " earlier in the file",
                       line);
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<RangeProfile> load_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path)); }

// ---------------------------------------------------------------------------

json signature_to_json(const SCSignature& s) {
  json entries = json::array();
  for (const auto& e : s.entries) entries.push_back({e.range_index, e.amplitude});
  return {{"profile_len", s.profile_len}, {"entries", entries}};
}

SCSignature signature_from_json(const json& j) {
  SCSignature s;
  s.profile_len = j.at("profile_len").get<Eigen::Index>();
  for (const auto& e : j.at("entries")) s.entries.push_back({e.at(0).get<Eigen::Index>(), e.at(1).get<double>()});
  return s;
}

json prototype_to_json(const Prototype& p, bool include_mean_profile) {
  json j = {{"class", p.class_label},
            {"cluster_id", p.cluster_id},
            {"member_count", p.member_count},
            {"signature", signature_to_json(p.signature)}};
  if (include_mean_profile)
    j["mean_profile"] = std::vector<double>(p.mean_profile.data(), p.mean_profile.data() + p.mean_profile.size());
  return j;
}

Prototype prototype_from_json(const json& j) {
  Prototype p;
  p.class_label = j.at("class").get<std::string>();
  p.cluster_id = j.at("cluster_id").get<Eigen::Index>();
  p.member_count = j.at("member_count").get<Eigen::Index>();
  p.signature = signature_from_json(j.at("signature"));
  if (j.contains("mean_profile")) {
    const auto v = j["mean_profile"].get<std::vector<double>>();
    p.mean_profile = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return p;
}

void write_prototypes(const std::filesystem::path& path, const std::vector<Prototype>& protos,
                      const Provenance& prov, bool include_mean_profile) {
  std::string out = provenance_record(prov).dump() + "\n";
  for (const auto& p : protos) out += prototype_to_json(p, include_mean_profile).dump() + "\n";
  atomic_write(path, out);
}

std::vector<Prototype> load_prototypes(const std::filesystem::path& path) {
  std::vector<Prototype> out;
  for_each_record(read_file(path), [&](const json& j, std::size_t line) {
    try {
      out.push_back(prototype_from_json(j));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------

json episode_to_json(const EpisodeOutcome& e) {
  json pred = json::array();
  for (const auto& p : e.pred) pred.push_back(p ? json(*p) : json(nullptr));
  return {{"episode", e.episode}, {"K", e.k},           {"method", e.method},         {"backend", e.backend},
          {"classes", e.classes}, {"truth", e.truth},   {"pred", pred},               {"backend_failures", e.backend_failures}};
}

EpisodeOutcome episode_from_json(const json& j) {
  EpisodeOutcome e;
  e.episode = j.at("episode").get<std::size_t>();
  e.k = j.at("K").get<std::size_t>();
  e.method = j.at("method").get<std::string>();
  e.backend = j.value("backend", "");
  e.truth = j.at("truth").get<std::vector<std::string>>();
  for (const auto& p : j.at("pred")) e.pred.push_back(p.is_null() ? std::nullopt : std::optional<std::string>(p.get<std::string>()));
  if (j.contains("classes")) {
    e.classes = j["classes"].get<std::vector<std::string>>();
  } else {
    std::set<std::string> seen(e.truth.begin(), e.truth.end());
    e.classes.assign(seen.begin(), seen.end());
  }
  e.backend_failures = j.value("backend_failures", std::size_t{0});
  return e;
}

std::string episodes_jsonl(const std::vector<EpisodeOutcome>& eps, const Provenance& prov) {
  std::string out = provenance_record(prov).dump() + "\n";
  for (const auto& e : eps) out += episode_to_json(e).dump() + "\n";
  return out;
}

std::vector<EpisodeOutcome> load_episodes(const std::filesystem::path& path) {
  std::vector<EpisodeOutcome> out;
  for_each_record(read_file(path), [&](const json& j, std::size_t line) {
    try {
      out.push_back(episode_from_json(j));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line);
    }
  });
  return out;
}

json report_to_json(const EvalReport& r) {
  json per_class = json::array();
  for (const auto& s : r.per_class)
    per_class.push_back({{"class", s.label}, {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}});
  json confusion = json::array();
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < r.confusion.cols(); ++c) row.push_back(r.confusion(i, c));
    confusion.push_back(row);
  }
  return {{"mean_acc", r.mean_acc},       {"macro_f1", r.macro_f1},   {"labels", r.labels},
          {"confusion", confusion},       {"confusion_columns", "labels then abstain"},
          {"per_class", per_class},       {"abstentions", r.abstentions},
          {"correct", r.correct},         {"wrong", r.wrong},         {"total", r.total},
          {"per_episode", r.per_episode}, {"per_episode_f1", r.per_episode_f1}};
}

}  // namespace adp
