#include "adp/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>

#include "adp/io.hpp"

namespace adp {

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitBackend = 2;

struct Flags {
  std::string config_path;
  std::uint64_t seed = 0;

  // simulate
  std::size_t classes = 0, aspects = 0, per_aspect = 0;
  std::string snr = "";
  std::string layout;
  Eigen::Index cells = 0;
  bool with_complex = false;
  std::string out;

  // extract / prototypes / evaluate / sweep / report
  std::string in;
  std::string k_policy;
  Eigen::Index k = 0;
  bool mean_profile = false;
  std::vector<std::string> only_classes;

  // prompt
  std::string prototypes;
  std::string query;
  std::string dataset;
  std::size_t index = 0;
  std::vector<std::string> candidates;
  std::string blurb;
  Eigen::Index profile_len = 0;

  // evaluate / sweep
  std::size_t shots = 0, episodes = 0, n_way = 0, n_query = 0;
  std::vector<std::size_t> k_values;
  std::vector<std::string> methods;
  std::string backend, cache_dir, endpoint, model;
  std::string out_dir;
  std::string csv_out;
};

double parse_snr(const std::string& s) {
  if (s == "inf" || s == "+inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw InvalidParameter("bad --snr-db value '" + s + "'");
  return v;
}

Provenance provenance_for(const RunConfig& cfg) { return {config_digest(cfg), cfg.seed, kToolVersion}; }

MethodOptions method_options(const RunConfig& cfg) {
  MethodOptions o;
  o.cluster = cfg.cluster;
  o.peak = cfg.peak;
  o.match = cfg.match;
  o.sgd = cfg.sgd;
  o.basis.dataset_blurb = cfg.dataset_blurb;
  o.basis.model_tag = cfg.backend.model_name;
  return o;
}

int cmd_simulate(const RunConfig& cfg, const Flags& f, std::ostream& out) {
  if (f.out.empty()) throw InvalidParameter("simulate needs --out");
  const auto specs = cfg.layout == "separable"
                         ? separable_classes(cfg.classes, cfg.aspects, cfg.radar.num_cells, cfg.seed)
                         : interleaved_classes(cfg.classes, cfg.aspects, cfg.radar.num_cells, cfg.seed);
  const auto data =
      generate_aspect_dataset(specs, default_aspects(cfg.aspects), cfg.per_aspect, cfg.radar, cfg.snr_db, cfg.seed);
  write_dataset(f.out, data, provenance_for(cfg), f.with_complex);
  out << "wrote " << data.size() << " profiles to " << f.out << "\n";
  return kExitOk;
}

int cmd_extract(const RunConfig& cfg, const Flags& f, std::ostream& out) {
  if (f.out.empty()) throw InvalidParameter("extract needs --out");
  const auto data = load_dataset(cfg.dataset_in);
  std::string text = provenance_record(provenance_for(cfg)).dump() + "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    json j = {{"index", i}, {"label", data[i].label.value_or("")},
              {"signature", signature_to_json(detect_scattering_centers(data[i], cfg.peak))}};
    if (data[i].aspect_deg) j["aspect_deg"] = *data[i].aspect_deg;
    text += j.dump() + "\n";
  }
  atomic_write(f.out, text);
  out << "wrote " << data.size() << " signatures to " << f.out << "\n";
  return kExitOk;
}

int cmd_prototypes(const RunConfig& cfg, const Flags& f, std::ostream& out) {
  const auto dest = f.out.empty() ? cfg.prototypes_out : std::filesystem::path(f.out);
  if (dest.empty()) throw InvalidParameter("prototypes needs --out");
  const auto data = load_dataset(cfg.dataset_in);
  std::vector<Prototype> all;
  for (const auto& cls : dataset_classes(data)) {
    if (!f.only_classes.empty() &&
        std::find(f.only_classes.begin(), f.only_classes.end(), cls) == f.only_classes.end())
      continue;
    std::vector<RangeProfile> supports;
    for (const auto& p : data)
      if (p.label == cls) supports.push_back(p);
    auto protos = build_prototypes(cls, supports, cfg.cluster, cfg.peak);
    all.insert(all.end(), protos.begin(), protos.end());
  }
  write_prototypes(dest, all, provenance_for(cfg), f.mean_profile);
  out << "wrote " << all.size() << " prototypes to " << dest.string() << "\n";
  return kExitOk;
}

int cmd_prompt(const RunConfig& cfg, const Flags& f, std::ostream& out) {
  if (f.prototypes.empty()) throw InvalidParameter("prompt needs --prototypes");
  const auto protos = load_prototypes(f.prototypes);
  if (protos.empty()) throw InvalidParameter("prototype store is empty");

  SCSignature query;
  if (!f.query.empty()) {
    std::ifstream in(f.query);
    if (!in) throw InvalidParameter("cannot open '" + f.query + "'");
    json j;
    try {
      j = json::parse(in);
      query = signature_from_json(j.contains("signature") ? j["signature"] : j);
    } catch (const json::exception& e) {
      throw InvalidParameter(std::string("malformed query signature: ") + e.what());
    }
  } else if (!f.dataset.empty()) {
    const auto data = load_dataset(f.dataset);
    if (f.index >= data.size()) throw InvalidParameter("--index beyond the dataset");
    query = detect_scattering_centers(data[f.index], cfg.peak);
  } else {
    throw InvalidParameter("prompt needs --query or --dataset/--index");
  }

  TaskContext ctx;
  ctx.dataset_blurb = cfg.dataset_blurb;
  ctx.model_tag = cfg.backend.model_name;
  ctx.candidate_classes = f.candidates;
  if (ctx.candidate_classes.empty())
    for (const auto& p : protos)
      if (std::find(ctx.candidate_classes.begin(), ctx.candidate_classes.end(), p.class_label) ==
          ctx.candidate_classes.end())
        ctx.candidate_classes.push_back(p.class_label);
  ctx.profile_len = f.profile_len > 0 ? f.profile_len : query.profile_len;
  out << assemble_prompt(ctx, protos, query).text << "\n";
  return kExitOk;
}

int run_episodic(const RunConfig& cfg, const Flags& f, std::ostream& out, std::vector<std::size_t> k_values) {
  const auto data = load_dataset(cfg.dataset_in);
  SweepConfig sc;
  sc.spec = cfg.episode;
  sc.spec.seed = cfg.seed;
  sc.k_values = std::move(k_values);
  sc.methods.clear();
  for (const auto& m : cfg.methods) sc.methods.push_back(parse_method(m));
  sc.options = method_options(cfg);

  auto backend = make_classifier(cfg.backend, cfg.match);
  const auto res = k_sweep(data, sc, *backend);
  const auto prov = provenance_for(cfg);
  const std::string header = "# provenance config_digest=" + prov.config_digest +
                             " seed=" + std::to_string(prov.seed) + " tool_version=" + prov.tool_version + "\n";

  const auto dir = f.out_dir.empty() ? cfg.report_out : std::filesystem::path(f.out_dir);
  if (!dir.empty()) {
    atomic_write(dir / "report.csv", header + sweep_csv(res.rows));
    atomic_write(dir / "report.txt", header + sweep_table(res.rows));
    atomic_write(dir / "episodes.jsonl", episodes_jsonl(res.details, prov));
    json metrics = json::array();
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
      auto j = report_to_json(res.reports[i]);
      j["method"] = res.rows[i].method;
      j["backend"] = res.rows[i].backend;
      j["K"] = res.rows[i].k;
      metrics.push_back(j);
    }
    atomic_write(dir / "metrics.json", json{{"provenance", provenance_record(prov)["provenance"]}, {"results", metrics}}.dump(2) + "\n");
  }
  out << sweep_table(res.rows);

  std::size_t failures = 0;
  for (const auto& d : res.details) failures += d.backend_failures;
  if (failures > 0) {
    out << failures << " queries abstained because the backend was unavailable\n";
    return kExitBackend;
  }
  return kExitOk;
}

int cmd_report(const Flags& f, std::ostream& out) {
  if (f.in.empty()) throw InvalidParameter("report needs --in");
  auto details = load_episodes(f.in);
  if (details.empty()) throw InvalidParameter("no episode records in '" + f.in + "'");
  std::vector<std::string> order;
  for (const auto& d : details)
    if (std::find(order.begin(), order.end(), d.method) == order.end()) order.push_back(d.method);
  const auto res = aggregate(std::move(details), order);
  if (!f.csv_out.empty()) atomic_write(f.csv_out, sweep_csv(res.rows));
  out << sweep_table(res.rows);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Aspect-distributed prototype toolkit for few-shot HRRP recognition", "adp"};
  app.require_subcommand(1);
  Flags f;
  auto* o_config = app.add_option("--config", f.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  auto* o_seed = app.add_option("--seed", f.seed, "Seed for all randomness");
  (void)o_config;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic aspect-sweep dataset (JSON Lines)");
  auto* o_classes = sim->add_option("--classes", f.classes, "Number of classes");
  auto* o_aspects = sim->add_option("--aspects", f.aspects, "Aspect modes per class");
  auto* o_per = sim->add_option("--per-aspect", f.per_aspect, "Profiles per class and aspect");
  auto* o_snr = sim->add_option("--snr-db", f.snr, "Signal-to-noise ratio in dB ('inf' disables noise)");
  auto* o_layout = sim->add_option("--layout", f.layout, "interleaved | separable");
  auto* o_cells = sim->add_option("--cells", f.cells, "Range cells per profile");
  sim->add_flag("--with-complex", f.with_complex, "Also store the complex response");
  sim->add_option("--out", f.out, "Output dataset path")->required();

  auto* ext = app.add_subcommand("extract", "Extract scattering-center signatures from a dataset");
  auto* o_in_ext = ext->add_option("--in", f.in, "Input dataset");
  ext->add_option("--out", f.out, "Output signatures (JSON Lines)")->required();

  auto* pro = app.add_subcommand("prototypes", "Build aspect-distributed prototypes per class");
  auto* o_in_pro = pro->add_option("--in", f.in, "Input dataset (all samples act as supports)");
  pro->add_option("--out", f.out, "Output prototype store (JSON Lines)");
  auto* o_policy = pro->add_option("--k-policy", f.k_policy, "fixed | sqrt | silhouette");
  auto* o_k = pro->add_option("--k", f.k, "Cluster count for the fixed policy");
  pro->add_flag("--mean-profile", f.mean_profile, "Store each prototype's mean profile");
  pro->add_option("--class", f.only_classes, "Restrict to these classes")->delimiter(',');

  auto* pr = app.add_subcommand("prompt", "Render one prompt to standard output");
  pr->add_option("--prototypes", f.prototypes, "Prototype store")->required();
  pr->add_option("--query", f.query, "Query signature JSON");
  pr->add_option("--dataset", f.dataset, "Dataset holding the query profile");
  pr->add_option("--index", f.index, "Query profile index in --dataset");
  pr->add_option("--classes", f.candidates, "Candidate classes in order")->delimiter(',');
  auto* o_blurb = pr->add_option("--blurb", f.blurb, "Dataset description");
  pr->add_option("--profile-len", f.profile_len, "HRRP length shown in the prompt");

  auto add_episodic = [&](CLI::App* sub, bool sweep) {
    sub->add_option("--in", f.in, "Input dataset");
    if (sweep)
      sub->add_option("--k-values", f.k_values, "Support shots to sweep")->delimiter(',');
    else
      sub->add_option("--k", f.shots, "Support shots per class");
    sub->add_option("--episodes", f.episodes, "Episodes per setting");
    sub->add_option("--n-way", f.n_way, "Classes per episode");
    sub->add_option("--n-query", f.n_query, "Query samples per episode");
    sub->add_option("--methods", f.methods, "adp, monolithic, nearest_centroid, nn_correlation, linear_sgd, nn_signature")
        ->delimiter(',');
    sub->add_option("--backend", f.backend, "surrogate | remote | replay");
    sub->add_option("--cache-dir", f.cache_dir, "Response cache directory");
    sub->add_option("--endpoint", f.endpoint, "Chat-completion endpoint URL");
    sub->add_option("--model", f.model, "Model name");
    sub->add_option("--k-policy", f.k_policy, "fixed | sqrt | silhouette");
    sub->add_option("--k-fixed", f.k, "Cluster count for the fixed policy");
    sub->add_option("--out-dir", f.out_dir, "Directory for report.csv, report.txt, episodes.jsonl, metrics.json");
  };
  auto* ev = app.add_subcommand("evaluate", "Run an episodic N-way K-shot evaluation");
  add_episodic(ev, false);
  auto* sw = app.add_subcommand("sweep", "Sweep K and tabulate accuracy and macro-F1 per method");
  add_episodic(sw, true);

  auto* rep = app.add_subcommand("report", "Re-render saved per-episode results");
  rep->add_option("--in", f.in, "episodes.jsonl from evaluate or sweep")->required();
  rep->add_option("--csv", f.csv_out, "Also write the CSV table here");

  std::vector<std::string> storage = args;
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    RunConfig cfg = f.config_path.empty() ? RunConfig{} : load_config(f.config_path);
    if (o_seed->count()) cfg.seed = f.seed;
    if (o_classes->count()) cfg.classes = f.classes;
    if (o_aspects->count()) cfg.aspects = f.aspects;
    if (o_per->count()) cfg.per_aspect = f.per_aspect;
    if (o_snr->count()) cfg.snr_db = parse_snr(f.snr);
    if (o_layout->count()) cfg.layout = f.layout;
    if (o_cells->count()) {
      cfg.radar.num_cells = f.cells;
      cfg.radar.freq_step_hz = cfg.radar.bandwidth_hz / static_cast<double>(f.cells);
    }
    if (!f.in.empty()) cfg.dataset_in = f.in;
    if (o_policy->count()) cfg.cluster.policy = parse_k_policy(f.k_policy);
    if (o_k->count()) cfg.cluster.fixed_k = f.k;
    if (o_blurb->count()) cfg.dataset_blurb = f.blurb;
    for (auto* sub : {ev, sw}) {
      if (!sub->parsed()) continue;
      if (sub->get_option("--k-policy")->count()) cfg.cluster.policy = parse_k_policy(f.k_policy);
      if (sub->get_option("--k-fixed")->count()) cfg.cluster.fixed_k = f.k;
      if (f.shots) cfg.episode.k_shot = f.shots;
      if (f.episodes) cfg.episode.episodes = f.episodes;
      if (f.n_way) cfg.episode.n_way = f.n_way;
      if (f.n_query) cfg.episode.n_query = f.n_query;
      if (!f.k_values.empty()) cfg.k_values = f.k_values;
      if (!f.methods.empty()) cfg.methods = f.methods;
      if (!f.backend.empty()) cfg.backend.kind = parse_backend_kind(f.backend);
      if (!f.cache_dir.empty()) cfg.backend.cache_dir = f.cache_dir;
      if (!f.endpoint.empty()) cfg.backend.endpoint_url = f.endpoint;
      if (!f.model.empty()) cfg.backend.model_name = f.model;
    }
    cfg.cluster.seed = cfg.seed;
    cfg.validate();

    if ((ext->parsed() || pro->parsed() || ev->parsed() || sw->parsed()) && cfg.dataset_in.empty())
      throw InvalidParameter("no input dataset (--in or paths.dataset_in)");
    (void)o_in_ext;
    (void)o_in_pro;

    if (sim->parsed()) return cmd_simulate(cfg, f, out);
    if (ext->parsed()) return cmd_extract(cfg, f, out);
    if (pro->parsed()) return cmd_prototypes(cfg, f, out);
    if (pr->parsed()) return cmd_prompt(cfg, f, out);
    if (ev->parsed()) return run_episodic(cfg, f, out, {cfg.episode.k_shot});
    if (sw->parsed()) return run_episodic(cfg, f, out, cfg.k_values);
    if (rep->parsed()) return cmd_report(f, out);
  } catch (const BackendUnavailable& e) {
    err << "backend failure: " << e.what() << "\n";
    return kExitBackend;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace adp
