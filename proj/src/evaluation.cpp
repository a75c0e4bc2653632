#include "adp/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace adp {

void EpisodeSpec::validate() const {
  if (n_way < 2) throw InvalidParameter("n_way must be >= 2");
  if (k_shot < 1) throw InvalidParameter("k_shot must be >= 1");
  if (n_query < 1) throw InvalidParameter("n_query must be >= 1");
}

std::vector<std::string> dataset_classes(const std::vector<RangeProfile>& dataset) {
  std::set<std::string> labels;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!dataset[i].label) throw InvalidParameter("profile " + std::to_string(i) + " has no label");
    labels.insert(*dataset[i].label);
  }
  return {labels.begin(), labels.end()};
}

Episode sample_episode(const std::vector<RangeProfile>& dataset, const EpisodeSpec& spec,
                       std::size_t episode_index) {
  spec.validate();
  const auto all = dataset_classes(dataset);
  if (all.size() < spec.n_way)
    throw InvalidParameter("dataset has " + std::to_string(all.size()) + " classes, episode needs " +
                           std::to_string(spec.n_way));

  std::mt19937_64 rng(derive_seed({spec.seed, spec.k_shot, episode_index}));
  std::vector<std::string> pool = all;
  std::shuffle(pool.begin(), pool.end(), rng);

  Episode ep;
  ep.index = episode_index;
  ep.classes.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(spec.n_way));

  const std::size_t per_class = spec.n_query / spec.n_way;
  const std::size_t remainder = spec.n_query % spec.n_way;
  const std::size_t need = spec.k_shot + (spec.n_query + spec.n_way - 1) / spec.n_way;

  for (std::size_t c = 0; c < ep.classes.size(); ++c) {
    const auto& cls = ep.classes[c];
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.size(); ++i)
      if (*dataset[i].label == cls) members.push_back(i);
    if (members.size() < need) throw DatasetTooSmall(cls, members.size(), need);
    std::shuffle(members.begin(), members.end(), rng);

    const std::size_t n_q = per_class + (c < remainder ? 1 : 0);
    for (std::size_t j = 0; j < spec.k_shot; ++j)
      ep.support.push_back({members[j], &dataset[members[j]], cls});
    for (std::size_t j = 0; j < n_q; ++j) {
      const auto idx = members[spec.k_shot + j];
      ep.query.push_back({idx, &dataset[idx], cls});
    }
  }
  return ep;
}

TaskContext episode_context(const Episode& episode, const TaskContext& basis) {
  TaskContext ctx = basis;
  ctx.candidate_classes = episode.classes;
  if (!episode.support.empty()) ctx.profile_len = episode.support.front().profile->cells();
  return ctx;
}

PipelineResult run_adp_pipeline(const Episode& episode, const ClusterConfig& cfg, const PeakParams& peak,
                                Classifier& backend, const TaskContext& basis) {
  const auto ctx = episode_context(episode, basis);
  PipelineResult res;
  for (const auto& cls : episode.classes) {
    std::vector<RangeProfile> supports;
    for (const auto& s : episode.support)
      if (s.label == cls) supports.push_back(*s.profile);
    auto protos = build_prototypes(cls, supports, cfg, peak);
    res.prototypes.insert(res.prototypes.end(), protos.begin(), protos.end());
  }

  std::vector<SCSignature> queries;
  queries.reserve(episode.query.size());
  for (const auto& q : episode.query) {
    queries.push_back(detect_scattering_centers(*q.profile, peak));
    res.prompts.push_back(assemble_prompt(ctx, res.prototypes, queries.back()));
  }
  std::vector<QueryJob> jobs;
  for (std::size_t i = 0; i < queries.size(); ++i) jobs.push_back({&res.prompts[i], &queries[i], &res.prototypes});
  res.outcomes = backend.classify(jobs, ctx);
  return res;
}

PipelineResult run_monolithic_pipeline(const Episode& episode, const ClusterConfig& cfg,
                                       const PeakParams& peak, Classifier& backend,
                                       const TaskContext& basis) {
  ClusterConfig single = cfg;
  single.policy = KPolicy::fixed;
  single.fixed_k = 1;
  return run_adp_pipeline(episode, single, peak, backend, basis);
}

std::string to_string(Method m) {
  switch (m) {
    case Method::adp: return "adp";
    case Method::monolithic: return "monolithic";
    case Method::nearest_centroid: return "nearest_centroid_analogue";
    case Method::nn_correlation: return "nn_correlation_analogue";
    case Method::linear_sgd: return "linear_sgd_analogue";
    case Method::nn_signature: return "nn_signature_analogue";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  for (auto m : {Method::adp, Method::monolithic, Method::nearest_centroid, Method::nn_correlation,
                 Method::linear_sgd, Method::nn_signature}) {
    const auto name = to_string(m);
    if (s == name || s + "_analogue" == name) return m;
  }
  throw InvalidParameter("unknown method '" + s + "'");
}

bool uses_backend(Method m) { return m == Method::adp || m == Method::monolithic; }

PipelineResult run_method(Method method, const Episode& episode, const MethodOptions& opts,
                          Classifier& backend, std::uint64_t method_seed) {
  if (uses_backend(method)) {
    ClusterConfig cfg = opts.cluster;
    cfg.seed = method_seed;
    return method == Method::adp ? run_adp_pipeline(episode, cfg, opts.peak, backend, opts.basis)
                                 : run_monolithic_pipeline(episode, cfg, opts.peak, backend, opts.basis);
  }

  std::vector<RangeProfile> sp, qp;
  std::vector<std::string> sl;
  for (const auto& s : episode.support) {
    sp.push_back(*s.profile);
    sl.push_back(s.label);
  }
  for (const auto& q : episode.query) qp.push_back(*q.profile);

  std::vector<std::string> pred;
  switch (method) {
    case Method::nearest_centroid:
      pred = nearest_centroid(embed_samples(sp), sl, embed_samples(qp), episode.classes);
      break;
    case Method::nn_correlation:
      pred = nearest_neighbor_correlation(embed_samples(sp), sl, embed_samples(qp));
      break;
    case Method::linear_sgd: {
      LinearSgdClassifier clf;
      auto sgd = opts.sgd;
      sgd.seed = method_seed;
      clf.fit(embed_samples(sp), sl, episode.classes, sgd);
      pred = clf.predict(embed_samples(qp));
      break;
    }
    case Method::nn_signature: {
      std::vector<SCSignature> ss, qs;
      for (const auto& p : sp) ss.push_back(detect_scattering_centers(p, opts.peak));
      for (const auto& p : qp) qs.push_back(detect_scattering_centers(p, opts.peak));
      pred = nearest_neighbor_signature(ss, sl, qs, opts.match);
      break;
    }
    default:
      break;
  }
  PipelineResult res;
  for (auto& p : pred) {
    QueryOutcome o;
    o.verdict = Verdict{p, to_string(method), {}};
    res.outcomes.push_back(std::move(o));
  }
  return res;
}

// ---------------------------------------------------------------------------

namespace {

struct Tally {
  std::vector<std::string> labels;
  Eigen::MatrixXi confusion;  // truth x (labels + abstain)
  std::size_t correct = 0, abstained = 0, total = 0;

  explicit Tally(std::vector<std::string> l)
      : labels(std::move(l)),
        confusion(Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(labels.size()),
                                        static_cast<Eigen::Index>(labels.size()) + 1)) {}

  Eigen::Index slot(const std::string& label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw InvalidParameter("label '" + label + "' is not one of the episode classes");
    return static_cast<Eigen::Index>(it - labels.begin());
  }

  void add(const std::string& truth, const std::optional<std::string>& pred) {
    const auto row = slot(truth);
    const auto col = pred ? slot(*pred) : static_cast<Eigen::Index>(labels.size());
    ++confusion(row, col);
    ++total;
    if (!pred) ++abstained;
    else if (row == col) ++correct;
  }

  std::vector<ClassStats> stats() const {
    const auto n = static_cast<Eigen::Index>(labels.size());
    std::vector<ClassStats> out;
    for (Eigen::Index c = 0; c < n; ++c) {
      ClassStats s;
      s.label = labels[static_cast<std::size_t>(c)];
      const double tp = confusion(c, c);
      const double predicted = confusion.col(c).sum();
      const double actual = confusion.row(c).sum();
      s.support = static_cast<std::size_t>(actual);
      s.precision = predicted > 0 ? tp / predicted : 0.0;
      s.recall = actual > 0 ? tp / actual : 0.0;
      s.f1 = (s.precision + s.recall) > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
      out.push_back(s);
    }
    return out;
  }

  double macro_f1() const {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& s : stats()) {
      if (s.support == 0) continue;
      sum += s.f1;
      ++n;
    }
    return n ? 100.0 * sum / static_cast<double>(n) : 0.0;
  }

  double accuracy() const { return total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

}  // namespace

EvalReport compute_metrics(const std::vector<std::string>& classes, const std::vector<std::string>& truth,
                           const std::vector<std::optional<std::string>>& pred) {
  EpisodeOutcome e;
  e.classes = classes;
  e.truth = truth;
  e.pred = pred;
  return compute_metrics(std::vector<EpisodeOutcome>{e});
}

EvalReport compute_metrics(const std::vector<EpisodeOutcome>& episodes) {
  if (episodes.empty()) throw InvalidParameter("no episodes to score");
  std::set<std::string> universe;
  for (const auto& e : episodes) {
    if (e.truth.size() != e.pred.size()) throw InvalidParameter("truth and prediction lengths differ");
    if (e.truth.empty()) throw InvalidParameter("empty query set");
    universe.insert(e.classes.begin(), e.classes.end());
  }

  EvalReport rep;
  Tally pooled({universe.begin(), universe.end()});
  for (const auto& e : episodes) {
    Tally t(e.classes);
    for (std::size_t i = 0; i < e.truth.size(); ++i) {
      t.add(e.truth[i], e.pred[i]);
      pooled.add(e.truth[i], e.pred[i]);
    }
    rep.per_episode.push_back(t.accuracy());
    rep.per_episode_f1.push_back(t.macro_f1());
  }
  double acc = 0, f1 = 0;
  for (std::size_t i = 0; i < rep.per_episode.size(); ++i) {
    acc += rep.per_episode[i];
    f1 += rep.per_episode_f1[i];
  }
  rep.mean_acc = acc / static_cast<double>(episodes.size());
  rep.macro_f1 = f1 / static_cast<double>(episodes.size());
  rep.labels = pooled.labels;
  rep.confusion = pooled.confusion;
  rep.per_class = pooled.stats();
  rep.abstentions = pooled.abstained;
  rep.correct = pooled.correct;
  rep.total = pooled.total;
  rep.wrong = pooled.total - pooled.correct - pooled.abstained;
  return rep;
}

// ---------------------------------------------------------------------------

SweepResult aggregate(std::vector<EpisodeOutcome> details, const std::vector<std::string>& method_order) {
  std::sort(details.begin(), details.end(), [&](const auto& a, const auto& b) {
    if (a.k != b.k) return a.k < b.k;
    const auto ra = std::find(method_order.begin(), method_order.end(), a.method) - method_order.begin();
    const auto rb = std::find(method_order.begin(), method_order.end(), b.method) - method_order.begin();
    if (ra != rb) return ra < rb;
    if (a.method != b.method) return a.method < b.method;
    return a.episode < b.episode;
  });

  std::map<std::pair<std::string, std::size_t>, std::vector<EpisodeOutcome>> groups;
  for (const auto& d : details) groups[{d.method, d.k}].push_back(d);

  std::vector<std::string> order = method_order;
  for (const auto& [key, _] : groups)
    if (std::find(order.begin(), order.end(), key.first) == order.end()) order.push_back(key.first);

  SweepResult res;
  for (const auto& m : order) {
    for (const auto& [key, eps] : groups) {
      if (key.first != m) continue;
      auto rep = compute_metrics(eps);
      SweepRow row;
      row.method = m;
      row.backend = eps.front().backend;
      row.k = key.second;
      row.episodes = eps.size();
      row.mean_acc = rep.mean_acc;
      row.macro_f1 = rep.macro_f1;
      row.abstentions = rep.abstentions;
      res.rows.push_back(row);
      res.reports.push_back(std::move(rep));
    }
  }
  res.details = std::move(details);
  return res;
}

SweepResult k_sweep(const std::vector<RangeProfile>& dataset, const SweepConfig& cfg, Classifier& backend) {
  if (cfg.k_values.empty()) throw InvalidParameter("no K values to sweep");
  if (cfg.methods.empty()) throw InvalidParameter("no methods to sweep");

  struct Task {
    std::size_t k, episode;
  };
  std::vector<Task> tasks;
  for (auto k : cfg.k_values)
    for (std::size_t e = 0; e < cfg.spec.episodes; ++e) tasks.push_back({k, e});

  std::vector<std::vector<EpisodeOutcome>> slots(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  auto run = [&](std::size_t t) {
    try {
      EpisodeSpec spec = cfg.spec;
      spec.k_shot = tasks[t].k;
      const auto ep = sample_episode(dataset, spec, tasks[t].episode);
      for (auto m : cfg.methods) {
        const auto seed = derive_seed({cfg.spec.seed, tasks[t].k, static_cast<std::uint64_t>(m), tasks[t].episode});
        const auto res = run_method(m, ep, cfg.options, backend, seed);
        EpisodeOutcome out;
        out.episode = tasks[t].episode;
        out.k = tasks[t].k;
        out.method = to_string(m);
        out.backend = uses_backend(m) ? backend.name() : "none";
        out.classes = ep.classes;
        for (std::size_t i = 0; i < ep.query.size(); ++i) {
          out.truth.push_back(ep.query[i].label);
          const auto& o = res.outcomes[i];
          out.pred.push_back(o.verdict ? std::optional<std::string>(o.verdict->predicted) : std::nullopt);
          if (o.backend_failure) ++out.backend_failures;
        }
        slots[t].push_back(std::move(out));
      }
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, tasks.size()));
  if (workers == 1) {
    for (std::size_t t = 0; t < tasks.size(); ++t) run(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < tasks.size(); t = next++) run(t);
      });
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<EpisodeOutcome> details;
  for (auto& s : slots)
    for (auto& d : s) details.push_back(std::move(d));
  std::vector<std::string> order;
  for (auto m : cfg.methods) order.push_back(to_string(m));
  return aggregate(std::move(details), order);
}

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "method,backend,K,episodes,mean_acc,macro_f1,abstentions\n";
  for (const auto& r : rows)
    out += r.method + "," + r.backend + "," + std::to_string(r.k) + "," + std::to_string(r.episodes) + "," +
           fixed2(r.mean_acc) + "," + fixed2(r.macro_f1) + "," + std::to_string(r.abstentions) + "\n";
  return out;
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::vector<std::vector<std::string>> cells = {
      {"Method", "Backend", "K-shot", "Episodes", "Mean Acc.", "F1.", "Abstain"}};
  for (const auto& r : rows)
    cells.push_back({r.method, r.backend, std::to_string(r.k), std::to_string(r.episodes), fixed2(r.mean_acc),
                     fixed2(r.macro_f1), std::to_string(r.abstentions)});
  std::vector<std::size_t> width(cells.front().size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream os;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      // Text columns left-aligned, numbers right-aligned.
      const auto pad = std::string(width[c] - row[c].size(), ' ');
      os << (c < 2 ? row[c] + pad : pad + row[c]) << (c + 1 < row.size() ? "  " : "\n");
    }
  }
  return os.str();
}

}  // namespace adp
