#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adp/backends.hpp"
#include "adp/baselines.hpp"
#include "adp/prototypes.hpp"

namespace adp {

struct EpisodeSpec {
  std::size_t n_way = 3;
  std::size_t k_shot = 5;
  std::size_t n_query = 30;  // total over all classes
  std::uint64_t seed = 0;
  std::size_t episodes = 10;

  void validate() const;
};

struct LabeledSample {
  std::size_t dataset_index = 0;
  const RangeProfile* profile = nullptr;
  std::string label;
};

/// Support and query sets point into the dataset they were drawn from.
struct Episode {
  std::vector<LabeledSample> support;
  std::vector<LabeledSample> query;
  std::vector<std::string> classes;
  std::size_t index = 0;
};

/// Sorted distinct labels of a dataset. Unlabelled profiles are rejected.
std::vector<std::string> dataset_classes(const std::vector<RangeProfile>& dataset);

/// N classes without replacement, K supports per class, then a class-balanced
/// query set from the remaining samples (remainder to the first classes).
/// Deterministic in (spec.seed, spec.k_shot, episode_index).
Episode sample_episode(const std::vector<RangeProfile>& dataset, const EpisodeSpec& spec,
                       std::size_t episode_index);

struct PipelineResult {
  std::vector<QueryOutcome> outcomes;      // aligned with episode.query
  std::vector<PromptDocument> prompts;     // empty for baselines
  std::vector<Prototype> prototypes;
};

/// Context for one episode: candidates are the episode's classes, in order.
TaskContext episode_context(const Episode& episode, const TaskContext& basis);

PipelineResult run_adp_pipeline(const Episode& episode, const ClusterConfig& cfg, const PeakParams& peak,
                                Classifier& backend, const TaskContext& basis);
/// run_adp_pipeline with one prototype per class.
PipelineResult run_monolithic_pipeline(const Episode& episode, const ClusterConfig& cfg,
                                       const PeakParams& peak, Classifier& backend,
                                       const TaskContext& basis);

enum class Method { adp, monolithic, nearest_centroid, nn_correlation, linear_sgd, nn_signature };

std::string to_string(Method m);
Method parse_method(const std::string& s);
bool uses_backend(Method m);

struct MethodOptions {
  ClusterConfig cluster;
  PeakParams peak;
  MatchParams match;
  LinearSgdOptions sgd;
  TaskContext basis;
};

PipelineResult run_method(Method method, const Episode& episode, const MethodOptions& opts,
                          Classifier& backend, std::uint64_t method_seed);

struct ClassStats {
  std::string label;
  double precision = 0, recall = 0, f1 = 0;
  std::size_t support = 0;
};

struct EvalReport {
  double mean_acc = 0;   // percent, mean over episodes
  double macro_f1 = 0;   // percent, mean over episodes
  std::vector<std::string> labels;       // row/column order of `confusion`
  Eigen::MatrixXi confusion;             // truth x (labels + abstain column)
  std::vector<ClassStats> per_class;     // from the pooled confusion
  std::size_t abstentions = 0;
  std::size_t correct = 0, wrong = 0, total = 0;
  std::vector<double> per_episode;       // accuracy per episode (percent)
  std::vector<double> per_episode_f1;
};

struct EpisodeOutcome {
  std::size_t episode = 0;
  std::size_t k = 0;
  std::string method;
  std::string backend;
  std::vector<std::string> classes;
  std::vector<std::string> truth;
  std::vector<std::optional<std::string>> pred;  // nullopt = abstention
  std::size_t backend_failures = 0;
};

/// Metrics for a single episode's predictions over `classes`.
EvalReport compute_metrics(const std::vector<std::string>& classes, const std::vector<std::string>& truth,
                           const std::vector<std::optional<std::string>>& pred);
/// Episode-averaged accuracy and macro-F1 with a pooled confusion matrix.
EvalReport compute_metrics(const std::vector<EpisodeOutcome>& episodes);

struct SweepConfig {
  EpisodeSpec spec;                   // k_shot is replaced by each entry of k_values
  std::vector<std::size_t> k_values{1, 5, 10, 20};
  std::vector<Method> methods{Method::adp, Method::monolithic};
  MethodOptions options;
  std::size_t workers = 1;
};

struct SweepRow {
  std::string method;
  std::string backend;
  std::size_t k = 0;
  std::size_t episodes = 0;
  double mean_acc = 0, macro_f1 = 0;
  std::size_t abstentions = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;             // method-major, then K
  std::vector<EpisodeOutcome> details;    // sorted by (K, method, episode)
  std::vector<EvalReport> reports;        // aligned with rows
};

/// Seeds: episode contents from (seed, K, episode); method randomness from
/// (seed, K, method index, episode).
SweepResult k_sweep(const std::vector<RangeProfile>& dataset, const SweepConfig& cfg, Classifier& backend);

/// Re-aggregates stored per-episode outcomes into rows (method-major, then K).
SweepResult aggregate(std::vector<EpisodeOutcome> details, const std::vector<std::string>& method_order);

std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string sweep_table(const std::vector<SweepRow>& rows);

}  // namespace adp
