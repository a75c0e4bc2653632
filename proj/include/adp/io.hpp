#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "adp/backends.hpp"
#include "adp/evaluation.hpp"
#include "adp/prototypes.hpp"
#include "adp/signal_model.hpp"

namespace adp {

/// Everything a run needs; JSON keys mirror the field names.
struct RunConfig {
  RadarParamsd radar;
  PeakParams peak;
  ClusterConfig cluster;
  BackendConfig backend;
  MatchParams match;
  EpisodeSpec episode;
  LinearSgdOptions sgd;

  std::vector<std::size_t> k_values{1, 5, 10, 20};
  std::vector<std::string> methods{"adp", "monolithic"};
  std::string dataset_blurb = "measured HRRP scattering center data";

  // Synthetic dataset generation.
  std::size_t classes = 3;
  std::size_t aspects = 2;
  std::size_t per_aspect = 20;
  double snr_db = 20.0;
  std::string layout = "interleaved";

  std::filesystem::path dataset_in;
  std::filesystem::path prototypes_out;
  std::filesystem::path report_out;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Overlays the keys present in `j` onto `cfg`. Unknown keys are errors.
void merge_json(RunConfig& cfg, const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
std::string config_digest(const RunConfig& cfg);

struct Provenance {
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
};

nlohmann::json provenance_record(const Provenance& p);
bool is_provenance_record(const nlohmann::json& j);

/// Writes to a sibling temporary file, then renames over `path`.
void atomic_write(const std::filesystem::path& path, const std::string& content);

nlohmann::json profile_to_json(const RangeProfile& p, bool include_complex);
/// Throws ParseError(line) on schema violations.
RangeProfile profile_from_json(const nlohmann::json& j, std::size_t line);

void write_dataset(const std::filesystem::path& path, const std::vector<RangeProfile>& profiles,
                   const Provenance& prov, bool include_complex = false);
std::string dataset_jsonl(const std::vector<RangeProfile>& profiles, const Provenance& prov,
                          bool include_complex = false);
/// JSON Lines dataset; lengths must be uniform, magnitudes finite and >= 0.
std::vector<RangeProfile> load_dataset(const std::filesystem::path& path);
std::vector<RangeProfile> parse_dataset(const std::string& text);

nlohmann::json signature_to_json(const SCSignature& s);
SCSignature signature_from_json(const nlohmann::json& j);

nlohmann::json prototype_to_json(const Prototype& p, bool include_mean_profile);
Prototype prototype_from_json(const nlohmann::json& j);
void write_prototypes(const std::filesystem::path& path, const std::vector<Prototype>& protos,
                      const Provenance& prov, bool include_mean_profile = false);
std::vector<Prototype> load_prototypes(const std::filesystem::path& path);

nlohmann::json episode_to_json(const EpisodeOutcome& e);
EpisodeOutcome episode_from_json(const nlohmann::json& j);
std::string episodes_jsonl(const std::vector<EpisodeOutcome>& eps, const Provenance& prov);
std::vector<EpisodeOutcome> load_episodes(const std::filesystem::path& path);

nlohmann::json report_to_json(const EvalReport& r);

}  // namespace adp
