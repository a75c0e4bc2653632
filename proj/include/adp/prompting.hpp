#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adp/prototypes.hpp"
#include "adp/sc_extraction.hpp"

namespace adp {

struct TaskContext {
  std::vector<std::string> candidate_classes;
  std::string dataset_blurb = "measured HRRP scattering center data";
  Eigen::Index profile_len = 0;
  std::string model_tag;

  void validate() const;
};

struct PromptDocument {
  std::string text;
  std::vector<std::pair<std::string, Eigen::Index>> prototype_order;
  std::string query_hash;  // sha256 of the textualized query
};

struct Verdict {
  std::string predicted;
  std::string rationale;
  std::string raw;
};

/// Section headers in the order they appear in every prompt.
const std::vector<std::string>& prompt_headers();
inline constexpr std::string_view kPromptTerminalLine = "Predicted Target Class:";

/// Four-part in-context prompt: task and scattering-center background,
/// dataset and candidates, reasoning steps with output rules, then one
/// reference block per prototype (class-major, cluster-minor) and the query.
PromptDocument assemble_prompt(const TaskContext& ctx, const std::vector<Prototype>& prototypes,
                               const SCSignature& query);

/// Extracts the predicted class from a model response. Throws
/// UnparseableVerdict when no candidate class can be found.
Verdict parse_verdict(std::string_view response, const TaskContext& ctx);

}  // namespace adp
