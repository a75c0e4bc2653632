#include "adp/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "adp/digest.hpp"

namespace adp {

namespace {

constexpr std::string_view kTaskDefinition =
    "**Task definition: You are a radar target recognition expert, skilled at identifying target "
    "types by a analyzing their scattering center characteristics. Your task is to accurately "
    "identify the target from a list of candidates based on the provided primary scattering center "
    "information (position index and relative amplitude).\n\n";

constexpr std::string_view kOverviewHead =
    "**Scattering Center Characteristics Overview: Scattering centers are the primary regions on a "
    "target where radar echo energy is concentrated. They typically correspond to geometric "
    "discontinuities, edges, corners, or strong reflective surfaces of the target. By analyzing the "
    "number of scattering centers, their relative positions (range bin indices), and their "
    "respective relative amplitudes, one can infer the target's size, shape, and structural "
    "features. In this task, the provided scattering center information is extracted from a 1D "
    "High-Resolution Range Profile (HRRP) of length ";
constexpr std::string_view kOverviewTail =
    " and is sorted in descending order of amplitude. The 'position index' starts counting from 0, "
    "representing the position in the original HRRP sequence. The 'relative amplitude' is "
    "normalized (e.g., the maximum value is 1).\n\n";

constexpr std::string_view kReasoningHead =
    "**Reasoning Steps and Requirements:\n"
    "1. **Examine Test Sample Scattering Centers**: Carefully observe the data provided in the "
    "'Test Sample Scattering Centers' section. Focus on:\n"
    "    * The number of detected scattering centers.\n"
    "    * The positional indices and relative amplitudes of the strongest few scattering centers.\n"
    "    * The approximate distribution pattern of scattering centers across the entire target "
    "length (0 to ";
constexpr std::string_view kReasoningTail =
    ") (e.g., concentrated at the front, rear, evenly distributed, etc.).\n"
    "2. **Reference Neighboring/Support Samples (if provided)**: Compare the scattering center "
    "features of the test sample with those of known class samples in the 'Neighboring Training "
    "Sample Reference'.\n"
    "    * Note the known class of each reference sample and compare the similarity of its "
    "scattering center pattern to the test sample.\n"
    "3. **Make a Comprehensive Judgment**: Based on your understanding of scattering center "
    "distribution patterns for different target types and the comparison with reference samples, "
    "determine which candidate class the test sample most closely matches.\n"
    "4. **Output Format**:\n"
    "    * On the first line of your response, please clearly state the predicted target class in "
    "the format: 'Predicted Target Class: [Fill in one of the candidate class names here]'\n"
    "    * In subsequent lines, briefly state your main reasons for this judgment, e.g., based on "
    "the number, position, or specific pattern of scattering centers, or similarity to a "
    "reference sample.\n\n";

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

bool is_word_char(char ch) { return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_'; }

// Earliest whole-word occurrence of any candidate in `haystack` (already
// lower-case). Longer candidates win ties at the same position.
std::optional<std::size_t> earliest_mention(const std::string& haystack,
                                            const std::vector<std::string>& lowered) {
  std::optional<std::size_t> best;
  std::size_t best_pos = std::string::npos;
  for (std::size_t c = 0; c < lowered.size(); ++c) {
    const auto& needle = lowered[c];
    if (needle.empty()) continue;
    for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) {
      const bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
      const auto end = pos + needle.size();
      const bool right_ok = end >= haystack.size() || !is_word_char(haystack[end]);
      if (!(left_ok && right_ok)) continue;
      if (pos < best_pos || (pos == best_pos && needle.size() > lowered[*best].size())) {
        best_pos = pos;
        best = c;
      }
      break;
    }
  }
  return best;
}

std::string strip_decorations(std::string_view s) {
  constexpr std::string_view junk = " \t\r\n*\"'`[](){}<>.,;:!?";
  const auto b = s.find_first_not_of(junk);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(junk);
  return std::string(s.substr(b, e - b + 1));
}

std::string trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(ws) - b + 1));
}

}  // namespace

void TaskContext::validate() const {
  if (candidate_classes.empty()) throw InvalidParameter("no candidate classes");
  std::set<std::string> seen;
  for (const auto& c : candidate_classes) {
    if (c.empty()) throw InvalidParameter("empty candidate class name");
    if (!seen.insert(c).second) throw InvalidParameter("duplicate candidate class '" + c + "'");
  }
}

const std::vector<std::string>& prompt_headers() {
  static const std::vector<std::string> headers = {
      "**Task definition:",
      "**Scattering Center Characteristics Overview:",
      "**Current Dataset and Task:",
      "**Reasoning Steps and Requirements:",
      "**Neighboring Training Sample Reference (Support Set Prototypes):",
      "**Test Sample Scattering Centers (Please predict based on this):**",
  };
  return headers;
}

PromptDocument assemble_prompt(const TaskContext& ctx, const std::vector<Prototype>& prototypes,
                               const SCSignature& query) {
  ctx.validate();
  if (prototypes.empty()) throw InvalidParameter("no prototypes to reference");

  auto class_rank = [&](const std::string& label) -> std::size_t {
    const auto it = std::find(ctx.candidate_classes.begin(), ctx.candidate_classes.end(), label);
    if (it == ctx.candidate_classes.end())
      throw InvalidParameter("prototype class '" + label + "' is not a candidate");
    return static_cast<std::size_t>(it - ctx.candidate_classes.begin());
  };
  std::vector<const Prototype*> ordered;
  for (const auto& p : prototypes) {
    class_rank(p.class_label);
    ordered.push_back(&p);
  }
  std::stable_sort(ordered.begin(), ordered.end(), [&](const Prototype* a, const Prototype* b) {
    const auto ra = class_rank(a->class_label), rb = class_rank(b->class_label);
    return ra != rb ? ra < rb : a->cluster_id < b->cluster_id;
  });

  PromptDocument doc;
  std::string& t = doc.text;
  t += kTaskDefinition;
  t += kOverviewHead;
  t += std::to_string(ctx.profile_len);
  t += kOverviewTail;

  t += "**Current Dataset and Task:\nThe data currently being analyzed originates from **";
  t += ctx.dataset_blurb;
  t += "**. Candidate target classes include: ";
  for (std::size_t i = 0; i < ctx.candidate_classes.size(); ++i) {
    if (i) t += ", ";
    t += "'" + ctx.candidate_classes[i] + "'";
  }
  t += ".\n\n";

  t += kReasoningHead;
  t += std::to_string(std::max<Eigen::Index>(0, ctx.profile_len - 1));
  t += kReasoningTail;

  t += "**Neighboring Training Sample Reference (Support Set Prototypes):\n\n";
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const auto& p = *ordered[i];
    t += "--- Reference Prototype " + std::to_string(i + 1) + " ---\n";
    t += "Known Target Class: '" + p.class_label + "'\n";
    t += "Its primary scattering center information:\n";
    t += textualize_signature(p.signature);
    t += "\n\n";
    doc.prototype_order.emplace_back(p.class_label, p.cluster_id);
  }

  const auto query_text = textualize_signature(query);
  t += "**Test Sample Scattering Centers (Please predict based on this):**\n";
  t += query_text;
  t += "\n\nPlease strictly follow the output format requirements.\n";
  t += kPromptTerminalLine;

  doc.query_hash = sha256_hex(query_text);
  return doc;
}

Verdict parse_verdict(std::string_view response, const TaskContext& ctx) {
  std::vector<std::string> lowered;
  for (const auto& c : ctx.candidate_classes) lowered.push_back(lower(c));

  Verdict v;
  v.raw = std::string(response);
  const std::string text_lower = lower(response);
  static constexpr std::string_view marker = "predicted target class:";

  // Header line first.
  std::size_t line_start = 0;
  while (line_start <= text_lower.size()) {
    auto line_end = text_lower.find('\n', line_start);
    if (line_end == std::string::npos) line_end = text_lower.size();
    const std::string_view line(text_lower.data() + line_start, line_end - line_start);
    const auto at = line.find(marker);
    if (at != std::string_view::npos) {
      const auto answer = strip_decorations(line.substr(at + marker.size()));
      std::optional<std::size_t> hit;
      for (std::size_t c = 0; c < lowered.size() && !hit; ++c)
        if (answer == lowered[c]) hit = c;
      if (!hit) hit = earliest_mention(answer, lowered);
      if (hit) {
        v.predicted = ctx.candidate_classes[*hit];
        v.rationale = line_end < response.size() ? trim(response.substr(line_end + 1)) : std::string();
        return v;
      }
      break;
    }
    line_start = line_end + 1;
  }

  if (const auto hit = earliest_mention(text_lower, lowered)) {
    v.predicted = ctx.candidate_classes[*hit];
    v.rationale = trim(response);
    return v;
  }
  throw UnparseableVerdict("no candidate class found in response");
}

}  // namespace adp
