#include "adp/sc_extraction.hpp"

#include <algorithm>
#include <cfenv>
#include <cstdio>

namespace adp {

void PeakParams::validate() const {
  if (!(prominence > 0.0 && prominence <= 1.0)) throw InvalidParameter("prominence must be in (0, 1]");
  if (min_spacing < 1) throw InvalidParameter("min_spacing must be >= 1");
  if (max_peaks < 1) throw InvalidParameter("max_peaks must be >= 1");
}

std::vector<std::pair<Eigen::Index, double>> peak_prominences(
    const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::Index n = x.size();
  std::vector<std::pair<Eigen::Index, double>> out;
  if (n < 2) return out;

  for (Eigen::Index i = 0; i < n;) {
    // Flat run [i, j].
    Eigen::Index j = i;
    while (j + 1 < n && x(j + 1) == x(i)) ++j;
    const bool left_lower = i > 0 && x(i - 1) < x(i);
    const bool right_lower = j + 1 < n && x(j + 1) < x(i);
    bool is_peak = false;
    if (i == 0 && j == n - 1)
      is_peak = false;
    else if (i == 0)
      is_peak = j == 0 && right_lower;
    else if (j == n - 1)
      is_peak = i == n - 1 && left_lower;
    else
      is_peak = left_lower && right_lower;
    if (is_peak) {
      const double h = x(i);
      double left_min = h;
      for (Eigen::Index k = i; k >= 0 && x(k) <= h; --k) left_min = std::min(left_min, x(k));
      double right_min = h;
      for (Eigen::Index k = j; k < n && x(k) <= h; ++k) right_min = std::min(right_min, x(k));
      // An edge peak has terrain on one side only; that side alone sets the reference.
      const double base = i == 0 ? right_min : j == n - 1 ? left_min : std::max(left_min, right_min);
      out.emplace_back(i, h - base);
    }
    i = j + 1;
  }
  return out;
}

SCSignature detect_scattering_centers(const Eigen::Ref<const Eigen::VectorXd>& magnitude,
                                      const PeakParams& params) {
  params.validate();
  SCSignature sig;
  sig.profile_len = magnitude.size();
  if (magnitude.size() == 0) return sig;
  const double peak = magnitude.maxCoeff();
  if (!(peak > 0.0)) return sig;
  const Eigen::VectorXd x = magnitude / peak;

  std::vector<ScatteringCenter> candidates;
  for (const auto& [idx, prom] : peak_prominences(x))
    if (prom >= params.prominence) candidates.push_back({idx, x(idx)});

  // Descending height, equal heights in ascending index order.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.amplitude > b.amplitude; });
  for (const auto& c : candidates) {
    if (sig.entries.size() >= params.max_peaks) break;
    const bool clear = std::none_of(sig.entries.begin(), sig.entries.end(), [&](const auto& kept) {
      return std::abs(kept.range_index - c.range_index) < params.min_spacing;
    });
    if (clear) sig.entries.push_back(c);
  }
  if (!sig.entries.empty()) {
    const double top = sig.entries.front().amplitude;
    for (auto& e : sig.entries) e.amplitude /= top;
    sig.entries.front().amplitude = 1.0;
  }
  return sig;
}

SCSignature detect_scattering_centers(const RangeProfile& profile, const PeakParams& params) {
  return detect_scattering_centers(profile.magnitude, params);
}

std::string format_amplitude(double amplitude) {
  // printf rounds the exact binary value using the current rounding mode.
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", amplitude);
  std::fesetround(saved);
  return buf;
}

std::string textualize_signature(const SCSignature& sig) {
  if (sig.entries.empty()) return "[]";
  std::string out = "[\n";
  for (std::size_t i = 0; i < sig.entries.size(); ++i) {
    out += "  {'range index': " + std::to_string(sig.entries[i].range_index) +
           ", 'normalized amplitude': " + format_amplitude(sig.entries[i].amplitude) + "}";
    out += (i + 1 < sig.entries.size()) ? ",\n" : "\n";
  }
  out += "]";
  return out;
}

}  // namespace adp
