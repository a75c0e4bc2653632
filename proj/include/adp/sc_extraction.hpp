#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "adp/signal_model.hpp"

namespace adp {

struct PeakParams {
  double prominence = 0.15;
  Eigen::Index min_spacing = 5;
  std::size_t max_peaks = 10;

  void validate() const;
};

struct ScatteringCenter {
  Eigen::Index range_index = 0;
  double amplitude = 0.0;

  bool operator==(const ScatteringCenter&) const = default;
};

/// Scattering centers sorted by non-increasing amplitude, strongest = 1.
struct SCSignature {
  std::vector<ScatteringCenter> entries;
  Eigen::Index profile_len = 0;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
  bool operator==(const SCSignature&) const = default;
};

/// Topographic prominence of every local maximum in `x`; boundary cells count
/// only when strictly above their single neighbour, plateaus report their
/// first cell. Returned as (index, prominence) in ascending index order.
std::vector<std::pair<Eigen::Index, double>> peak_prominences(const Eigen::Ref<const Eigen::VectorXd>& x);

SCSignature detect_scattering_centers(const Eigen::Ref<const Eigen::VectorXd>& magnitude,
                                      const PeakParams& params = {});
SCSignature detect_scattering_centers(const RangeProfile& profile, const PeakParams& params = {});

/// Amplitude with exactly three decimals (round-half-to-even on the binary value).
std::string format_amplitude(double amplitude);

/// Prompt-facing rendering:
///   [
///     {'range index': 247, 'normalized amplitude': 1.000},
///     ...
///   ]
std::string textualize_signature(const SCSignature& sig);

}  // namespace adp
