#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "adp/common.hpp"

namespace adp {

template <typename Scalar>
using VectorXc = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixXc = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

/// Stepped-frequency waveform constants. The chirp rate is always derived.
template <typename Scalar = double>
struct RadarParams {
  Scalar carrier_hz = Scalar(5.52e9);
  Scalar bandwidth_hz = Scalar(400e6);
  Scalar pulse_width_s = Scalar(10e-6);
  Eigen::Index num_cells = 306;
  Scalar freq_step_hz = Scalar(400e6) / Scalar(306);

  Scalar chirp_rate() const { return bandwidth_hz / pulse_width_s; }

  void validate() const {
    if (!(bandwidth_hz > 0)) throw InvalidParameter("bandwidth_hz must be > 0");
    if (!(pulse_width_s > 0)) throw InvalidParameter("pulse_width_s must be > 0");
    if (num_cells < 1) throw InvalidParameter("num_cells must be >= 1");
    if (!(freq_step_hz > 0)) throw InvalidParameter("freq_step_hz must be > 0");
  }

  /// Frequency step B/N, which turns the basis into a (conjugate) DFT matrix.
  static RadarParams dft_aligned(Scalar bandwidth, Eigen::Index cells) {
    RadarParams p;
    p.bandwidth_hz = bandwidth;
    p.num_cells = cells;
    p.freq_step_hz = bandwidth / Scalar(cells);
    return p;
  }
};

using RadarParamsd = RadarParams<double>;

template <typename Scalar>
Scalar range_resolution(const RadarParams<Scalar>& params) {
  if (!(params.bandwidth_hz > 0)) throw InvalidParameter("bandwidth_hz must be > 0");
  return Scalar(kSpeedOfLight) / (Scalar(2) * params.bandwidth_hz);
}

/// phi(R)_k = exp(-j (4 pi / c) R k dw), k = 0..N-1.
template <typename Scalar>
VectorXc<Scalar> fourier_basis_column(Scalar range_m, const RadarParams<Scalar>& params) {
  params.validate();
  const Scalar step = Scalar(4) * std::numbers::pi_v<Scalar> / Scalar(kSpeedOfLight) * range_m *
                      params.freq_step_hz;
  VectorXc<Scalar> col(params.num_cells);
  col(0) = std::complex<Scalar>(1, 0);
  for (Eigen::Index k = 1; k < params.num_cells; ++k) {
    // Reduce the phase before evaluating so large k*step keeps full precision.
    const Scalar phase = std::remainder(step * Scalar(k), Scalar(2) * std::numbers::pi_v<Scalar>);
    col(k) = std::polar(Scalar(1), -phase);
  }
  return col;
}

/// Phi = [phi(0), phi(dR), ..., phi((N-1) dR)].
template <typename Scalar>
MatrixXc<Scalar> build_basis(const RadarParams<Scalar>& params) {
  params.validate();
  const Scalar dr = range_resolution(params);
  MatrixXc<Scalar> phi(params.num_cells, params.num_cells);
  for (Eigen::Index n = 0; n < params.num_cells; ++n)
    phi.col(n) = fourier_basis_column(Scalar(n) * dr, params);
  return phi;
}

/// Periodic Hamming taper applied across frequency samples before range compression.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> hamming_taper(Eigen::Index n) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w(n);
  for (Eigen::Index k = 0; k < n; ++k)
    w(k) = Scalar(0.54) - Scalar(0.46) * std::cos(Scalar(2) * std::numbers::pi_v<Scalar> *
                                                  Scalar(k) / Scalar(n));
  return w;
}

struct Scatterer {
  Eigen::Index cell = 0;
  std::complex<double> coeff{1.0, 0.0};
};

/// Cell-aligned point scatterers; range of entry i is cell * dR.
using ScattererSet = std::vector<Scatterer>;

enum class ProfileSource { synthetic, loaded };

/// One HRRP sample. `values` is the stepped-frequency response rho (may be
/// empty for loaded profiles); `magnitude` is the range-cell amplitude.
struct RangeProfile {
  Eigen::VectorXcd values;
  Eigen::VectorXd magnitude;
  std::optional<std::string> label;
  std::optional<double> aspect_deg;
  ProfileSource source = ProfileSource::synthetic;

  Eigen::Index cells() const { return magnitude.size(); }
};

/// Radar parameters together with their cached basis matrix.
class RangeModel {
 public:
  explicit RangeModel(const RadarParamsd& params);

  const RadarParamsd& params() const { return params_; }
  const Eigen::MatrixXcd& basis() const { return basis_; }
  Eigen::Index cells() const { return params_.num_cells; }

  /// Phi * Omega for a sparse scatterer set.
  Eigen::VectorXcd response(const ScattererSet& scatterers) const;
  /// Phi^H rho / N.
  Eigen::VectorXcd project(const Eigen::VectorXcd& rho) const;
  /// |Phi^H (w .* rho)| / sum(w) with the Hamming taper w.
  Eigen::VectorXd range_magnitude(const Eigen::VectorXcd& rho) const;

 private:
  RadarParamsd params_;
  Eigen::MatrixXcd basis_;
  Eigen::VectorXd taper_;
};

/// rho = Phi * Omega + eta, eta circular complex Gaussian with per-component
/// std `noise_sigma`, drawn from mt19937_64(seed).
RangeProfile synthesize_profile(const ScattererSet& scatterers, const RangeModel& model,
                                double noise_sigma, std::uint64_t seed);
RangeProfile synthesize_profile(const ScattererSet& scatterers, const RadarParamsd& params,
                                double noise_sigma, std::uint64_t seed);

struct AspectMode {
  double center_deg = 0.0;
  ScattererSet scatterers;
};

struct SyntheticClassSpec {
  std::string name;
  std::vector<AspectMode> modes;
};

/// Per-sample variation: each cell moves by an integer in [-1, 1] (clamped to
/// the profile) and each coefficient is scaled by U[0.9, 1.1].
ScattererSet jitter_scatterers(const ScattererSet& base, Eigen::Index num_cells,
                               std::uint64_t seed);

/// Index of the mode whose center is nearest to `aspect_deg` (circular distance).
std::size_t nearest_mode(const SyntheticClassSpec& spec, double aspect_deg);

/// Noise std giving mean |signal|^2 / (2 sigma^2) = 10^(snr_db/10). +inf gives 0.
double noise_sigma_for_snr(const Eigen::VectorXcd& clean, double snr_db);

/// For class c, aspect a, repetition r: jitter seed derive_seed({seed,c,a,r,0}),
/// noise seed derive_seed({seed,c,a,r,1}). Output order is class-major.
std::vector<RangeProfile> generate_aspect_dataset(const std::vector<SyntheticClassSpec>& specs,
                                                  const std::vector<double>& aspects,
                                                  std::size_t per_aspect_count,
                                                  const RadarParamsd& params, double snr_db,
                                                  std::uint64_t seed);

/// Classes whose aspect modes partition a shared pool of scatterer groups
/// differently, so per-class averages over aspects look alike.
std::vector<SyntheticClassSpec> interleaved_classes(std::size_t n_classes, std::size_t n_modes,
                                                    Eigen::Index num_cells, std::uint64_t seed);

/// Classes with one distinct scatterer pattern each, shared by every aspect.
std::vector<SyntheticClassSpec> separable_classes(std::size_t n_classes, std::size_t n_modes,
                                                  Eigen::Index num_cells, std::uint64_t seed);

/// Mode centers used by the layouts above: 0, 30, 60, ... degrees.
std::vector<double> default_aspects(std::size_t n_modes);

}  // namespace adp
