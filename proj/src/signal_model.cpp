#include "adp/signal_model.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace adp {

RangeModel::RangeModel(const RadarParamsd& params)
    : params_(params), basis_(build_basis(params)), taper_(hamming_taper<double>(params.num_cells)) {}

Eigen::VectorXcd RangeModel::response(const ScattererSet& scatterers) const {
  Eigen::VectorXcd rho = Eigen::VectorXcd::Zero(cells());
  for (const auto& s : scatterers) {
    if (s.cell < 0 || s.cell >= cells())
      throw IndexError("scatterer cell " + std::to_string(s.cell) + " outside [0, " +
                       std::to_string(cells() - 1) + "]");
    rho += s.coeff * basis_.col(s.cell);
  }
  return rho;
}

Eigen::VectorXcd RangeModel::project(const Eigen::VectorXcd& rho) const {
  if (rho.size() != cells()) throw InvalidParameter("response length does not match num_cells");
  return basis_.adjoint() * rho / static_cast<double>(cells());
}

Eigen::VectorXd RangeModel::range_magnitude(const Eigen::VectorXcd& rho) const {
  if (rho.size() != cells()) throw InvalidParameter("response length does not match num_cells");
  const Eigen::VectorXcd tapered = taper_.cast<std::complex<double>>().cwiseProduct(rho);
  return (basis_.adjoint() * tapered).cwiseAbs() / taper_.sum();
}

RangeProfile synthesize_profile(const ScattererSet& scatterers, const RangeModel& model,
                                double noise_sigma, std::uint64_t seed) {
  if (!(noise_sigma >= 0.0)) throw InvalidParameter("noise_sigma must be >= 0");
  RangeProfile out;
  out.values = model.response(scatterers);
  if (noise_sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, noise_sigma);
    for (Eigen::Index k = 0; k < out.values.size(); ++k) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      out.values(k) += std::complex<double>(re, im);
    }
  }
  out.magnitude = model.range_magnitude(out.values);
  out.source = ProfileSource::synthetic;
  return out;
}

RangeProfile synthesize_profile(const ScattererSet& scatterers, const RadarParamsd& params,
                                double noise_sigma, std::uint64_t seed) {
  return synthesize_profile(scatterers, RangeModel(params), noise_sigma, seed);
}

ScattererSet jitter_scatterers(const ScattererSet& base, Eigen::Index num_cells,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> shift(-1, 1);
  std::uniform_real_distribution<double> gain(0.9, 1.1);
  ScattererSet out;
  out.reserve(base.size());
  for (const auto& s : base) {
    const Eigen::Index moved = std::clamp<Eigen::Index>(s.cell + shift(rng), 0, num_cells - 1);
    const double g = gain(rng);
    out.push_back({moved, s.coeff * g});
  }
  return out;
}

std::size_t nearest_mode(const SyntheticClassSpec& spec, double aspect_deg) {
  if (spec.modes.empty()) throw InvalidParameter("class '" + spec.name + "' has no aspect modes");
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spec.modes.size(); ++i) {
    double d = std::fmod(std::abs(spec.modes[i].center_deg - aspect_deg), 360.0);
    d = std::min(d, 360.0 - d);
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return best;
}

double noise_sigma_for_snr(const Eigen::VectorXcd& clean, double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  if (std::isnan(snr_db)) throw InvalidParameter("snr_db is NaN");
  const double signal_power = clean.squaredNorm() / static_cast<double>(clean.size());
  const double noise_power = signal_power / std::pow(10.0, snr_db / 10.0);
  return std::sqrt(noise_power / 2.0);
}

std::vector<RangeProfile> generate_aspect_dataset(const std::vector<SyntheticClassSpec>& specs,
                                                  const std::vector<double>& aspects,
                                                  std::size_t per_aspect_count,
                                                  const RadarParamsd& params, double snr_db,
                                                  std::uint64_t seed) {
  if (specs.empty()) throw InvalidParameter("no synthetic class specs given");
  if (aspects.empty()) throw InvalidParameter("no aspects given");
  for (const auto& spec : specs) {
    if (spec.modes.empty())
      throw InvalidParameter("class '" + spec.name + "' has no aspect modes");
  }
  const RangeModel model(params);

  std::vector<RangeProfile> out;
  out.reserve(specs.size() * aspects.size() * per_aspect_count);
  for (std::size_t c = 0; c < specs.size(); ++c) {
    for (std::size_t a = 0; a < aspects.size(); ++a) {
      const auto& mode = specs[c].modes[nearest_mode(specs[c], aspects[a])];
      for (std::size_t r = 0; r < per_aspect_count; ++r) {
        const auto jittered =
            jitter_scatterers(mode.scatterers, params.num_cells, derive_seed({seed, c, a, r, 0}));
        const double sigma = noise_sigma_for_snr(model.response(jittered), snr_db);
        auto profile = synthesize_profile(jittered, model, sigma, derive_seed({seed, c, a, r, 1}));
        profile.label = specs[c].name;
        profile.aspect_deg = aspects[a];
        out.push_back(std::move(profile));
      }
    }
  }
  return out;
}

std::vector<double> default_aspects(std::size_t n_modes) {
  std::vector<double> out(n_modes);
  for (std::size_t i = 0; i < n_modes; ++i) out[i] = 30.0 * static_cast<double>(i);
  return out;
}

namespace {

std::string class_name(std::size_t i) { return "class" + std::to_string(i); }

using Partition = std::vector<std::vector<std::size_t>>;

Partition canonical(Partition p) {
  for (auto& part : p) std::sort(part.begin(), part.end());
  std::sort(p.begin(), p.end());
  return p;
}

// Number of ways to split g labelled items into m unlabelled equal parts.
double partition_count(std::size_t g, std::size_t m) {
  double count = std::tgamma(static_cast<double>(g) + 1.0);
  const double part = std::tgamma(static_cast<double>(g / m) + 1.0);
  for (std::size_t i = 0; i < m; ++i) count /= part;
  return count / std::tgamma(static_cast<double>(m) + 1.0);
}

}  // namespace

std::vector<SyntheticClassSpec> interleaved_classes(std::size_t n_classes, std::size_t n_modes,
                                                    Eigen::Index num_cells, std::uint64_t seed) {
  if (n_classes < 1) throw InvalidParameter("need at least one class");
  if (n_modes < 2) throw InvalidParameter("interleaved layout needs at least two aspect modes");

  std::size_t groups = 2 * n_modes;
  while (partition_count(groups, n_modes) < static_cast<double>(n_classes)) groups += n_modes;

  const Eigen::Index margin = std::max<Eigen::Index>(8, num_cells / 10);
  const Eigen::Index band = num_cells - 2 * margin;
  const Eigen::Index width = band / static_cast<Eigen::Index>(groups);
  if (width < 16) throw InvalidParameter("num_cells too small for the interleaved layout");

  std::mt19937_64 rng(derive_seed({seed, 0x1a7e}));
  std::uniform_real_distribution<double> primary(0.6, 1.0);
  std::uniform_real_distribution<double> secondary(0.3, 0.55);
  std::uniform_int_distribution<Eigen::Index> offset(8, std::min<Eigen::Index>(14, width - 4));

  std::vector<ScattererSet> pool(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const Eigen::Index base = margin + static_cast<Eigen::Index>(g) * width + 2;
    pool[g].push_back({base, {primary(rng), 0.0}});
    pool[g].push_back({base + offset(rng), {secondary(rng), 0.0}});
  }

  // Distinct partitions of the group pool, one per class.
  std::vector<std::size_t> order(groups);
  for (std::size_t g = 0; g < groups; ++g) order[g] = g;
  std::set<Partition> seen;
  std::vector<Partition> chosen;
  const std::size_t per_mode = groups / n_modes;
  for (int attempt = 0; chosen.size() < n_classes && attempt < 100000; ++attempt) {
    std::shuffle(order.begin(), order.end(), rng);
    Partition p(n_modes);
    for (std::size_t m = 0; m < n_modes; ++m)
      p[m].assign(order.begin() + static_cast<std::ptrdiff_t>(m * per_mode),
                  order.begin() + static_cast<std::ptrdiff_t>((m + 1) * per_mode));
    if (seen.insert(canonical(p)).second) chosen.push_back(p);
  }
  if (chosen.size() < n_classes) throw InvalidParameter("could not build distinct class layouts");

  const auto centers = default_aspects(n_modes);
  std::vector<SyntheticClassSpec> out(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    out[c].name = class_name(c);
    for (std::size_t m = 0; m < n_modes; ++m) {
      AspectMode mode;
      mode.center_deg = centers[m];
      for (auto g : chosen[c][m]) mode.scatterers.insert(mode.scatterers.end(), pool[g].begin(), pool[g].end());
      std::sort(mode.scatterers.begin(), mode.scatterers.end(),
                [](const Scatterer& a, const Scatterer& b) { return a.cell < b.cell; });
      out[c].modes.push_back(std::move(mode));
    }
  }
  return out;
}

std::vector<SyntheticClassSpec> separable_classes(std::size_t n_classes, std::size_t n_modes,
                                                  Eigen::Index num_cells, std::uint64_t seed) {
  if (n_classes < 1) throw InvalidParameter("need at least one class");
  if (n_modes < 1) throw InvalidParameter("need at least one aspect mode");
  const Eigen::Index margin = std::max<Eigen::Index>(8, num_cells / 10);
  const Eigen::Index band = num_cells - 2 * margin;
  const Eigen::Index width = band / static_cast<Eigen::Index>(n_classes);
  if (width < 40) throw InvalidParameter("num_cells too small for the separable layout");

  std::mt19937_64 rng(derive_seed({seed, 0x5e9a}));
  std::uniform_real_distribution<double> amp(0.3, 0.9);
  const auto centers = default_aspects(n_modes);
  std::vector<SyntheticClassSpec> out(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    out[c].name = class_name(c);
    const Eigen::Index lo = margin + static_cast<Eigen::Index>(c) * width;
    // Four scatterers, 12 cells apart, jittered start inside the class's own band.
    std::uniform_int_distribution<Eigen::Index> start(lo + 2, lo + width - 38);
    ScattererSet pattern;
    const Eigen::Index s0 = start(rng);
    const auto dominant = std::uniform_int_distribution<int>(0, 3)(rng);
    for (int i = 0; i < 4; ++i)
      pattern.push_back({s0 + 12 * i, {i == dominant ? 1.0 : amp(rng), 0.0}});
    for (std::size_t m = 0; m < n_modes; ++m) out[c].modes.push_back({centers[m], pattern});
  }
  return out;
}

}  // namespace adp
