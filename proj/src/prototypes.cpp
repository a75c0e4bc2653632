#include "adp/prototypes.hpp"

#include <numeric>

#include <cmath>

namespace adp {

void ClusterConfig::validate() const {
  if (policy == KPolicy::fixed && fixed_k < 1) throw InvalidParameter("fixed k must be >= 1");
  if (max_iter < 1) throw InvalidParameter("max_iter must be >= 1");
  if (restarts < 1) throw InvalidParameter("restarts must be >= 1");
  if (!(tol >= 0)) throw InvalidParameter("tol must be >= 0");
}

std::string to_string(KPolicy p) {
  switch (p) {
    case KPolicy::fixed: return "fixed";
    case KPolicy::sqrt_rule: return "sqrt";
    case KPolicy::silhouette: return "silhouette";
  }
  return "?";
}

KPolicy parse_k_policy(const std::string& s) {
  if (s == "fixed") return KPolicy::fixed;
  if (s == "sqrt" || s == "sqrt_rule") return KPolicy::sqrt_rule;
  if (s == "silhouette") return KPolicy::silhouette;
  throw InvalidParameter("unknown k policy '" + s + "'");
}

Eigen::VectorXd embed_sample(const RangeProfile& profile) {
  if (profile.magnitude.size() == 0) throw InvalidParameter("profile has no magnitude samples");
  const double peak = profile.magnitude.maxCoeff();
  if (!(peak > 0.0)) return Eigen::VectorXd::Zero(profile.magnitude.size());
  return profile.magnitude / peak;
}

RowMatrix<double> embed_samples(const std::vector<RangeProfile>& profiles) {
  if (profiles.empty()) return {};
  const Eigen::Index d = profiles.front().cells();
  RowMatrix<double> out(static_cast<Eigen::Index>(profiles.size()), d);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (profiles[i].cells() != d) throw InvalidParameter("support profiles have mixed lengths");
    out.row(static_cast<Eigen::Index>(i)) = embed_sample(profiles[i]).transpose();
  }
  return out;
}

Eigen::Index choose_k(Eigen::Index support_count, const ClusterConfig& cfg) {
  if (support_count < 1) throw InvalidParameter("support count must be >= 1");
  switch (cfg.policy) {
    case KPolicy::fixed:
      return std::min(cfg.fixed_k, support_count);
    case KPolicy::sqrt_rule: {
      const auto r = static_cast<Eigen::Index>(std::lround(std::sqrt(static_cast<double>(support_count))));
      return std::min(support_count, std::max<Eigen::Index>(1, r));
    }
    case KPolicy::silhouette:
      if (support_count < 4) return 1;
      throw InvalidParameter("silhouette policy needs the support embeddings");
  }
  return 1;
}

Eigen::Index choose_k(const Eigen::Ref<const RowMatrix<double>>& embeddings, const ClusterConfig& cfg) {
  const Eigen::Index count = embeddings.rows();
  if (cfg.policy != KPolicy::silhouette || count < 4) return choose_k(count, cfg);
  Eigen::Index best_k = 2;
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 2; k <= std::min<Eigen::Index>(count - 1, 6); ++k) {
    const auto res = kmeans<double>(embeddings, k, cfg.kmeans_options());
    const double s = mean_silhouette<double>(embeddings, res.assignment, k);
    if (s > best) {
      best = s;
      best_k = k;
    }
  }
  return best_k;
}

KMeansResult<double> cluster_supports(const Eigen::Ref<const RowMatrix<double>>& embeddings,
                                      Eigen::Index k, const ClusterConfig& cfg) {
  cfg.validate();
  // Cluster in lexicographic row order so the result does not depend on support order.
  const Eigen::Index n = embeddings.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const auto ra = embeddings.row(a), rb = embeddings.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  RowMatrix<double> sorted(n, embeddings.cols());
  for (Eigen::Index i = 0; i < n; ++i) sorted.row(i) = embeddings.row(order[static_cast<std::size_t>(i)]);

  auto res = kmeans<double>(sorted, k, cfg.kmeans_options());
  std::vector<Eigen::Index> assignment(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    assignment[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = res.assignment[static_cast<std::size_t>(i)];
  res.assignment = std::move(assignment);
  return res;
}

std::vector<Prototype> build_prototypes(const std::string& class_label,
                                        const std::vector<RangeProfile>& supports,
                                        const ClusterConfig& cfg, const PeakParams& peak) {
  if (supports.empty()) throw InvalidParameter("class '" + class_label + "' has no supports");
  cfg.validate();
  const auto emb = embed_samples(supports);
  const Eigen::Index k = choose_k(emb, cfg);
  const auto clusters = cluster_supports(emb, k, cfg);

  std::vector<Prototype> out(static_cast<std::size_t>(k));
  for (Eigen::Index c = 0; c < k; ++c) {
    auto& p = out[static_cast<std::size_t>(c)];
    p.class_label = class_label;
    p.cluster_id = c;
    p.mean_profile = Eigen::VectorXd::Zero(emb.cols());
  }
  for (std::size_t i = 0; i < clusters.assignment.size(); ++i) {
    auto& p = out[static_cast<std::size_t>(clusters.assignment[i])];
    p.mean_profile += emb.row(static_cast<Eigen::Index>(i)).transpose();
    ++p.member_count;
  }
  for (auto& p : out) {
    p.mean_profile /= static_cast<double>(p.member_count);
    p.signature = detect_scattering_centers(p.mean_profile, peak);
  }
  return out;
}

}  // namespace adp
