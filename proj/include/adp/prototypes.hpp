#pragma once

#include <string>
#include <vector>

#include "adp/kmeans.hpp"
#include "adp/sc_extraction.hpp"
#include "adp/signal_model.hpp"

namespace adp {

enum class KPolicy { fixed, sqrt_rule, silhouette };

struct ClusterConfig {
  KPolicy policy = KPolicy::sqrt_rule;
  Eigen::Index fixed_k = 1;  // used when policy == fixed
  int max_iter = 100;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  int restarts = 8;

  static ClusterConfig fixed(Eigen::Index k) {
    ClusterConfig c;
    c.policy = KPolicy::fixed;
    c.fixed_k = k;
    return c;
  }

  void validate() const;
  KMeansOptions kmeans_options() const { return {max_iter, tol, seed, restarts}; }
};

std::string to_string(KPolicy p);
KPolicy parse_k_policy(const std::string& s);

/// One aspect-cluster representative of a class.
struct Prototype {
  std::string class_label;
  Eigen::Index cluster_id = 0;
  Eigen::Index member_count = 0;
  Eigen::VectorXd mean_profile;
  SCSignature signature;
};

/// Max-normalized magnitude; an all-zero profile maps to zeros.
Eigen::VectorXd embed_sample(const RangeProfile& profile);
/// Embeddings stacked as rows. All profiles must share one length.
RowMatrix<double> embed_samples(const std::vector<RangeProfile>& profiles);

/// Cluster count for `support_count` samples. The silhouette policy needs the
/// data, so this overload only accepts it when support_count < 4.
Eigen::Index choose_k(Eigen::Index support_count, const ClusterConfig& cfg);
Eigen::Index choose_k(const Eigen::Ref<const RowMatrix<double>>& embeddings, const ClusterConfig& cfg);

KMeansResult<double> cluster_supports(const Eigen::Ref<const RowMatrix<double>>& embeddings,
                                      Eigen::Index k, const ClusterConfig& cfg);

std::vector<Prototype> build_prototypes(const std::string& class_label,
                                        const std::vector<RangeProfile>& supports,
                                        const ClusterConfig& cfg, const PeakParams& peak);

}  // namespace adp
