#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adp/backends.hpp"
#include "adp/kmeans.hpp"

namespace adp {

// Conventional few-shot baselines over max-normalized magnitudes. They stand
// in for the SVM/RF comparisons and are reported as analogues.

/// Class-mean template matching (squared Euclidean). Ties go to the earlier class.
std::vector<std::string> nearest_centroid(const RowMatrix<double>& support, const std::vector<std::string>& support_labels,
                                          const RowMatrix<double>& queries, const std::vector<std::string>& classes);

/// 1 - Pearson correlation; constant vectors sit at distance 1 from everything.
double correlation_distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                            const Eigen::Ref<const Eigen::RowVectorXd>& b);

std::vector<std::string> nearest_neighbor_correlation(const RowMatrix<double>& support,
                                                      const std::vector<std::string>& support_labels,
                                                      const RowMatrix<double>& queries);

struct LinearSgdOptions {
  int epochs = 50;
  double step = 0.1;            // learning rate step / sqrt(t)
  double regularization = 1e-3;
  std::uint64_t seed = 0;
};

/// One-vs-rest linear classifier trained with hinge-loss SGD.
class LinearSgdClassifier {
 public:
  void fit(const RowMatrix<double>& x, const std::vector<std::string>& labels,
           const std::vector<std::string>& classes, const LinearSgdOptions& opts);
  std::vector<std::string> predict(const RowMatrix<double>& x) const;
  /// Row c holds [w_c, b_c].
  const Eigen::MatrixXd& weights() const { return weights_; }

 private:
  std::vector<std::string> classes_;
  Eigen::MatrixXd weights_;
};

/// 1-NN over surrogate_score between scattering-center signatures.
std::vector<std::string> nearest_neighbor_signature(const std::vector<SCSignature>& support,
                                                    const std::vector<std::string>& support_labels,
                                                    const std::vector<SCSignature>& queries,
                                                    const MatchParams& mp);

}  // namespace adp
