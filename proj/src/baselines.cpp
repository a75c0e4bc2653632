#include "adp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace adp {

std::vector<std::string> nearest_centroid(const RowMatrix<double>& support, const std::vector<std::string>& support_labels,
                                          const RowMatrix<double>& queries, const std::vector<std::string>& classes) {
  RowMatrix<double> centroids = RowMatrix<double>::Zero(static_cast<Eigen::Index>(classes.size()), support.cols());
  std::vector<double> counts(classes.size(), 0.0);
  for (Eigen::Index i = 0; i < support.rows(); ++i) {
    const auto it = std::find(classes.begin(), classes.end(), support_labels[static_cast<std::size_t>(i)]);
    if (it == classes.end()) throw InvalidParameter("support label outside the class list");
    const auto c = static_cast<std::size_t>(it - classes.begin());
    centroids.row(static_cast<Eigen::Index>(c)) += support.row(i);
    counts[c] += 1.0;
  }
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (counts[c] > 0) centroids.row(static_cast<Eigen::Index>(c)) /= counts[c];

  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes.size(); ++c) {
      if (counts[c] == 0) continue;
      const double d = (centroids.row(static_cast<Eigen::Index>(c)) - queries.row(q)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    out.push_back(classes[best]);
  }
  return out;
}

double correlation_distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                            const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  const Eigen::RowVectorXd da = a.array() - a.mean();
  const Eigen::RowVectorXd db = b.array() - b.mean();
  const double denom = da.norm() * db.norm();
  if (!(denom > 0)) return 1.0;
  return 1.0 - da.dot(db) / denom;
}

std::vector<std::string> nearest_neighbor_correlation(const RowMatrix<double>& support,
                                                      const std::vector<std::string>& support_labels,
                                                      const RowMatrix<double>& queries) {
  std::vector<std::string> out;
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index s = 0; s < support.rows(); ++s) {
      const double d = correlation_distance(queries.row(q), support.row(s));
      if (d < best_d) {
        best_d = d;
        best = s;
      }
    }
    out.push_back(support_labels[static_cast<std::size_t>(best)]);
  }
  return out;
}

void LinearSgdClassifier::fit(const RowMatrix<double>& x, const std::vector<std::string>& labels,
                              const std::vector<std::string>& classes, const LinearSgdOptions& opts) {
  if (x.rows() == 0) throw InvalidParameter("no training samples");
  classes_ = classes;
  const Eigen::Index d = x.cols();
  weights_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes.size()), d + 1);

  std::vector<std::size_t> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(opts.seed);

  for (std::size_t c = 0; c < classes.size(); ++c) {
    Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(d + 1);
    long t = 0;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (auto i : order) {
        ++t;
        const double eta = opts.step / std::sqrt(static_cast<double>(t));
        const double y = labels[i] == classes[c] ? 1.0 : -1.0;
        const auto row = x.row(static_cast<Eigen::Index>(i));
        const double margin = y * (w.head(d).dot(row) + w(d));
        w.head(d) *= (1.0 - eta * opts.regularization);
        if (margin < 1.0) {
          w.head(d) += eta * y * row;
          w(d) += eta * y;
        }
      }
    }
    weights_.row(static_cast<Eigen::Index>(c)) = w;
  }
}

std::vector<std::string> LinearSgdClassifier::predict(const RowMatrix<double>& x) const {
  const Eigen::Index d = x.cols();
  const Eigen::MatrixXd scores =
      (x * weights_.leftCols(d).transpose()).rowwise() + weights_.col(d).transpose();
  std::vector<std::string> out;
  for (Eigen::Index q = 0; q < scores.rows(); ++q) {
    Eigen::Index best = 0;
    scores.row(q).maxCoeff(&best);
    out.push_back(classes_[static_cast<std::size_t>(best)]);
  }
  return out;
}

std::vector<std::string> nearest_neighbor_signature(const std::vector<SCSignature>& support,
                                                    const std::vector<std::string>& support_labels,
                                                    const std::vector<SCSignature>& queries,
                                                    const MatchParams& mp) {
  std::vector<std::string> out;
  for (const auto& q : queries) {
    std::size_t best = 0;
    double best_s = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < support.size(); ++s) {
      const double score = surrogate_score(q, support[s], mp);
      if (score > best_s) {
        best_s = score;
        best = s;
      }
    }
    out.push_back(support_labels[best]);
  }
  return out;
}

}  // namespace adp
