#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "adp/common.hpp"

namespace adp {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct KMeansOptions {
  int max_iter = 100;
  double tol = 1e-6;  // relative objective change
  std::uint64_t seed = 0;
  int restarts = 8;
};

template <typename Scalar>
struct KMeansResult {
  std::vector<Eigen::Index> assignment;  // one per point
  RowMatrix<Scalar> centers;             // k x d
  Scalar objective = 0;
  std::vector<Scalar> objective_trace;   // after every Lloyd iteration
  int iterations = 0;
  int restart = 0;                       // index of the winning restart
};

namespace detail {

template <typename Scalar>
Eigen::Index nearest_center(const RowMatrix<Scalar>& centers,
                            const Eigen::Ref<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>& x,
                            Scalar* dist2) {
  Eigen::Index best = 0;
  Scalar best_d = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const Scalar d = (centers.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist2) *dist2 = best_d;
  return best;
}

}  // namespace detail

/// k-means++ seeding: first center uniform, the rest with probability
/// proportional to squared distance from the nearest chosen center.
template <typename Scalar>
RowMatrix<Scalar> kmeans_plus_plus_init(const Eigen::Ref<const RowMatrix<Scalar>>& points,
                                        Eigen::Index k, std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  std::mt19937_64 rng(seed);
  RowMatrix<Scalar> centers(k, points.cols());
  centers.row(0) = points.row(std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng));

  std::vector<Scalar> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    d2[static_cast<std::size_t>(i)] = (points.row(i) - centers.row(0)).squaredNorm();

  for (Eigen::Index c = 1; c < k; ++c) {
    Scalar total = 0;
    for (auto v : d2) total += v;
    Eigen::Index pick = 0;
    if (total > 0) {
      const Scalar u = std::uniform_real_distribution<Scalar>(0, total)(rng);
      Scalar acc = 0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (u < acc && d2[static_cast<std::size_t>(i)] > 0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
    }
    centers.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)], (points.row(i) - centers.row(c)).squaredNorm());
  }
  return centers;
}

/// Lloyd iterations from the given centers. Clusters left empty by an
/// assignment step take the point farthest from its center (from a cluster
/// with more than one member; ties to the lowest point index).
template <typename Scalar>
KMeansResult<Scalar> lloyd(const Eigen::Ref<const RowMatrix<Scalar>>& points, RowMatrix<Scalar> centers,
                           int max_iter, double tol) {
  const Eigen::Index n = points.rows();
  const Eigen::Index k = centers.rows();
  KMeansResult<Scalar> res;
  res.assignment.assign(static_cast<std::size_t>(n), 0);
  std::vector<Scalar> dist(static_cast<std::size_t>(n));
  Scalar prev = std::numeric_limits<Scalar>::infinity();

  for (int it = 0; it < max_iter; ++it) {
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto c = detail::nearest_center<Scalar>(centers, points.row(i), &dist[static_cast<std::size_t>(i)]);
      res.assignment[static_cast<std::size_t>(i)] = c;
      ++counts[static_cast<std::size_t>(c)];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto owner = res.assignment[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(owner)] < 2) continue;
        if (far < 0 || dist[static_cast<std::size_t>(i)] > dist[static_cast<std::size_t>(far)]) far = i;
      }
      --counts[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(far)])];
      res.assignment[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      dist[static_cast<std::size_t>(far)] = 0;
    }

    centers.setZero();
    for (Eigen::Index i = 0; i < n; ++i) centers.row(res.assignment[static_cast<std::size_t>(i)]) += points.row(i);
    for (Eigen::Index c = 0; c < k; ++c) centers.row(c) /= static_cast<Scalar>(counts[static_cast<std::size_t>(c)]);

    Scalar obj = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      obj += (points.row(i) - centers.row(res.assignment[static_cast<std::size_t>(i)])).squaredNorm();
    res.objective_trace.push_back(obj);
    res.objective = obj;
    res.iterations = it + 1;
    if (obj == 0 || (std::isfinite(prev) && prev - obj <= static_cast<Scalar>(tol) * prev)) break;
    prev = obj;
  }
  res.centers = std::move(centers);
  return res;
}

/// Best of `restarts` k-means++ / Lloyd runs; restart r is seeded with seed + r.
template <typename Scalar>
KMeansResult<Scalar> kmeans(const Eigen::Ref<const RowMatrix<Scalar>>& points, Eigen::Index k,
                            const KMeansOptions& opts) {
  if (k < 1) throw InvalidParameter("k must be >= 1");
  if (k > points.rows())
    throw InvalidParameter("k = " + std::to_string(k) + " exceeds the " +
                           std::to_string(points.rows()) + " samples");
  if (opts.max_iter < 1) throw InvalidParameter("max_iter must be >= 1");
  if (opts.restarts < 1) throw InvalidParameter("restarts must be >= 1");

  KMeansResult<Scalar> best;
  for (int r = 0; r < opts.restarts; ++r) {
    auto init = kmeans_plus_plus_init<Scalar>(points, k, opts.seed + static_cast<std::uint64_t>(r));
    auto run = lloyd<Scalar>(points, std::move(init), opts.max_iter, opts.tol);
    run.restart = r;
    if (r == 0 || run.objective < best.objective) best = std::move(run);
  }
  return best;
}

/// Mean silhouette coefficient of a labelling (singleton clusters score 0).
template <typename Scalar>
Scalar mean_silhouette(const Eigen::Ref<const RowMatrix<Scalar>>& points,
                       const std::vector<Eigen::Index>& assignment, Eigen::Index k) {
  const Eigen::Index n = points.rows();
  std::vector<Eigen::Index> sizes(static_cast<std::size_t>(k), 0);
  for (auto a : assignment) ++sizes[static_cast<std::size_t>(a)];
  Scalar total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto own = assignment[static_cast<std::size_t>(i)];
    if (sizes[static_cast<std::size_t>(own)] < 2) continue;
    std::vector<Scalar> sum(static_cast<std::size_t>(k), 0);
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) sum[static_cast<std::size_t>(assignment[static_cast<std::size_t>(j)])] += (points.row(i) - points.row(j)).norm();
    const Scalar a = sum[static_cast<std::size_t>(own)] / static_cast<Scalar>(sizes[static_cast<std::size_t>(own)] - 1);
    Scalar b = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index c = 0; c < k; ++c)
      if (c != own && sizes[static_cast<std::size_t>(c)] > 0)
        b = std::min(b, sum[static_cast<std::size_t>(c)] / static_cast<Scalar>(sizes[static_cast<std::size_t>(c)]));
    const Scalar denom = std::max(a, b);
    if (denom > 0 && std::isfinite(b)) total += (b - a) / denom;
  }
  return total / static_cast<Scalar>(n);
}

}  // namespace adp
