#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mtwae/metric.hpp"
#include "mtwae/topology.hpp"

namespace mtwae {

struct BarycenterOptions {
  int max_iterations = 50;
  double min_relative_decrease = 0.01;
};

struct BarycenterResult {
  BDT tree;
  std::vector<double> energy;  // Frechet energy sum of W^2 per iteration
  int iterations = 0;
  std::vector<Assignment> assignments;  // barycenter (left) to each member
};

/// Index minimizing the summed squared distance to the others.
int medoid(const Eigen::MatrixXd& distances);

/// Frechet mean by alternating assignment and arithmetic-mean updates,
/// seeded with the medoid. Parents are inherited from the seed tree.
BarycenterResult barycenter(std::span<const BDT> ensemble, const BarycenterOptions& opt = {});
BarycenterResult barycenter(std::span<const BDT> ensemble, const BDT& seed,
                            const BarycenterOptions& opt = {});

/// Frechet energy of `center` with respect to the ensemble.
double frechet_energy(std::span<const BDT> ensemble, const BDT& center);

/// Hard partition of n items into k clusters.
struct ClusteringVector {
  int k = 0;
  std::vector<int> member_of;

  int size() const { return static_cast<int>(member_of.size()); }
  /// N x k one-hot matrix, row i has a 1 at its cluster.
  Eigen::MatrixXd one_hot() const;
};

struct KMeansResult {
  ClusteringVector clusters;
  std::vector<BDT> centroids;
  std::vector<double> energy;  // within-cluster sum of W^2 per round
  int rounds = 0;
};

KMeansResult wasserstein_kmeans(std::span<const BDT> ensemble, int k, std::uint64_t seed,
                                int max_rounds = 20);

struct EuclideanKMeans {
  ClusteringVector clusters;
  Eigen::MatrixXd centroids;  // k x d
  double inertia = 0.0;
};

/// Lloyd iterations from k-means++ seeds, best of `restarts` by inertia.
/// Rows of `points` are samples.
EuclideanKMeans kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                       int restarts = 10, int max_iterations = 100);

}  // namespace mtwae
