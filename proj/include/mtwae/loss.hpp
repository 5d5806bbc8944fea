#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mtwae/barycenter.hpp"
#include "mtwae/metric.hpp"
#include "mtwae/network.hpp"

namespace mtwae {

struct EnergyResult {
  double value = 0.0;
  std::vector<Assignment> assignments;  // input (left) to reconstruction (right)
};

EnergyResult energy(std::span<const BDT> ensemble, std::span<const BDT> reconstructed);

/// Gradient of the fixed-assignment cost with respect to the coordinates of
/// the right-hand tree.
Eigen::VectorXd energy_gradient(const BDT& input, const BDT& recon, const Assignment& phi);

/// Double sum over ordered pairs of (W_ij - |a_i - a_j|)^2. Rows are members.
double penalty_metric(const Eigen::MatrixXd& latent, const Eigen::MatrixXd& distances);
Eigen::MatrixXd penalty_metric_gradient(const Eigen::MatrixXd& latent,
                                        const Eigen::MatrixXd& distances);

/// k-means centroids of the latent points, reordered so that row c is the
/// centroid of the cluster best overlapping class c. Extra clusters follow.
Eigen::MatrixXd aligned_centroids(const Eigen::MatrixXd& latent, const ClusteringVector& classes,
                                  int k, std::uint64_t seed);

/// Softmax membership over -beta * distance to each centroid. Rows sum to 1.
Eigen::MatrixXd soft_membership(const Eigen::MatrixXd& latent, const Eigen::MatrixXd& centroids,
                                double beta);

/// KL divergence of the one-hot classes from the soft membership.
double penalty_cluster(const Eigen::MatrixXd& latent, const ClusteringVector& classes,
                       const Eigen::MatrixXd& centroids, double beta);
Eigen::MatrixXd penalty_cluster_gradient(const Eigen::MatrixXd& latent,
                                         const ClusteringVector& classes,
                                         const Eigen::MatrixXd& centroids, double beta);

struct Penalties {
  const Eigen::MatrixXd* distances = nullptr;  // enables the metric term
  const ClusteringVector* classes = nullptr;   // enables the clustering term
  double lambda_m = 1.0;
  double lambda_c = 1.0;
  double beta = 5.0;
  int clusters = 0;  // 0 uses classes->k
  std::uint64_t seed = 0;
};

/// Everything the loss depends on that is not differentiated: projection
/// partners per member and layer, energy assignments, clustering centroids.
struct FrozenState {
  std::vector<std::vector<std::vector<int>>> partners;
  std::vector<Assignment> energy;
  Eigen::MatrixXd centroids;
};

struct LossValue {
  double energy = 0.0;
  double metric = 0.0;
  double cluster = 0.0;
  double total = 0.0;
  Eigen::MatrixXd latent;  // N x d_latent, after the activation
  std::vector<MemberTrace> traces;
};

/// Forward pass plus loss. With `frozen` the combinatorial choices are
/// replayed; otherwise they are recomputed and optionally stored in
/// `capture`. A non-null `gradient` receives the flat parameter gradient.
LossValue evaluate(const Network& net, std::span<const BDT> ensemble, int n_it,
                   const Penalties& pen, const FrozenState* frozen = nullptr,
                   FrozenState* capture = nullptr, Eigen::VectorXd* gradient = nullptr);

/// Flat parameter vector: per layer, input origin, input vectors
/// (column-major), output origin, output vectors.
Eigen::VectorXd parameters(const Network& net);
void set_parameters(Network& net, const Eigen::VectorXd& theta);

}  // namespace mtwae
