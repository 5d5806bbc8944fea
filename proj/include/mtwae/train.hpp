#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mtwae/barycenter.hpp"
#include "mtwae/network.hpp"

namespace mtwae {

struct EpochRecord {
  double energy = 0.0;
  double metric = 0.0;
  double cluster = 0.0;
  double total = 0.0;
};

struct TrainedModel {
  TrainConfig config;
  Network network;
  std::vector<EpochRecord> trace;  // one entry per epoch, loss at the start of the epoch
  Eigen::MatrixXd latent;          // N x d_latent
  Eigen::MatrixXd last_coeffs;     // N x d_out
  bool converged = false;

  std::vector<double> energy_trace() const;
  int epochs() const { return static_cast<int>(trace.size()); }
};

class Adam {
 public:
  Adam(Eigen::Index n, double rate, double beta1, double beta2, double eps);
  /// Returns the updated parameters.
  Eigen::VectorXd step(const Eigen::VectorXd& theta, const Eigen::VectorXd& grad);

 private:
  Eigen::VectorXd m_, v_;
  double rate_, beta1_, beta2_, eps_;
  double p1_ = 1.0, p2_ = 1.0;
};

/// Full-batch training. `classes` is required when the clustering penalty is on.
TrainedModel train(std::span<const BDT> ensemble, const TrainConfig& config,
                   const std::optional<ClusteringVector>& classes = std::nullopt);

Eigen::VectorXd encode(const TrainedModel& model, const BDT& b);
BDT decode(const TrainedModel& model, const Eigen::VectorXd& latent);
/// Full forward pass of one tree.
BDT reconstruct(const TrainedModel& model, const BDT& b);

void write_trace_csv(const std::string& path, const TrainedModel& model);

}  // namespace mtwae
