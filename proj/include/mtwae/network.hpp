#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mtwae/geometry.hpp"
#include "mtwae/kernels.hpp"
#include "mtwae/topology.hpp"

namespace mtwae {

struct SubLayer {
  BDTBasis basis;  // basis.origin is the sub-layer origin

  const BDT& origin() const { return basis.origin; }
};

struct Layer {
  SubLayer in;   // projection, followed by the activation
  SubLayer out;  // reconstruction, followed by the validity projection

  int dim() const { return in.basis.dim(); }
};

struct Network {
  std::vector<Layer> layers;
  int n_e = 1;
  int n_d = 1;
  double slope = 0.01;

  std::vector<int> dims() const;
  int latent_layer() const { return n_e - 1; }
};

/// Layer count, sub-layer agreement and the encoder/decoder dimension pattern.
void validate(const Network& net);

struct TrainConfig {
  int n_it = 2;
  int n_e = 1;
  int n_d = 1;
  int d_latent = 2;
  int d_out = 16;
  std::vector<int> dims;  // explicit per-layer dims; derived when empty

  double cap_in_first = 0.2;
  double cap_inner = 0.1;
  double cap_out_last = 0.2;

  double init_mix = 0.05;  // weight of the random part of the output init map
  int restarts = 4;       // independent initializations, lowest final loss kept

  double eps1 = 0.05;
  double eps2 = 0.95;
  double eps3 = 0.9;

  double slope = 0.01;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon_hat = 1e-8;

  bool penalty_metric = false;
  bool penalty_cluster = false;
  double lambda_m = 1.0;
  double lambda_c = 1.0;
  double softmax_beta = 5.0;
  int clusters = 0;  // k for the clustering penalty; 0 takes it from labels

  double stop_relative_decrease = 0.01;
  int patience = 3;
  int max_epochs = 500;
  std::uint64_t seed = 0;

  std::vector<int> layer_dims() const;
};

void validate(const TrainConfig& c);

/// Validity projection: clamp into [0,1], snap inverted branches to the
/// diagonal, force the root to (0,1).
BDT gamma(const BDT& raw);

/// Keeps the `max_branches` branches of largest global relative persistence,
/// re-hanging survivors on their nearest kept ancestor.
BDT truncate(const BDT& b, int max_branches);

struct LayerState {
  std::vector<int> partners;  // projection assignment, per input-origin branch
  ProjectionSystem system;
  PinvSolve<double> solve;  // solve.alpha holds the coefficients before the activation
  Eigen::VectorXd alpha;  // after the activation
  Eigen::VectorXd raw;    // output coordinates before gamma
  BDT out;
};

/// Layer forward with the projection assignment either computed (n_it
/// Assignment/Update rounds) or, when `frozen` is given, reused.
LayerState layer_forward(const Layer& layer, const BDT& b, int n_it, double slope,
                         const std::vector<int>* frozen = nullptr);

/// Output sub-layer only: gamma(O' + B alpha).
BDT decode_layer(const Layer& layer, const Eigen::VectorXd& alpha);

struct MemberTrace {
  std::vector<LayerState> layers;
  const BDT& output() const { return layers.back().out; }
};

std::vector<MemberTrace> forward(const Network& net, std::span<const BDT> ensemble, int n_it,
                                 const std::vector<std::vector<std::vector<int>>>* frozen = nullptr);

/// Per-layer dims, origin caps as fractions of the total branch count.
Network initialize(std::span<const BDT> ensemble, const TrainConfig& config);

/// Origin size caps for each layer as (input, output) branch counts.
std::vector<std::pair<int, int>> origin_caps(const TrainConfig& c, int total_branches);

}  // namespace mtwae
