#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mtwae/barycenter.hpp"
#include "mtwae/serialization.hpp"
#include "mtwae/train.hpp"

namespace mtwae {

struct CompressedEnsemble {
  SubLayer out;            // output sub-layer of the last layer
  Eigen::MatrixXd coeffs;  // N x d
  std::vector<std::string> names;
  std::vector<Scale> scales;

  int size() const { return static_cast<int>(coeffs.rows()); }
};

CompressedEnsemble compress(const TrainedModel& model, std::span<const BDT> ensemble,
                            std::vector<std::string> names = {});
/// Normalized reconstructions, identical to the model's forward outputs.
std::vector<BDT> decompress_normalized(const CompressedEnsemble& c);
/// Reconstructions mapped back to data units with the stored scales.
std::vector<BDT> decompress(const CompressedEnsemble& c);

/// Canonical binary sizes: 64-bit floats, 32-bit indices, no entropy coding.
std::size_t binary_size(std::span<const BDT> ensemble);
std::size_t binary_size(const CompressedEnsemble& c);
double compression_factor(std::size_t original_bytes, std::size_t compressed_bytes);

/// JSON envelope whose payload sections are base64 canonical binary.
Json to_json(const CompressedEnsemble& c);
CompressedEnsemble compressed_from_json(const Json& j);

/// Latent coordinates of a two-dimensional model.
Eigen::MatrixXd layout2d(const TrainedModel& model);

/// Denormalized copies of normalized trees; others are copied unchanged.
std::vector<BDT> in_data_units(std::span<const BDT> ensemble);

/// Pairwise Euclidean distances between rows.
Eigen::MatrixXd euclidean_distances(const Eigen::MatrixXd& points);

double nmi(const ClusteringVector& a, const ClusteringVector& b);
double ari(const ClusteringVector& a, const ClusteringVector& b);
/// 1 - sum|D - D'| / sum max(D, D') over i < j, clamped to [0,1].
double sim(const Eigen::MatrixXd& d, const Eigen::MatrixXd& d_layout);
/// sim after dividing each matrix by its largest entry.
double sim_normalized(const Eigen::MatrixXd& d, const Eigen::MatrixXd& d_layout);

/// Mean over members of W(B_i, recon_i) divided by the largest pairwise
/// input distance (largest distance to the root-only tree when all inputs
/// coincide).
double average_relative_error(std::span<const BDT> ensemble, std::span<const BDT> reconstructed);

struct PCVPoint {
  int branch = 0;
  double rho1 = 0.0;
  double rho2 = 0.0;
  bool degenerate = false;  // zero variance, rho reported as 0
};

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b, bool* degenerate = nullptr);

/// Correlation of matched-member persistence (data units, 0 when matched
/// to the diagonal) with each latent coordinate, for the top_k most
/// persistent barycenter branches.
std::vector<PCVPoint> pcv(const Eigen::MatrixXd& latent, std::span<const BDT> ensemble,
                          const BarycenterResult& center, int top_k = 6);

enum class LatentTree { NextInput, LatentInput, LatentOutput };

struct FLIEntry {
  int branch = 0;
  double original = 0.0;  // global relative persistence in the barycenter
  double latent = 0.0;    // same, in the latent-space tree; 0 when lost
  double fli = 0.0;
};

/// Tracks every barycenter branch through the chain of layer origins down
/// to the latent-space tree.
std::vector<FLIEntry> fli(const Network& net, const BDT& center,
                          LatentTree which = LatentTree::NextInput);

/// Chains of (member, branch) following consecutive optimal assignments,
/// started from the top_k most persistent branches of the first member.
std::vector<std::vector<std::pair<int, int>>> track_features(std::span<const BDT> sequence,
                                                             int top_k = 5);

}  // namespace mtwae
