#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mtwae {

/// Scalar field sampled on a regular grid, x fastest.
struct ScalarField {
  std::array<int, 3> dims{0, 0, 1};
  std::vector<double> values;
  std::string name;

  int size() const { return dims[0] * dims[1] * dims[2]; }
  int index(int x, int y, int z = 0) const { return x + dims[0] * (y + dims[1] * z); }
  double range() const;
};

/// Throws InvalidArgument when the dims/value invariants do not hold.
void validate(const ScalarField& f);

struct GaussianSpec {
  std::vector<Eigen::Vector2d> centers;
  std::vector<double> amplitudes;
  std::vector<double> widths;
};

ScalarField load_field(const std::string& path);
void save_field(const ScalarField& f, const std::string& path);

/// Sum of isotropic Gaussians sampled on the unit square.
ScalarField generate_gaussian_mixture(const GaussianSpec& spec, int nx, int ny);

/// Uniform perturbation in [-eps*R/2, eps*R/2] with R the value range.
ScalarField add_uniform_noise(const ScalarField& f, double eps, std::uint64_t seed);

struct StabilityEnsemble {
  std::vector<ScalarField> fields;
  std::vector<int> labels;                  // 0..3, corner class
  std::vector<Eigen::Vector2d> parameters;  // (a, b) ground-truth coordinates
  Eigen::MatrixXd distances;                // Euclidean distances of parameters
};

/// Sixteen two-hill fields whose diagrams sit on a square of squares:
/// outer side 1, inner side 0.15. Each extra maximum moves perpendicular
/// to the diagonal, so diagram distances equal parameter distances.
StabilityEnsemble generate_stability_ensemble(double noise_eps, std::uint64_t seed,
                                              int grid = 256);

}  // namespace mtwae
