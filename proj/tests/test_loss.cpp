#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "mtwae/loss.hpp"
#include "oracles.hpp"

using namespace mtwae;

namespace {

BDT tree(std::vector<Branch> branches) {
  BDT b;
  b.branches = std::move(branches);
  b.normalized = true;
  return b;
}

std::vector<BDT> random_ensemble(Rng& rng, int n, int max_branches) {
  std::vector<BDT> e;
  for (int i = 0; i < n; ++i)
    e.push_back(normalize(oracle::random_bdt(rng, 1 + static_cast<int>(rng.below(max_branches)))));
  return e;
}

}  // namespace

TEST_CASE("energy") {
  const BDT a = tree({{0, 1, kNoParent}, {0.2, 0.6, 0}});
  const BDT root = tree({{0, 1, kNoParent}});
  const std::vector<BDT> ens{a, root};
  CHECK(energy(ens, ens).value == 0.0);

  const std::vector<BDT> only_a{a}, only_root{root};
  CHECK(energy(only_a, only_root).value == doctest::Approx(0.5 * 0.4 * 0.4));

  Rng rng(5);
  const auto x = random_ensemble(rng, 5, 5), y = random_ensemble(rng, 5, 5);
  double s = 0.0;
  for (int i = 0; i < 5; ++i) s += std::pow(wasserstein_bdt(x[i], y[i]).distance, 2);
  CHECK(energy(x, y).value == doctest::Approx(s).epsilon(1e-9));
}

TEST_CASE("metric penalty") {
  Eigen::MatrixXd w(2, 2);
  w << 0, 1, 1, 0;
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(2, 2);
  CHECK(penalty_metric(z, w) == doctest::Approx(2.0));
  z << 0, 0, 1, 0;
  CHECK(penalty_metric(z, w) == 0.0);
  CHECK(penalty_metric(2.0 * z, w) == doctest::Approx(2.0));
}

TEST_CASE("cluster penalty") {
  Eigen::MatrixXd c(2, 2);
  c << 0, 0, 10, 0;
  ClusteringVector cls{2, {0, 1}};
  Eigen::MatrixXd z = c;
  CHECK(penalty_cluster(z, cls, c, 25.0) < 1e-3);

  Eigen::MatrixXd mid(1, 2);
  mid << 5, 3;
  ClusteringVector one{2, {0}};
  CHECK(penalty_cluster(mid, one, c, 5.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Rng rng(2);
  Eigen::MatrixXd pts(6, 2);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.uniform(-1, 1);
  const Eigen::MatrixXd p = soft_membership(pts, c, 5.0);
  for (Eigen::Index i = 0; i < p.rows(); ++i) CHECK(p.row(i).sum() == doctest::Approx(1.0));
}

TEST_CASE("centroids are aligned to class labels") {
  Eigen::MatrixXd z(4, 2);
  z << 0, 0, 0.1, 0, 5, 5, 5.1, 5;
  const ClusteringVector cls{2, {1, 1, 0, 0}};
  const Eigen::MatrixXd c = aligned_centroids(z, cls, 2, 3);
  CHECK(c(0, 0) == doctest::Approx(5.05));
  CHECK(c(1, 0) == doctest::Approx(0.05));
  CHECK(penalty_cluster(z, cls, c, 5.0) < 0.01);
}

TEST_CASE("parameter round trip") {
  Rng rng(4);
  Network net = oracle::random_network(rng, {3, 2, 5}, 2, 4);
  const Eigen::VectorXd theta = parameters(net);
  set_parameters(net, 2.0 * theta);
  CHECK(parameters(net) == 2.0 * theta);
  CHECK_THROWS(set_parameters(net, Eigen::VectorXd::Zero(theta.size() + 1)));
}

TEST_CASE("zero energy has zero energy gradient") {
  const BDT b = tree({{0, 1, kNoParent}, {0.2, 0.7, 0}, {0.3, 0.6, 1}});
  Layer l;
  l.in.basis.origin = b;
  l.in.basis.vectors = Eigen::MatrixXd::Identity(6, 6);
  l.out.basis = l.in.basis;
  Network net;
  net.layers = {l};
  net.n_d = 0;
  net.slope = 1.0;
  const std::vector<BDT> ens{b};
  Eigen::VectorXd g;
  const LossValue v = evaluate(net, ens, 2, {}, nullptr, nullptr, &g);
  CHECK(v.energy == doctest::Approx(0.0));
  CHECK(g.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("clamped coordinates have zero partials") {
  const BDT b = tree({{0, 1, kNoParent}, {0.2, 0.6, 0}});
  Layer l;
  l.in.basis.origin = b;
  l.in.basis.vectors = Eigen::MatrixXd::Zero(4, 1);
  l.in.basis.vectors(2, 0) = 1.0;
  l.out.basis.origin = tree({{0, 1, kNoParent}, {-0.5, 0.5, 0}});
  l.out.basis.vectors = Eigen::MatrixXd::Zero(4, 1);
  Network net;
  net.layers = {l};
  net.n_d = 0;
  const std::vector<BDT> ens{tree({{0, 1, kNoParent}, {0.3, 0.9, 0}})};
  Eigen::VectorXd g;
  evaluate(net, ens, 2, {}, nullptr, nullptr, &g);
  // Output origin starts after 4 input-origin and 4 input-vector entries.
  CHECK(g[8 + 2] == 0.0);
  CHECK(g[8 + 3] != 0.0);
}

TEST_CASE("gradient matches central differences") {
  Rng rng(2024);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(2));
    const auto ens = random_ensemble(rng, n, 4);
    const Network net = trial % 2 ? oracle::random_network(rng, {2, 3}, 1, 4)
                                  : oracle::random_network(rng, {3, 2, 4}, 2, 4);
    Eigen::MatrixXd dm(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) dm(i, j) = wasserstein_bdt(ens[i], ens[j]).distance;
    ClusteringVector cls{2, std::vector<int>(n)};
    for (int i = 0; i < n; ++i) cls.member_of[i] = i % 2;

    Penalties off;
    CHECK(oracle::gradient_discrepancy(net, ens, off, 2) < 1e-4);
    Penalties on;
    on.distances = &dm;
    on.classes = &cls;
    on.seed = trial;
    CHECK(oracle::gradient_discrepancy(net, ens, on, 2) < 1e-4);
  }
}
