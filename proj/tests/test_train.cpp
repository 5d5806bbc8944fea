#include <doctest.h>

#include <Eigen/Dense>

#include "mtwae/error.hpp"
#include "mtwae/loss.hpp"
#include "mtwae/train.hpp"
#include "oracles.hpp"

using namespace mtwae;

namespace {

std::vector<BDT> random_ensemble(std::uint64_t seed, int n, int branches) {
  Rng rng(seed);
  std::vector<BDT> e;
  for (int i = 0; i < n; ++i) e.push_back(normalize(oracle::random_bdt(rng, branches)));
  return e;
}

TrainConfig small_config() {
  TrainConfig c;
  c.d_out = 6;
  c.max_epochs = 60;
  c.restarts = 2;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("adam minimizes a quadratic") {
  Eigen::Vector3d theta(1.0, -2.0, 0.5);
  const Eigen::Vector3d target(0.3, 0.1, -0.4);
  Adam adam(3, 0.05, 0.9, 0.999, 1e-8);
  for (int i = 0; i < 2000; ++i) theta = adam.step(theta, 2.0 * (theta - target));
  CHECK((theta - target).norm() < 1e-3);
}

TEST_CASE("adam first step moves by the rate along the sign") {
  Adam adam(2, 0.1, 0.9, 0.999, 1e-12);
  const Eigen::Vector2d t = adam.step(Eigen::Vector2d(0, 0), Eigen::Vector2d(3.0, -0.001));
  CHECK(t[0] == doctest::Approx(-0.1));
  CHECK(t[1] == doctest::Approx(0.1));
}

TEST_CASE("training records one trace entry per epoch and stops on stalls") {
  const auto ens = random_ensemble(1, 5, 4);
  const TrainConfig c = small_config();
  const TrainedModel m = train(ens, c);
  REQUIRE(m.epochs() >= 1);
  CHECK(m.epochs() <= c.max_epochs);
  CHECK(m.latent.rows() == 5);
  CHECK(m.latent.cols() == 2);
  CHECK(m.last_coeffs.cols() == 6);
  if (m.converged && m.trace.back().total > 0.0) {
    // The last patience epochs each decreased by less than the threshold.
    for (int e = m.epochs() - c.patience; e < m.epochs(); ++e) {
      const double rel = (m.trace[e - 1].total - m.trace[e].total) / m.trace[e - 1].total;
      CHECK(rel >= 0.0);
      CHECK(rel < c.stop_relative_decrease);
    }
  }
  // The final trace entry is the loss of the returned network.
  const std::vector<BDT> recon = [&] {
    std::vector<BDT> r;
    for (const auto& b : ens) r.push_back(reconstruct(m, b));
    return r;
  }();
  CHECK(energy(ens, recon).value == doctest::Approx(m.trace.back().energy).epsilon(1e-12));
}

TEST_CASE("training is deterministic") {
  const auto ens = random_ensemble(2, 4, 4);
  const TrainConfig c = small_config();
  const TrainedModel a = train(ens, c), b = train(ens, c);
  CHECK(parameters(a.network) == parameters(b.network));
  CHECK(a.energy_trace() == b.energy_trace());
  CHECK(a.latent == b.latent);
}

TEST_CASE("encode and decode follow the forward pass") {
  const auto ens = random_ensemble(3, 4, 4);
  const TrainedModel m = train(ens, small_config());
  for (int i = 0; i < 4; ++i) {
    const Eigen::VectorXd z = encode(m, ens[i]);
    CHECK(z.size() == 2);
    CHECK((z.transpose() - m.latent.row(i)).norm() < 1e-9);
    const BDT d = decode(m, z);
    CHECK((vectorize(d) - vectorize(reconstruct(m, ens[i]))).norm() < 1e-9);
    for (const auto& br : d.branches) {
      CHECK(br.birth >= 0.0);
      CHECK(br.birth <= br.death);
      CHECK(br.death <= 1.0);
    }
  }
  CHECK_THROWS_AS(decode(m, Eigen::VectorXd::Zero(3)), InvalidArgument);
}

TEST_CASE("a single tree is reconstructed") {
  Rng rng(8);
  const std::vector<BDT> one{normalize(oracle::random_bdt(rng, 5))};
  TrainConfig c;
  c.seed = 1;
  // Default caps leave room for the root only when |S_B| = 5.
  c.cap_in_first = c.cap_inner = c.cap_out_last = 1.0;
  // Steps of 1e-2 overshoot into the clamped region where the gradient vanishes.
  c.learning_rate = 3e-3;
  const TrainedModel m = train(one, c);
  const double d = wasserstein_bdt(one[0], reconstruct(m, one[0])).distance;
  MESSAGE("singleton error " << d << " epochs " << m.epochs());
  CHECK(d < 1e-3);
}

TEST_CASE("clustering penalty requires classes") {
  const auto ens = random_ensemble(4, 3, 3);
  TrainConfig c = small_config();
  c.penalty_cluster = true;
  CHECK_THROWS_AS(train(ens, c), InvalidArgument);
}
