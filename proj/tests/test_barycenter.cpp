#include <doctest.h>

#include <cmath>

#include "mtwae/barycenter.hpp"
#include "mtwae/error.hpp"
#include "oracles.hpp"

using namespace mtwae;

namespace {

BDT single(double x, double y) {
  BDT b;
  b.branches = {{x, y, kNoParent}};
  return b;
}

// Members jittered around one of `centers` trees.
std::vector<BDT> clustered(Rng& rng, const std::vector<BDT>& centers, int per) {
  std::vector<BDT> out;
  for (const BDT& c : centers) {
    for (int i = 0; i < per; ++i) {
      BDT b = c;
      for (int j = 1; j < b.size(); ++j) {
        b.branches[j].birth += rng.uniform(-0.01, 0.01);
        b.branches[j].death += rng.uniform(-0.01, 0.01);
      }
      out.push_back(b);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("barycenter of identical members") {
  BDT a;
  a.branches = {{0, 1, kNoParent}, {0.2, 0.7, 0}, {0.3, 0.5, 1}};
  const std::vector<BDT> e{a, a, a};
  const BarycenterResult r = barycenter(e);
  CHECK(r.iterations == 1);
  CHECK(r.energy == std::vector<double>{0.0});
  REQUIRE(r.tree.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(r.tree.branches[i].birth == a.branches[i].birth);
    CHECK(r.tree.branches[i].death == a.branches[i].death);
  }
}

TEST_CASE("barycenter of two single points is their midpoint") {
  const std::vector<BDT> e{single(0, 1), single(0.2, 0.8)};
  const BarycenterResult r = barycenter(e);
  REQUIRE(r.tree.size() == 1);
  CHECK(r.tree.branches[0].birth == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(r.tree.branches[0].death == doctest::Approx(0.9).epsilon(1e-14));
  // brute force: the energy of the midpoint beats nearby candidates
  const double e0 = frechet_energy(e, r.tree);
  for (double dx : {-0.01, 0.01})
    for (double dy : {-0.01, 0.01}) CHECK(frechet_energy(e, single(0.1 + dx, 0.9 + dy)) > e0);
  CHECK_THROWS_AS(barycenter(std::vector<BDT>{}), InvalidArgument);
}

TEST_CASE("barycenter energy never increases") {
  Rng rng(21);
  for (int trial = 0; trial < 15; ++trial) {
    std::vector<BDT> e;
    for (int m = 0; m < 6; ++m) e.push_back(normalize(oracle::random_bdt(rng, 2 + m % 4)));
    BarycenterOptions opt;
    opt.min_relative_decrease = 0.0;
    opt.max_iterations = 15;
    const BarycenterResult r = barycenter(e, opt);
    for (std::size_t i = 1; i < r.energy.size(); ++i) CHECK(r.energy[i] <= r.energy[i - 1] + 1e-12);
    CHECK_NOTHROW(validate(r.tree));
  }
}

TEST_CASE("branches most members lack shrink, and go once on the diagonal") {
  BDT big;
  big.branches = {{0, 1, kNoParent}, {0.1, 0.9, 0}, {0.4, 0.6, 0}};
  BDT small;
  small.branches = {{0, 1, kNoParent}, {0.1, 0.9, 0}};
  const std::vector<BDT> e{big, small, small, small};
  // the medoid is a small member, so seed with the big one
  const BarycenterResult r = barycenter(e, big);
  REQUIRE(r.tree.size() == 3);
  CHECK(r.tree.branches[2].birth == doctest::Approx(0.475));
  CHECK(r.tree.branches[2].death == doctest::Approx(0.525));

  BDT flat = big;
  flat.branches[2] = {0.5, 0.5, 0};
  BDT moved = small;
  moved.branches[1] = {0.12, 0.88, 0};
  const std::vector<BDT> f{flat, small, moved, small};
  CHECK(barycenter(f, flat).tree.size() == 2);
}

TEST_CASE("wasserstein k-means") {
  Rng rng(8);
  BDT a, b, c;
  a.branches = {{0, 1, kNoParent}, {0.1, 0.3, 0}};
  b.branches = {{0, 1, kNoParent}, {0.5, 0.95, 0}};
  c.branches = {{0, 1, kNoParent}, {0.2, 0.8, 0}, {0.3, 0.4, 1}};
  const auto e = clustered(rng, {a, b, c}, 4);

  const KMeansResult r = wasserstein_kmeans(e, 3, 5);
  for (int g = 0; g < 3; ++g)
    for (int i = 1; i < 4; ++i)
      CHECK(r.clusters.member_of[g * 4 + i] == r.clusters.member_of[g * 4]);
  CHECK(r.clusters.member_of[0] != r.clusters.member_of[4]);
  CHECK(r.clusters.member_of[4] != r.clusters.member_of[8]);
  for (std::size_t i = 1; i < r.energy.size(); ++i) CHECK(r.energy[i] <= r.energy[i - 1] + 1e-12);

  const KMeansResult again = wasserstein_kmeans(e, 3, 5);
  CHECK(again.clusters.member_of == r.clusters.member_of);
  CHECK(again.energy == r.energy);

  const KMeansResult all = wasserstein_kmeans(e, static_cast<int>(e.size()), 1);
  CHECK(all.energy.back() == 0.0);
  std::vector<int> sorted = all.clusters.member_of;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < static_cast<int>(sorted.size()); ++i) CHECK(sorted[i] == i);

  const KMeansResult one = wasserstein_kmeans(e, 1, 1);
  for (int m : one.clusters.member_of) CHECK(m == 0);
  CHECK(one.energy.back() == doctest::Approx(frechet_energy(e, barycenter(e).tree)).epsilon(1e-9));

  CHECK(r.clusters.one_hot().rowwise().sum() == Eigen::VectorXd::Ones(12));
}

TEST_CASE("euclidean k-means") {
  Eigen::MatrixXd x(8, 2);
  x << 0, 0, 0.1, 0, 0, 0.1, 0.1, 0.1, 5, 5, 5.1, 5, 5, 5.1, 5.1, 5.1;
  const EuclideanKMeans r = kmeans(x, 2, 3);
  CHECK(r.clusters.member_of[0] != r.clusters.member_of[4]);
  for (int i = 1; i < 4; ++i) CHECK(r.clusters.member_of[i] == r.clusters.member_of[0]);
  CHECK(r.inertia == doctest::Approx(8 * 0.005));
  CHECK(kmeans(x, 2, 3).clusters.member_of == r.clusters.member_of);
}
