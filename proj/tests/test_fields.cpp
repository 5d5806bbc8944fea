#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "mtwae/error.hpp"
#include "mtwae/field.hpp"
#include "mtwae/metric.hpp"
#include "mtwae/topology.hpp"

using namespace mtwae;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("mtwae_" + name)).string();
}

void write_raw(const std::string& path, const std::string& header, const std::vector<double>& v) {
  std::ofstream out(path, std::ios::binary);
  out << header << '\n';
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}

}  // namespace

TEST_CASE("load_field reads a 2x2 file") {
  const auto p = temp_path("f22.sfld");
  write_raw(p, "SFLD1 2 2 1", {0, 1, 2, 3});
  const ScalarField f = load_field(p);
  CHECK(f.dims == std::array<int, 3>{2, 2, 1});
  CHECK(f.values == std::vector<double>{0, 1, 2, 3});
}

TEST_CASE("load_field rejects value count mismatch and NaN") {
  const auto p = temp_path("bad.sfld");
  write_raw(p, "SFLD1 3 1 1", {0, 1, 2, 3});
  CHECK_THROWS_WITH_AS(load_field(p), doctest::Contains("value count mismatch"), InputError);
  write_raw(p, "SFLD1 2 1 1", {0, std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_WITH_AS(load_field(p), doctest::Contains("non-finite value at byte 20"), InputError);
  write_raw(p, "SFLD2 2 1 1", {0, 1});
  CHECK_THROWS_WITH_AS(load_field(p), doctest::Contains("malformed header"), InputError);
}

TEST_CASE("save and load round trip") {
  ScalarField f;
  f.dims = {3, 2, 1};
  f.values = {0.5, -1, 2, 3.25, 1e-300, 7};
  const auto p = temp_path("rt.sfld");
  save_field(f, p);
  CHECK(load_field(p).values == f.values);
}

TEST_CASE("gaussian mixture") {
  GaussianSpec s;
  s.centers = {{0.5, 0.5}};
  s.amplitudes = {1.0};
  s.widths = {0.1};
  const ScalarField f = generate_gaussian_mixture(s, 11, 11);
  const auto it = std::max_element(f.values.begin(), f.values.end());
  CHECK(it - f.values.begin() == f.index(5, 5));
  CHECK(*it == doctest::Approx(1.0));

  s.amplitudes = {0.0};
  for (double v : generate_gaussian_mixture(s, 4, 4).values) CHECK(v == 0.0);

  GaussianSpec two;
  two.centers = {{0.25, 0.5}, {0.75, 0.5}};
  two.amplitudes = {1.0, 0.5};
  two.widths = {0.08, 0.08};
  const MergeTree t = compute_merge_tree(generate_gaussian_mixture(two, 41, 41));
  const BDT b = simplify(branch_decomposition(t), 0.0);
  int leaves = 0;
  for (const auto& n : t.nodes) leaves += n.type == NodeType::Leaf;
  CHECK(leaves == 2);
  CHECK(b.size() == 2);

  CHECK_THROWS_AS(generate_gaussian_mixture(GaussianSpec{}, 4, 4), InvalidArgument);
}

TEST_CASE("uniform noise bounds and determinism") {
  GaussianSpec s;
  s.centers = {{0.3, 0.6}};
  s.amplitudes = {2.0};
  s.widths = {0.2};
  const ScalarField f = generate_gaussian_mixture(s, 16, 16);
  CHECK(add_uniform_noise(f, 0.0, 1).values == f.values);
  const ScalarField g = add_uniform_noise(f, 0.1, 7);
  CHECK(g.dims == f.dims);
  CHECK(g.values.size() == f.values.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < f.values.size(); ++i)
    worst = std::max(worst, std::abs(g.values[i] - f.values[i]));
  CHECK(worst <= 0.05 * f.range());
  CHECK(worst > 0.0);
  CHECK(add_uniform_noise(f, 0.1, 7).values == g.values);
  CHECK(add_uniform_noise(f, 0.1, 8).values != g.values);
}

TEST_CASE("stability ensemble reproduces the target square") {
  const StabilityEnsemble e = generate_stability_ensemble(0.0, 3);
  REQUIRE(e.fields.size() == 16);
  std::vector<PersistenceDiagram> pds;
  for (const auto& f : e.fields) pds.push_back(persistence_pairs(compute_merge_tree(f)));
  double worst = 0.0;
  for (int i = 0; i < 16; ++i)
    for (int j = i + 1; j < 16; ++j)
      worst = std::max(worst, std::abs(wasserstein_diagrams(pds[i], pds[j]).distance -
                                       e.distances(i, j)));
  CHECK(worst < 2e-3);
  // f_(0,0) is member 0, f_(1,0) member 3, f_(1,1) member 15
  CHECK(wasserstein_diagrams(pds[0], pds[3]).distance == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(wasserstein_diagrams(pds[0], pds[15]).distance ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-3));
  std::vector<int> per_class(4, 0);
  for (int l : e.labels) ++per_class[l];
  CHECK(per_class == std::vector<int>{4, 4, 4, 4});
  CHECK(e.labels[0] == 0);
  CHECK(e.labels[3] == 1);
  CHECK(e.labels[15] == 2);
  CHECK(e.labels[12] == 3);
}

TEST_CASE("noisy stability ensemble is seed-deterministic") {
  const auto a = generate_stability_ensemble(0.05, 11, 64);
  const auto b = generate_stability_ensemble(0.05, 11, 64);
  for (int i = 0; i < 16; ++i) CHECK(a.fields[i].values == b.fields[i].values);
}
