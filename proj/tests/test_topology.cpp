#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mtwae/error.hpp"
#include "mtwae/topology.hpp"
#include "oracles.hpp"

using namespace mtwae;

namespace {

ScalarField line(std::vector<double> v) {
  ScalarField f;
  f.dims = {static_cast<int>(v.size()), 1, 1};
  f.values = std::move(v);
  return f;
}

std::vector<std::pair<double, double>> sorted_pairs(const BDT& b) {
  std::vector<std::pair<double, double>> p;
  for (const auto& br : b.branches) p.emplace_back(br.birth, br.death);
  std::sort(p.begin(), p.end());
  return p;
}

std::vector<std::pair<double, double>> sorted_pairs(const PersistenceDiagram& d) {
  std::vector<std::pair<double, double>> p;
  for (const auto& pt : d.points) p.emplace_back(pt.birth, pt.death);
  std::sort(p.begin(), p.end());
  return p;
}

int count(const MergeTree& t, NodeType type) {
  return static_cast<int>(std::count_if(t.nodes.begin(), t.nodes.end(),
                                        [&](const MergeNode& n) { return n.type == type; }));
}

}  // namespace

TEST_CASE("split tree of a 1x5 line") {
  const MergeTree t = compute_merge_tree(line({0, 3, 1, 2, 0}));
  CHECK(count(t, NodeType::Leaf) == 2);
  CHECK(count(t, NodeType::Saddle) == 1);
  CHECK(count(t, NodeType::Root) == 1);
  for (const auto& n : t.nodes) {
    if (n.type == NodeType::Saddle) CHECK(n.scalar == 1.0);
    if (n.type == NodeType::Root) CHECK(n.scalar == 0.0);
  }
  std::vector<double> leaves;
  for (const auto& n : t.nodes)
    if (n.type == NodeType::Leaf) leaves.push_back(n.scalar);
  std::sort(leaves.begin(), leaves.end());
  CHECK(leaves == std::vector<double>{2, 3});
  for (auto [c, p] : t.arcs) CHECK(t.nodes[c].scalar >= t.nodes[p].scalar);

  const PersistenceDiagram d = persistence_pairs(t);
  CHECK(sorted_pairs(d) == std::vector<std::pair<double, double>>{{0, 3}, {1, 2}});
  const BDT b = branch_decomposition(t);
  REQUIRE(b.size() == 2);
  CHECK(b.branches[0].birth == 0.0);
  CHECK(b.branches[0].death == 3.0);
  CHECK(b.branches[1].birth == 1.0);
  CHECK(b.branches[1].death == 2.0);
  CHECK(b.branches[1].parent == 0);
}

TEST_CASE("join tree pairs minima") {
  const PersistenceDiagram d = persistence_pairs(compute_merge_tree(line({3, 0, 2, 1, 3}), TreeKind::Join));
  CHECK(sorted_pairs(d) == std::vector<std::pair<double, double>>{{0, 3}, {1, 2}});
}

TEST_CASE("monotone and constant fields") {
  const MergeTree m = compute_merge_tree(line({0, 1, 2, 3}));
  CHECK(count(m, NodeType::Leaf) == 1);
  CHECK(count(m, NodeType::Saddle) == 0);
  const PersistenceDiagram d = persistence_pairs(m);
  REQUIRE(d.points.size() == 1);
  CHECK(d.points[0].birth == 0.0);
  CHECK(d.points[0].death == 3.0);

  const MergeTree c = compute_merge_tree(line({2, 2, 2, 2}));
  CHECK(count(c, NodeType::Leaf) == 1);
  REQUIRE(c.nodes.size() == 2);
  CHECK(c.nodes[0].vertex == 0);
}

TEST_CASE("equal maxima: the lower vertex index survives") {
  const PersistenceDiagram d = persistence_pairs(compute_merge_tree(line({1, 0, 1})));
  REQUIRE(d.points.size() == 2);
  CHECK(d.points[0].extremum == 0);
  CHECK(d.points[1].extremum == 2);
  CHECK(d.points[1].birth == 0.0);
  CHECK(d.points[1].death == 1.0);
}

TEST_CASE("decomposition and pairs agree on random fields") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const ScalarField f = oracle::random_field(rng, 2 + trial % 7, 1 + trial % 5);
    const MergeTree t = compute_merge_tree(f);
    const BDT b = branch_decomposition(t);
    CHECK(sorted_pairs(b) == sorted_pairs(persistence_pairs(t)));
    CHECK_NOTHROW(validate(b));
    // round trip through the merge tree reconstruction
    CHECK(sorted_pairs(branch_decomposition(bdt_to_merge_tree(b))) == sorted_pairs(b));
    // saddle merging with eps1 = 1 gives a star
    const BDT star = merge_saddles(b, 1.0);
    for (int i = 1; i < star.size(); ++i) CHECK(star.branches[i].parent == 0);
    CHECK_NOTHROW(validate(star));
    CHECK(sorted_pairs(star) == sorted_pairs(b));
  }
}

TEST_CASE("3D fields use 6-connectivity") {
  ScalarField f;
  f.dims = {2, 2, 2};
  // two maxima at opposite corners, joined through the rest
  f.values = {5, 0.5, 0, 1, 1, 0, 0, 4};
  const PersistenceDiagram d = persistence_pairs(compute_merge_tree(f));
  CHECK(sorted_pairs(d) == std::vector<std::pair<double, double>>{{0, 5}, {0.5, 4}});
}

TEST_CASE("simplification") {
  PersistenceDiagram d;
  d.points = {{0, 1, -1, -1}, {0.4, 0.401, -1, -1}};
  CHECK(simplify(d, 0.0).points.size() == 2);
  CHECK(simplify(d, 0.0025).points.size() == 1);

  BDT b;
  b.branches = {{0, 1, kNoParent}, {0.1, 0.2, 0}, {0.12, 0.19, 1}, {0.5, 0.9, 0}};
  const BDT s = simplify(b, 0.08);
  REQUIRE(s.size() == 3);
  CHECK(s.branches[1].birth == 0.1);
  CHECK(s.branches[2].birth == 0.5);
  CHECK(s.branches[2].parent == 0);
  // a non-nested tree exercises reattachment to the grandparent
  BDT loose;
  loose.branches = {{0, 1, kNoParent}, {0.1, 0.2, 0}, {0.0, 0.5, 1}};
  const BDT r = simplify(loose, 0.2);
  REQUIRE(r.size() == 2);
  CHECK(r.branches[1].parent == 0);
  CHECK(simplify(b, 1.0).size() == 1);
  CHECK(simplify(b, 0.0).size() == 4);
}

TEST_CASE("saddle merging") {
  BDT b;
  b.branches = {{0, 1, kNoParent}, {0.50, 0.9, 0}, {0.51, 0.8, 1}};
  const BDT m = merge_saddles(b, 0.05);
  CHECK(m.branches[2].parent == 0);
  CHECK(merge_saddles(b, 0.0).branches[2].parent == 1);
  CHECK(merge_saddles(b, 0.005).branches[2].parent == 1);
}

TEST_CASE("local normalization") {
  BDT b;
  b.branches = {{0, 1, kNoParent}, {0.25, 0.75, 0}};
  BDT n = normalize(b);
  CHECK(n.normalized);
  CHECK(n.branches[1].birth == 0.25);
  CHECK(n.branches[1].death == 0.75);

  BDT c;
  c.branches = {{0.5, 1.5, kNoParent}, {0.6, 1.0, 0}};
  n = normalize(c);
  CHECK(n.branches[0].birth == 0.0);
  CHECK(n.branches[0].death == 1.0);
  CHECK(n.branches[1].birth == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(n.branches[1].death == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(n.scale.min == 0.5);
  CHECK(n.scale.range == 1.0);

  BDT single;
  single.branches = {{0, 1, kNoParent}};
  single.normalized = true;
  single.scale = {2.0, 3.0};
  const BDT d = denormalize(single);
  CHECK(d.branches[0].birth == 2.0);
  CHECK(d.branches[0].death == 5.0);

  BDT degenerate;
  degenerate.branches = {{0, 1, kNoParent}, {0.5, 0.5, 0}, {0.5, 0.5, 1}};
  try {
    normalize(degenerate);
    FAIL("expected a degenerate error");
  } catch (const DegenerateError& e) {
    CHECK(e.branch() == 1);
  }
}

TEST_CASE("normalization round trip and range") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    BDT b = oracle::random_bdt(rng, 1 + trial % 9);
    for (auto& br : b.branches) {
      br.birth = 3.0 * br.birth - 1.0;
      br.death = 3.0 * br.death - 1.0;
    }
    const BDT n = normalize(b);
    CHECK_NOTHROW(validate(n));
    for (const auto& br : n.branches) {
      CHECK(br.birth >= 0.0);
      CHECK(br.death <= 1.0);
    }
    const BDT back = denormalize(n);
    CHECK_NOTHROW(validate(back));
    for (int i = 0; i < b.size(); ++i) {
      CHECK(std::abs(back.branches[i].birth - b.branches[i].birth) < 1e-12);
      CHECK(std::abs(back.branches[i].death - b.branches[i].death) < 1e-12);
    }
  }
}

TEST_CASE("balancing rule rescales small but relatively long branches") {
  BDT b;
  b.branches = {{0, 1, kNoParent}, {0.0, 0.05, 0}, {0.001, 0.0495, 1}};
  const BDT n = normalize(b, 0.95, 0.9);
  // branch 2 spans 97% of its parent but only 4.85% of the range
  CHECK(n.branches[2].death - n.branches[2].birth == doctest::Approx(0.95));
  // branch 1 spans 5% of the root, so it is untouched
  CHECK(n.branches[1].death == doctest::Approx(0.05));
  const BDT off = normalize(b, 1.0, 0.9);
  CHECK(off.branches[2].death - off.branches[2].birth == doctest::Approx(0.97));
}

TEST_CASE("bdt to merge tree") {
  BDT b;
  b.branches = {{0, 3, kNoParent}, {1, 2, 0}};
  const MergeTree t = bdt_to_merge_tree(b);
  CHECK(count(t, NodeType::Leaf) == 2);
  CHECK(count(t, NodeType::Root) == 1);
  for (const auto& n : t.nodes)
    if (n.type == NodeType::Saddle) CHECK(n.scalar == 1.0);
  BDT bad;
  bad.branches = {{0, 1, kNoParent}, {0.5, 1.5, 0}};
  CHECK_THROWS_AS(bdt_to_merge_tree(bad), InvalidArgument);

  BDT single;
  single.branches = {{0, 1, kNoParent}};
  CHECK(bdt_to_merge_tree(single).arcs.size() == 1);

  CHECK(bdt_to_diagram(b).points.size() == 2);
  CHECK(bdt_to_diagram(BDT{}).points.empty());
}

TEST_CASE("validate catches structural errors") {
  BDT b;
  b.branches = {{0, 1, kNoParent}, {0.2, 0.3, 2}, {0.1, 0.5, 0}};
  CHECK_THROWS_AS(validate(b), InvalidArgument);
  b.branches = {{0, 1, kNoParent}, {0.4, 0.3, 0}};
  CHECK_THROWS_AS(validate(b), InvalidArgument);
  CHECK_NOTHROW(validate(b, false));
}
