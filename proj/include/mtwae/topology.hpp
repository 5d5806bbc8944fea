#pragma once

#include <utility>
#include <vector>

#include "mtwae/field.hpp"

namespace mtwae {

enum class TreeKind { Join, Split };
enum class NodeType { Leaf, Saddle, Root };

struct MergeNode {
  int vertex = -1;
  double scalar = 0.0;
  NodeType type = NodeType::Leaf;
};

struct MergeTree {
  TreeKind kind = TreeKind::Split;
  std::vector<MergeNode> nodes;
  std::vector<std::pair<int, int>> arcs;  // (child node, parent node)

  int root() const;
  std::vector<std::vector<int>> children() const;
};

struct DiagramPoint {
  double birth = 0.0;
  double death = 0.0;
  int extremum = -1;
  int paired = -1;

  double persistence() const { return death - birth; }
};

struct PersistenceDiagram {
  std::vector<DiagramPoint> points;
};

inline constexpr int kNoParent = -1;

struct Branch {
  double birth = 0.0;
  double death = 0.0;
  int parent = kNoParent;

  double persistence() const { return death - birth; }
};

/// Global affine scale used to undo the local normalization.
struct Scale {
  double min = 0.0;
  double range = 1.0;
};

/// Branch decomposition tree. The root is branch 0 and every parent index
/// is smaller than its child's, so index order is a top-down traversal.
struct BDT {
  std::vector<Branch> branches;
  bool normalized = false;
  Scale scale;

  int size() const { return static_cast<int>(branches.size()); }
  bool empty() const { return branches.empty(); }
  std::vector<std::vector<int>> children() const;
};

/// Checks root/parent ordering, birth <= death and nesting. When
/// `check_nesting` is false only the structural part is verified.
void validate(const BDT& b, bool check_nesting = true);

/// Subtree of `node` in index order, node first.
std::vector<int> subtree(const BDT& b, int node);

/// Persistence of each branch relative to the root, following the chain of
/// normalized persistences (unnormalized trees: persistence / root persistence).
std::vector<double> global_relative_persistence(const BDT& b);

MergeTree compute_merge_tree(const ScalarField& f, TreeKind kind = TreeKind::Split);
PersistenceDiagram persistence_pairs(const MergeTree& t);
BDT branch_decomposition(const MergeTree& t);

PersistenceDiagram simplify(const PersistenceDiagram& d, double threshold);
BDT simplify(const BDT& b, double threshold);

/// Reattaches a branch to its grandparent while its saddle lies within
/// eps1 * range of its parent's saddle. eps1 = 1 yields a star tree.
BDT merge_saddles(const BDT& b, double eps1, TreeKind kind = TreeKind::Split);

BDT normalize(const BDT& b, double eps2 = 1.0, double eps3 = 0.0);
BDT denormalize(const BDT& b);

MergeTree bdt_to_merge_tree(const BDT& b);
PersistenceDiagram bdt_to_diagram(const BDT& b);

/// Star tree from a diagram: most persistent point becomes the root.
BDT diagram_to_bdt(const PersistenceDiagram& d);

struct ExtractOptions {
  TreeKind kind = TreeKind::Split;
  double eps1 = 0.05;
  double eps2 = 0.95;
  double eps3 = 0.9;
  double simplify = 0.0025;
  bool normalize = true;
};

/// Field to (optionally normalized) BDT: tree, decomposition, simplification,
/// saddle merging, normalization.
BDT extract_bdt(const ScalarField& f, const ExtractOptions& opt);

}  // namespace mtwae
