#include "mtwae/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "mtwae/error.hpp"

namespace mtwae {

int MergeTree::root() const {
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
    if (nodes[i].type == NodeType::Root) return i;
  return -1;
}

std::vector<std::vector<int>> MergeTree::children() const {
  std::vector<std::vector<int>> ch(nodes.size());
  for (auto [c, p] : arcs) ch[p].push_back(c);
  return ch;
}

std::vector<std::vector<int>> BDT::children() const {
  std::vector<std::vector<int>> ch(branches.size());
  for (int i = 1; i < size(); ++i) ch[branches[i].parent].push_back(i);
  return ch;
}

void validate(const BDT& b, bool check_nesting) {
  if (b.empty()) return;
  if (b.branches[0].parent != kNoParent) throw InvalidArgument("branch 0 must be the root");
  for (int i = 0; i < b.size(); ++i) {
    const Branch& br = b.branches[i];
    if (!std::isfinite(br.birth) || !std::isfinite(br.death))
      throw InvalidArgument("branch " + std::to_string(i) + " has a non-finite coordinate");
    if (i > 0 && (br.parent < 0 || br.parent >= i))
      throw InvalidArgument("branch " + std::to_string(i) + " has an invalid parent index");
    if (!check_nesting) continue;
    if (br.birth > br.death)
      throw InvalidArgument("branch " + std::to_string(i) + " has birth > death");
    if (b.normalized) {
      if (br.birth < 0.0 || br.death > 1.0)
        throw InvalidArgument("normalized branch " + std::to_string(i) + " leaves [0,1]");
    } else if (i > 0) {
      const Branch& p = b.branches[br.parent];
      if (br.birth < p.birth || br.death > p.death)
        throw InvalidArgument("branch " + std::to_string(i) + " violates nesting");
    }
  }
  if (b.normalized && check_nesting &&
      (b.branches[0].birth != 0.0 || b.branches[0].death != 1.0))
    throw InvalidArgument("normalized root must be (0,1)");
}

std::vector<int> subtree(const BDT& b, int node) {
  std::vector<char> in(b.branches.size(), 0);
  std::vector<int> out{node};
  in[node] = 1;
  for (int i = node + 1; i < b.size(); ++i)
    if (in[b.branches[i].parent]) {
      in[i] = 1;
      out.push_back(i);
    }
  return out;
}

std::vector<double> global_relative_persistence(const BDT& b) {
  std::vector<double> g(b.branches.size(), 0.0);
  if (b.empty()) return g;
  if (b.normalized) {
    g[0] = std::max(0.0, b.branches[0].persistence());
    for (int i = 1; i < b.size(); ++i)
      g[i] = g[b.branches[i].parent] * std::max(0.0, b.branches[i].persistence());
  } else {
    const double r = b.branches[0].persistence();
    for (int i = 0; i < b.size(); ++i)
      g[i] = r > 0.0 ? std::max(0.0, b.branches[i].persistence()) / r : (i == 0 ? 1.0 : 0.0);
  }
  return g;
}

namespace {

// Strict sweep order: higher scalar first for split trees, lower for join
// trees; equal scalars go by ascending vertex id.
struct Older {
  TreeKind kind;
  bool operator()(double sa, int va, double sb, int vb) const {
    if (sa != sb) return kind == TreeKind::Split ? sa > sb : sa < sb;
    return va < vb;
  }
};

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void attach(int child_root, int root) { parent_[child_root] = root; }

 private:
  std::vector<int> parent_;
};

struct RawBranch {
  int leaf = -1;   // tree node
  int death = -1;  // tree node where it dies (root for the eldest)
  int parent = -1; // raw branch index
};

// Elder-rule decomposition; result is in top-down order, root first,
// siblings by decreasing persistence.
std::vector<RawBranch> decompose(const MergeTree& t) {
  const int n = static_cast<int>(t.nodes.size());
  if (n == 0) return {};
  const Older older{t.kind};
  const auto ch = t.children();
  const int root = t.root();
  if (root < 0) throw InvalidArgument("merge tree has no root");

  std::vector<int> post;
  post.reserve(n);
  {
    std::vector<std::pair<int, std::size_t>> stack{{root, 0}};
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < ch[node].size()) {
        const int c = ch[node][next++];
        stack.emplace_back(c, 0);
      } else {
        post.push_back(node);
        stack.pop_back();
      }
    }
  }
  if (static_cast<int>(post.size()) != n) throw InvalidArgument("merge tree is not connected");

  std::vector<int> elder(n, -1);
  std::vector<int> branch_of_leaf(n, -1);
  std::vector<RawBranch> raw;
  auto is_older = [&](int a, int b) {
    return older(t.nodes[a].scalar, t.nodes[a].vertex, t.nodes[b].scalar, t.nodes[b].vertex);
  };
  for (int node : post) {
    if (ch[node].empty()) {
      elder[node] = node;
      branch_of_leaf[node] = static_cast<int>(raw.size());
      raw.push_back({node, -1, -1});
      continue;
    }
    int e = elder[ch[node][0]];
    for (int c : ch[node])
      if (is_older(elder[c], e)) e = elder[c];
    for (int c : ch[node]) {
      if (elder[c] == e) continue;
      RawBranch& r = raw[branch_of_leaf[elder[c]]];
      r.death = node;
      r.parent = branch_of_leaf[e];
    }
    elder[node] = e;
  }
  const int root_branch = branch_of_leaf[elder[root]];
  raw[root_branch].death = root;
  if (ch[root].empty()) raw[root_branch].death = root;

  auto pers = [&](const RawBranch& r) {
    return std::abs(t.nodes[r.leaf].scalar - t.nodes[r.death].scalar);
  };
  std::vector<std::vector<int>> kids(raw.size());
  for (int i = 0; i < static_cast<int>(raw.size()); ++i)
    if (raw[i].parent >= 0) kids[raw[i].parent].push_back(i);
  for (auto& k : kids)
    std::stable_sort(k.begin(), k.end(), [&](int a, int b) {
      const double pa = pers(raw[a]), pb = pers(raw[b]);
      if (pa != pb) return pa > pb;
      return is_older(raw[a].leaf, raw[b].leaf);
    });
  std::vector<int> order{root_branch}, new_index(raw.size(), -1);
  for (std::size_t q = 0; q < order.size(); ++q)
    for (int c : kids[order[q]]) order.push_back(c);
  for (std::size_t i = 0; i < order.size(); ++i) new_index[order[i]] = static_cast<int>(i);
  std::vector<RawBranch> out;
  out.reserve(order.size());
  for (int o : order) {
    RawBranch r = raw[o];
    r.parent = r.parent >= 0 ? new_index[r.parent] : -1;
    out.push_back(r);
  }
  return out;
}

}  // namespace

MergeTree compute_merge_tree(const ScalarField& f, TreeKind kind) {
  validate(f);
  const int n = f.size();
  const Older older{kind};
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return older(f.values[a], a, f.values[b], b);
  });

  const int nx = f.dims[0], ny = f.dims[1], nz = f.dims[2];
  MergeTree t;
  t.kind = kind;
  UnionFind uf(n);
  std::vector<int> head(n, -1);
  std::vector<char> done(n, 0);
  int roots[6];
  for (int k = 0; k < n; ++k) {
    const int v = order[k];
    const int x = v % nx, y = (v / nx) % ny, z = v / (nx * ny);
    int count = 0;
    auto visit = [&](int u) {
      if (!done[u]) return;
      const int r = uf.find(u);
      for (int i = 0; i < count; ++i)
        if (roots[i] == r) return;
      roots[count++] = r;
    };
    if (x > 0) visit(v - 1);
    if (x + 1 < nx) visit(v + 1);
    if (y > 0) visit(v - nx);
    if (y + 1 < ny) visit(v + nx);
    if (z > 0) visit(v - nx * ny);
    if (z + 1 < nz) visit(v + nx * ny);
    done[v] = 1;
    const bool last = k == n - 1;
    if (count == 0) {
      head[v] = static_cast<int>(t.nodes.size());
      t.nodes.push_back({v, f.values[v], NodeType::Leaf});
      continue;
    }
    if (count == 1 && !last) {
      uf.attach(v, roots[0]);
      continue;
    }
    const int node = static_cast<int>(t.nodes.size());
    t.nodes.push_back({v, f.values[v], last ? NodeType::Root : NodeType::Saddle});
    for (int i = 0; i < count; ++i) {
      t.arcs.emplace_back(head[roots[i]], node);
      if (i > 0) uf.attach(roots[i], roots[0]);
    }
    uf.attach(v, roots[0]);
    head[roots[0]] = node;
  }
  return t;
}

PersistenceDiagram persistence_pairs(const MergeTree& t) {
  PersistenceDiagram d;
  for (const RawBranch& r : decompose(t)) {
    const MergeNode& a = t.nodes[r.leaf];
    const MergeNode& b = t.nodes[r.death];
    d.points.push_back({std::min(a.scalar, b.scalar), std::max(a.scalar, b.scalar), a.vertex,
                        b.vertex});
  }
  return d;
}

BDT branch_decomposition(const MergeTree& t) {
  BDT b;
  for (const RawBranch& r : decompose(t)) {
    const double s0 = t.nodes[r.leaf].scalar, s1 = t.nodes[r.death].scalar;
    b.branches.push_back({std::min(s0, s1), std::max(s0, s1), r.parent});
  }
  return b;
}

PersistenceDiagram simplify(const PersistenceDiagram& d, double threshold) {
  if (threshold < 0.0 || threshold > 1.0) throw InvalidArgument("threshold must be in [0,1]");
  if (d.points.empty()) return d;
  double lo = d.points[0].birth, hi = d.points[0].death;
  for (const auto& p : d.points) {
    lo = std::min(lo, p.birth);
    hi = std::max(hi, p.death);
  }
  PersistenceDiagram out;
  for (const auto& p : d.points)
    if (p.persistence() >= threshold * (hi - lo)) out.points.push_back(p);
  return out;
}

BDT simplify(const BDT& b, double threshold) {
  if (threshold < 0.0 || threshold > 1.0) throw InvalidArgument("threshold must be in [0,1]");
  if (b.empty()) return b;
  const auto g = global_relative_persistence(b);
  std::vector<int> map(b.branches.size(), -1);
  BDT out;
  out.normalized = b.normalized;
  out.scale = b.scale;
  for (int i = 0; i < b.size(); ++i) {
    if (i > 0 && g[i] < threshold) continue;
    Branch br = b.branches[i];
    if (i > 0) {
      int p = br.parent;
      while (map[p] < 0) p = b.branches[p].parent;
      br.parent = map[p];
    }
    map[i] = out.size();
    out.branches.push_back(br);
  }
  return out;
}

BDT merge_saddles(const BDT& b, double eps1, TreeKind kind) {
  if (eps1 < 0.0 || eps1 > 1.0) throw InvalidArgument("eps1 must be in [0,1]");
  BDT out = b;
  if (b.empty()) return out;
  const double range = b.branches[0].persistence();
  auto saddle = [&](int i) {
    return kind == TreeKind::Split ? out.branches[i].birth : out.branches[i].death;
  };
  for (int i = 1; i < out.size(); ++i) {
    int p = out.branches[i].parent;
    while (p != 0 && std::abs(saddle(i) - saddle(p)) < eps1 * range) p = out.branches[p].parent;
    out.branches[i].parent = p;
  }
  return out;
}

BDT normalize(const BDT& b, double eps2, double eps3) {
  if (b.normalized) throw InvalidArgument("BDT is already normalized");
  BDT out = b;
  if (b.empty()) return out;
  const auto g = global_relative_persistence(b);
  const Branch& root = b.branches[0];
  out.normalized = true;
  out.scale = {root.birth, root.persistence()};
  out.branches[0].birth = 0.0;
  out.branches[0].death = 1.0;
  for (int i = 1; i < b.size(); ++i) {
    const int p = b.branches[i].parent;
    const Branch& pp = b.branches[p];
    const double len = pp.death - pp.birth;
    if (!(len > 0.0))
      throw DegenerateError("branch " + std::to_string(p) + " has zero persistence", p);
    double x = (b.branches[i].birth - pp.birth) / len;
    double y = (b.branches[i].death - pp.birth) / len;
    if (eps2 < 1.0 && g[i] < 1.0 - eps3 && y - x > eps2) {
      const double mid = 0.5 * (x + y);
      x = mid - 0.5 * eps2;
      y = mid + 0.5 * eps2;
    }
    out.branches[i].birth = x;
    out.branches[i].death = y;
  }
  return out;
}

BDT denormalize(const BDT& b) {
  if (!b.normalized) throw InvalidArgument("BDT is not normalized");
  BDT out = b;
  out.normalized = false;
  if (b.empty()) return out;
  const Scale s = b.scale;
  out.branches[0].birth = s.min + b.branches[0].birth * s.range;
  out.branches[0].death = s.min + b.branches[0].death * s.range;
  for (int i = 1; i < b.size(); ++i) {
    const Branch& pp = out.branches[b.branches[i].parent];
    const double len = pp.death - pp.birth;
    out.branches[i].birth = pp.birth + b.branches[i].birth * len;
    out.branches[i].death = pp.birth + b.branches[i].death * len;
  }
  return out;
}

MergeTree bdt_to_merge_tree(const BDT& in) {
  const BDT b = in.normalized ? denormalize(in) : in;
  validate(b, true);
  MergeTree t;
  t.kind = TreeKind::Split;
  if (b.empty()) return t;
  const int n = b.size();
  std::vector<int> leaf(n), bottom(n);
  for (int i = 0; i < n; ++i) {
    leaf[i] = static_cast<int>(t.nodes.size());
    t.nodes.push_back({2 * i, b.branches[i].death, NodeType::Leaf});
    bottom[i] = static_cast<int>(t.nodes.size());
    t.nodes.push_back({2 * i + 1, b.branches[i].birth, i == 0 ? NodeType::Root : NodeType::Saddle});
  }
  const Older older{TreeKind::Split};
  const auto ch = b.children();
  for (int i = 0; i < n; ++i) {
    std::vector<int> chain;
    for (int c : ch[i]) chain.push_back(bottom[c]);
    std::sort(chain.begin(), chain.end(), [&](int x, int y) {
      return older(t.nodes[x].scalar, t.nodes[x].vertex, t.nodes[y].scalar, t.nodes[y].vertex);
    });
    int prev = leaf[i];
    for (int node : chain) {
      t.arcs.emplace_back(prev, node);
      prev = node;
    }
    t.arcs.emplace_back(prev, bottom[i]);
  }
  return t;
}

PersistenceDiagram bdt_to_diagram(const BDT& b) {
  PersistenceDiagram d;
  for (const Branch& br : b.branches) d.points.push_back({br.birth, br.death, -1, -1});
  return d;
}

BDT diagram_to_bdt(const PersistenceDiagram& d) {
  BDT b;
  if (d.points.empty()) return b;
  std::vector<int> order(d.points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int c) {
    return d.points[a].persistence() > d.points[c].persistence();
  });
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& p = d.points[order[k]];
    b.branches.push_back({p.birth, p.death, k == 0 ? kNoParent : 0});
  }
  return b;
}

BDT extract_bdt(const ScalarField& f, const ExtractOptions& opt) {
  BDT b = branch_decomposition(compute_merge_tree(f, opt.kind));
  b = simplify(b, opt.simplify);
  b = merge_saddles(b, opt.eps1, opt.kind);
  if (opt.normalize) b = normalize(b, opt.eps2, opt.eps3);
  return b;
}

}  // namespace mtwae
