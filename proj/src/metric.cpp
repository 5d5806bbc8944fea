#include "mtwae/metric.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "mtwae/assignment.hpp"
#include "mtwae/error.hpp"
#include "mtwae/parallel.hpp"

namespace mtwae {

std::vector<int> Assignment::left_partners(int n_left) const {
  std::vector<int> p(n_left, kDiagonal);
  for (const Match& m : matches)
    if (m.left != kDiagonal) p[m.left] = m.right;
  return p;
}

std::vector<int> Assignment::right_partners(int n_right) const {
  std::vector<int> p(n_right, kDiagonal);
  for (const Match& m : matches)
    if (m.right != kDiagonal) p[m.right] = m.left;
  return p;
}

double ground_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& q, double order) {
  if (!(order > 0.0)) throw InvalidArgument("ground distance order must be positive");
  if (p.x() == p.y() && q.x() == q.y()) return 0.0;
  const double dx = std::abs(p.x() - q.x()), dy = std::abs(p.y() - q.y());
  if (order == 2.0) return std::sqrt(dx * dx + dy * dy);
  return std::pow(std::pow(dx, order) + std::pow(dy, order), 1.0 / order);
}

std::pair<PersistenceDiagram, PersistenceDiagram> augment(const PersistenceDiagram& di,
                                                         const PersistenceDiagram& dj) {
  PersistenceDiagram a = di, b = dj;
  for (const auto& p : dj.points) {
    const double m = 0.5 * (p.birth + p.death);
    a.points.push_back({m, m, -1, -1});
  }
  for (const auto& p : di.points) {
    const double m = 0.5 * (p.birth + p.death);
    b.points.push_back({m, m, -1, -1});
  }
  return {a, b};
}

namespace {

std::vector<int> solve_square(const Eigen::MatrixXd& c) {
  if (c.rows() <= kExactSolverLimit) return solve_hungarian(c).row_to_col;
  try {
    return solve_auction(c).row_to_col;
  } catch (const NumericError&) {
    // The gap is relative to the optimum, which can be tiny next to the
    // largest cost; the exact solver always terminates.
    return solve_hungarian(c).row_to_col;
  }
}

template <class P>
bool lex_less(const std::vector<P>& a, const std::vector<P>& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].birth != b[i].birth) return a[i].birth < b[i].birth;
    if (a[i].death != b[i].death) return a[i].death < b[i].death;
    if constexpr (requires { a[i].parent; })
      if (a[i].parent != b[i].parent) return a[i].parent < b[i].parent;
  }
  return false;
}

Assignment swapped(const Assignment& phi) {
  Assignment out;
  for (const Match& m : phi.matches) out.matches.push_back({m.right, m.left});
  return out;
}

double pow_cost(const Eigen::Vector2d& p, const Eigen::Vector2d& q, double order) {
  const double d = ground_distance(p, q, order);
  return order == 2.0 ? d * d : std::pow(d, order);
}

}  // namespace

Transport wasserstein_diagrams(const PersistenceDiagram& di, const PersistenceDiagram& dj,
                               double order) {
  // Solve in a canonical argument order so that d(a,b) == d(b,a) bitwise.
  if (lex_less(dj.points, di.points)) {
    Transport t = wasserstein_diagrams(dj, di, order);
    t.phi = swapped(t.phi);
    return t;
  }
  const int n = static_cast<int>(di.points.size());
  const int m = static_cast<int>(dj.points.size());
  Transport t;
  if (n + m == 0) return t;
  // Rows: points of di then diagonal slots; columns: points of dj then
  // diagonal slots. Any diagonal slot stands for the projection of its partner.
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n + m, n + m);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d p = point(di.points[i]);
    const double del = pow_cost(p, diagonal_projection(p), order);
    for (int j = 0; j < m; ++j) c(i, j) = pow_cost(p, point(dj.points[j]), order);
    for (int k = 0; k < n; ++k) c(i, m + k) = del;
  }
  for (int j = 0; j < m; ++j) {
    const Eigen::Vector2d q = point(dj.points[j]);
    const double ins = pow_cost(diagonal_projection(q), q, order);
    for (int k = 0; k < m; ++k) c(n + k, j) = ins;
  }
  const std::vector<int> col = solve_square(c);
  for (int i = 0; i < n + m; ++i) {
    const int j = col[i];
    if (i < n) t.phi.matches.push_back({i, j < m ? j : kDiagonal});
    else if (j < m) t.phi.matches.push_back({kDiagonal, j});
  }
  t.distance = assignment_cost(di, dj, t.phi, order);
  return t;
}

double assignment_cost(const PersistenceDiagram& di, const PersistenceDiagram& dj,
                       const Assignment& phi, double order) {
  double s = 0.0;
  for (const Match& mt : phi.matches) {
    if (mt.left != kDiagonal && mt.right != kDiagonal) {
      s += pow_cost(point(di.points[mt.left]), point(dj.points[mt.right]), order);
    } else if (mt.left != kDiagonal) {
      const Eigen::Vector2d p = point(di.points[mt.left]);
      s += pow_cost(p, diagonal_projection(p), order);
    } else if (mt.right != kDiagonal) {
      const Eigen::Vector2d q = point(dj.points[mt.right]);
      s += pow_cost(diagonal_projection(q), q, order);
    }
  }
  return std::pow(s, 1.0 / order);
}

double assignment_cost2(const BDT& bi, const BDT& bj, const Assignment& phi) {
  double s = 0.0;
  for (const Match& mt : phi.matches) {
    if (mt.left != kDiagonal && mt.right != kDiagonal)
      s += ground_cost2(point(bi.branches[mt.left]), point(bj.branches[mt.right]));
    else if (mt.left != kDiagonal)
      s += diagonal_cost2(point(bi.branches[mt.left]));
    else if (mt.right != kDiagonal)
      s += diagonal_cost2(point(bj.branches[mt.right]));
  }
  return s;
}

namespace {

class TreeDP {
 public:
  TreeDP(const BDT& a, const BDT& b)
      : a_(a), b_(b), ca_(a.children()), cb_(b.children()),
        na_(a.size()), nb_(b.size()), cost_(na_, nb_) {
    del_a_ = subtree_costs(a_, ca_);
    del_b_ = subtree_costs(b_, cb_);
    for (int i = na_ - 1; i >= 0; --i)
      for (int j = nb_ - 1; j >= 0; --j)
        cost_(i, j) = ground_cost2(point(a_.branches[i]), point(b_.branches[j])) +
                      forest(i, j, nullptr);
  }

  double total() const { return cost_(0, 0); }

  void collect(int i, int j, Assignment& phi) const {
    phi.matches.push_back({i, j});
    std::vector<int> col;
    forest(i, j, &col);
    const auto& ka = ca_[i];
    const auto& kb = cb_[j];
    const int sa = static_cast<int>(ka.size()), sb = static_cast<int>(kb.size());
    for (int r = 0; r < sa; ++r) {
      if (col[r] < sb) collect(ka[r], kb[col[r]], phi);
      else delete_subtree(a_, ka[r], true, phi);
    }
    std::vector<char> taken(sb, 0);
    for (int r = 0; r < sa; ++r)
      if (col[r] < sb) taken[col[r]] = 1;
    for (int s = 0; s < sb; ++s)
      if (!taken[s]) delete_subtree(b_, kb[s], false, phi);
  }

  static void delete_subtree(const BDT& t, int node, bool left, Assignment& phi) {
    for (int k : subtree(t, node))
      phi.matches.push_back(left ? Match{k, kDiagonal} : Match{kDiagonal, k});
  }

 private:
  static std::vector<double> subtree_costs(const BDT& t, const std::vector<std::vector<int>>& ch) {
    std::vector<double> c(t.branches.size(), 0.0);
    for (int i = t.size() - 1; i >= 0; --i) {
      c[i] = diagonal_cost2(point(t.branches[i]));
      for (int k : ch[i]) c[i] += c[k];
    }
    return c;
  }

  // Optimal matching of the child forests of (i, j). When `col` is given it
  // receives, per child of i, the matched child slot (>= |children(j)| means deleted).
  double forest(int i, int j, std::vector<int>* col) const {
    const auto& ka = ca_[i];
    const auto& kb = cb_[j];
    const int sa = static_cast<int>(ka.size()), sb = static_cast<int>(kb.size());
    if (sa == 0 || sb == 0) {
      double s = 0.0;
      for (int k : ka) s += del_a_[k];
      for (int k : kb) s += del_b_[k];
      if (col) col->assign(sa, sb);
      return s;
    }
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(sa + sb, sa + sb);
    for (int r = 0; r < sa; ++r) {
      for (int s = 0; s < sb; ++s) c(r, s) = cost_(ka[r], kb[s]);
      for (int s = sb; s < sa + sb; ++s) c(r, s) = del_a_[ka[r]];
    }
    for (int r = sa; r < sa + sb; ++r)
      for (int s = 0; s < sb; ++s) c(r, s) = del_b_[kb[s]];
    const AssignmentResult res = solve_hungarian(c);
    if (col) col->assign(res.row_to_col.begin(), res.row_to_col.begin() + sa);
    return res.cost;
  }

  const BDT& a_;
  const BDT& b_;
  std::vector<std::vector<int>> ca_, cb_;
  int na_, nb_;
  Eigen::MatrixXd cost_;
  std::vector<double> del_a_, del_b_;
};

}  // namespace

Transport wasserstein_bdt(const BDT& bi, const BDT& bj) {
  if (lex_less(bj.branches, bi.branches)) {
    Transport t = wasserstein_bdt(bj, bi);
    t.phi = swapped(t.phi);
    return t;
  }
  Transport t;
  if (bi.empty() && bj.empty()) return t;
  if (bi.empty() || bj.empty()) {
    if (!bi.empty()) TreeDP::delete_subtree(bi, 0, true, t.phi);
    if (!bj.empty()) TreeDP::delete_subtree(bj, 0, false, t.phi);
  } else {
    TreeDP dp(bi, bj);
    dp.collect(0, 0, t.phi);
  }
  t.distance = std::sqrt(assignment_cost2(bi, bj, t.phi));
  return t;
}

Eigen::MatrixXd distance_matrix(std::span<const BDT> ensemble) {
  const int n = static_cast<int>(ensemble.size());
  if (n == 0) throw InvalidArgument("distance matrix of an empty ensemble");
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  std::vector<double> d(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    d[k] = wasserstein_bdt(ensemble[pairs[k].first], ensemble[pairs[k].second]).distance;
  });
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    m(pairs[k].first, pairs[k].second) = d[k];
    m(pairs[k].second, pairs[k].first) = d[k];
  }
  return m;
}

void write_distance_csv(const std::string& path, const Eigen::MatrixXd& d,
                        const std::vector<std::string>& names) {
  if (static_cast<Eigen::Index>(names.size()) != d.rows())
    throw InvalidArgument("one name per matrix row required");
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out.precision(17);
  out << "member";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    out << names[i];
    for (Eigen::Index j = 0; j < d.cols(); ++j) out << ',' << d(i, j);
    out << '\n';
  }
}

Eigen::MatrixXd read_distance_csv(const std::string& path, std::vector<std::string>* names) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty distance matrix");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const int n = static_cast<int>(header.size());
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw InputError(path + ": missing row " + std::to_string(i));
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    for (int j = 0; j < n; ++j) {
      if (!std::getline(ss, cell, ',')) throw InputError(path + ": short row " + std::to_string(i));
      try {
        m(i, j) = std::stod(cell);
      } catch (const std::exception&) {
        throw InputError(path + ": bad number '" + cell + "'");
      }
    }
  }
  if (names) *names = header;
  return m;
}

}  // namespace mtwae
