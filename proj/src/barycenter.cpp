#include "mtwae/barycenter.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "mtwae/error.hpp"
#include "mtwae/parallel.hpp"
#include "mtwae/rng.hpp"

namespace mtwae {

int medoid(const Eigen::MatrixXd& d) {
  int best = 0;
  double best_sum = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const double s = d.row(i).squaredNorm();
    if (s < best_sum) {
      best_sum = s;
      best = static_cast<int>(i);
    }
  }
  return best;
}

double frechet_energy(std::span<const BDT> ensemble, const BDT& center) {
  std::vector<double> d(ensemble.size());
  parallel_for(ensemble.size(), [&](std::size_t m) {
    const double w = wasserstein_bdt(center, ensemble[m]).distance;
    d[m] = w * w;
  });
  double s = 0.0;
  for (double v : d) s += v;
  return s;
}

namespace {

// Fixed-assignment cost of `center` against the members, optionally with a
// set of center branches (closed under descendants) removed.
double fixed_cost(std::span<const BDT> ensemble, const BDT& center,
                  const std::vector<std::vector<int>>& partners, const std::vector<char>& dropped) {
  double s = 0.0;
  for (std::size_t m = 0; m < ensemble.size(); ++m) {
    const BDT& member = ensemble[m];
    std::vector<char> used(member.branches.size(), 0);
    for (int b = 0; b < center.size(); ++b) {
      const int p = partners[m][b];
      if (dropped[b]) continue;
      const Eigen::Vector2d c = point(center.branches[b]);
      if (p == kDiagonal) {
        s += diagonal_cost2(c);
      } else {
        s += ground_cost2(c, point(member.branches[p]));
        used[p] = 1;
      }
    }
    for (int j = 0; j < member.size(); ++j)
      if (!used[j]) s += diagonal_cost2(point(member.branches[j]));
  }
  return s;
}

BDT remove_branches(const BDT& b, const std::vector<char>& dropped) {
  BDT out;
  out.normalized = b.normalized;
  out.scale = b.scale;
  std::vector<int> map(b.branches.size(), -1);
  for (int i = 0; i < b.size(); ++i) {
    if (dropped[i]) continue;
    Branch br = b.branches[i];
    if (i > 0) br.parent = map[br.parent];
    map[i] = out.size();
    out.branches.push_back(br);
  }
  return out;
}

}  // namespace

BarycenterResult barycenter(std::span<const BDT> ensemble, const BDT& seed,
                            const BarycenterOptions& opt) {
  if (ensemble.empty()) throw InvalidArgument("barycenter of an empty ensemble");
  const int n = static_cast<int>(ensemble.size());
  BarycenterResult res;
  BDT center = seed;
  for (int it = 0; it < opt.max_iterations; ++it) {
    std::vector<Transport> t(n);
    parallel_for(n, [&](std::size_t m) { t[m] = wasserstein_bdt(center, ensemble[m]); });
    double e = 0.0;
    for (const auto& tm : t) e += tm.distance * tm.distance;
    const double prev = res.energy.empty() ? 0.0 : res.energy.back();
    res.energy.push_back(e);
    res.iterations = it + 1;
    res.tree = center;
    res.assignments.clear();
    for (auto& tm : t) res.assignments.push_back(std::move(tm.phi));
    if (e == 0.0) break;
    if (it > 0 && prev - e < opt.min_relative_decrease * prev) break;

    std::vector<std::vector<int>> partners(n);
    for (int m = 0; m < n; ++m) partners[m] = res.assignments[m].left_partners(center.size());

    // Mean update, diagonal partners standing in at the current projection.
    BDT next = center;
    std::vector<int> diagonal_count(center.branches.size(), 0);
    for (int b = 0; b < center.size(); ++b) {
      Eigen::Vector2d sum = Eigen::Vector2d::Zero();
      const Eigen::Vector2d cur = point(center.branches[b]);
      for (int m = 0; m < n; ++m) {
        const int p = partners[m][b];
        if (p == kDiagonal) {
          sum += diagonal_projection(cur);
          ++diagonal_count[b];
        } else {
          sum += point(ensemble[m].branches[p]);
        }
      }
      next.branches[b].birth = sum.x() / n;
      next.branches[b].death = sum.y() / n;
    }

    std::vector<char> dropped(center.branches.size(), 0);
    bool any = false;
    for (int b = 1; b < center.size(); ++b) {
      if (dropped[center.branches[b].parent] || 2 * diagonal_count[b] >= n) {
        dropped[b] = 1;
        any = true;
      }
    }
    if (any) {
      const std::vector<char> none(center.branches.size(), 0);
      if (fixed_cost(ensemble, next, partners, dropped) <= fixed_cost(ensemble, next, partners, none))
        next = remove_branches(next, dropped);
    }
    center = std::move(next);
  }
  return res;
}

BarycenterResult barycenter(std::span<const BDT> ensemble, const BarycenterOptions& opt) {
  if (ensemble.empty()) throw InvalidArgument("barycenter of an empty ensemble");
  const int seed = ensemble.size() == 1 ? 0 : medoid(distance_matrix(ensemble));
  return barycenter(ensemble, ensemble[seed], opt);
}

Eigen::MatrixXd ClusteringVector::one_hot() const {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(size(), k);
  for (int i = 0; i < size(); ++i) c(i, member_of[i]) = 1.0;
  return c;
}

namespace {

// k-means++ seeding from squared distances to the chosen centers.
std::vector<int> plus_plus(int n, int k, Rng& rng,
                           const std::function<double(int, int)>& dist2) {
  std::vector<int> chosen{static_cast<int>(rng.below(n))};
  std::vector<double> d2(n);
  for (int i = 0; i < n; ++i) d2[i] = dist2(i, chosen[0]);
  while (static_cast<int>(chosen.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += d2[i];
    int pick = -1;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (int i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        pick = i;
        u -= d2[i];
        if (u < 0.0) break;
      }
    } else {
      for (int i = 0; i < n && pick < 0; ++i)
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) pick = i;
    }
    chosen.push_back(pick);
    for (int i = 0; i < n; ++i) d2[i] = std::min(d2[i], dist2(i, pick));
    d2[pick] = 0.0;
  }
  return chosen;
}

}  // namespace

KMeansResult wasserstein_kmeans(std::span<const BDT> ensemble, int k, std::uint64_t seed,
                                int max_rounds) {
  const int n = static_cast<int>(ensemble.size());
  if (k < 1 || k > n) throw InvalidArgument("k must lie in [1, n]");
  const Eigen::MatrixXd dm = distance_matrix(ensemble);
  Rng rng(seed);
  KMeansResult res;
  res.clusters.k = k;
  for (int c : plus_plus(n, k, rng, [&](int i, int j) { return dm(i, j) * dm(i, j); }))
    res.centroids.push_back(ensemble[c]);

  std::vector<int> prev;
  for (int round = 0; round < max_rounds; ++round) {
    std::vector<double> d(static_cast<std::size_t>(n) * k);
    parallel_for(d.size(), [&](std::size_t q) {
      d[q] = wasserstein_bdt(ensemble[q / k], res.centroids[q % k]).distance;
    });
    std::vector<int> assign(n);
    std::vector<double> cost(n);
    std::vector<int> size(k, 0);
    for (int i = 0; i < n; ++i) {
      int best = 0;
      for (int c = 1; c < k; ++c)
        if (d[i * k + c] < d[i * k + best]) best = c;
      assign[i] = best;
      cost[i] = d[i * k + best] * d[i * k + best];
      ++size[best];
    }
    for (int c = 0; c < k; ++c) {
      if (size[c] > 0) continue;
      int far = -1;
      for (int i = 0; i < n; ++i)
        if (size[assign[i]] > 1 && (far < 0 || cost[i] > cost[far])) far = i;
      --size[assign[far]];
      assign[far] = c;
      size[c] = 1;
      cost[far] = 0.0;
      res.centroids[c] = ensemble[far];
    }
    double e = 0.0;
    for (double v : cost) e += v;
    res.energy.push_back(e);
    res.rounds = round + 1;
    res.clusters.member_of = assign;
    if (assign == prev) break;
    prev = assign;

    for (int c = 0; c < k; ++c) {
      std::vector<BDT> members;
      for (int i = 0; i < n; ++i)
        if (assign[i] == c) members.push_back(ensemble[i]);
      const BarycenterResult b = barycenter(members);
      if (b.energy.back() < frechet_energy(members, res.centroids[c])) res.centroids[c] = b.tree;
    }
  }
  return res;
}

EuclideanKMeans kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed, int restarts,
                       int max_iterations) {
  const int n = static_cast<int>(x.rows());
  if (k < 1 || k > n) throw InvalidArgument("k must lie in [1, n]");
  Rng rng(seed);
  EuclideanKMeans best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    const auto seeds = plus_plus(n, k, rng, [&](int i, int j) {
      return (x.row(i) - x.row(j)).squaredNorm();
    });
    Eigen::MatrixXd c(k, x.cols());
    for (int j = 0; j < k; ++j) c.row(j) = x.row(seeds[j]);
    std::vector<int> assign(n, -1);
    for (int it = 0; it < max_iterations; ++it) {
      bool changed = false;
      for (int i = 0; i < n; ++i) {
        int b = 0;
        double bd = (x.row(i) - c.row(0)).squaredNorm();
        for (int j = 1; j < k; ++j) {
          const double dj = (x.row(i) - c.row(j)).squaredNorm();
          if (dj < bd) {
            bd = dj;
            b = j;
          }
        }
        if (assign[i] != b) changed = true;
        assign[i] = b;
      }
      if (!changed && it > 0) break;
      Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, x.cols());
      std::vector<int> size(k, 0);
      for (int i = 0; i < n; ++i) {
        sum.row(assign[i]) += x.row(i);
        ++size[assign[i]];
      }
      for (int j = 0; j < k; ++j) {
        if (size[j] > 0) {
          c.row(j) = sum.row(j) / size[j];
          continue;
        }
        int far = -1;
        double fd = -1.0;
        for (int i = 0; i < n; ++i) {
          const double di = (x.row(i) - c.row(assign[i])).squaredNorm();
          if (size[assign[i]] > 1 && di > fd) {
            fd = di;
            far = i;
          }
        }
        --size[assign[far]];
        assign[far] = j;
        size[j] = 1;
        c.row(j) = x.row(far);
      }
    }
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) inertia += (x.row(i) - c.row(assign[i])).squaredNorm();
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.centroids = c;
      best.clusters.k = k;
      best.clusters.member_of = assign;
    }
  }
  return best;
}

}  // namespace mtwae
