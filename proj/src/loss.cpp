#include "mtwae/loss.hpp"

#include <cmath>
#include <limits>

#include "mtwae/assignment.hpp"
#include "mtwae/error.hpp"
#include "mtwae/kernels.hpp"
#include "mtwae/parallel.hpp"

namespace mtwae {

EnergyResult energy(std::span<const BDT> ensemble, std::span<const BDT> reconstructed) {
  if (ensemble.size() != reconstructed.size())
    throw InvalidArgument("energy needs one reconstruction per member");
  EnergyResult r;
  r.assignments.resize(ensemble.size());
  std::vector<double> cost(ensemble.size());
  parallel_for(ensemble.size(), [&](std::size_t i) {
    r.assignments[i] = wasserstein_bdt(ensemble[i], reconstructed[i]).phi;
    cost[i] = assignment_cost2(ensemble[i], reconstructed[i], r.assignments[i]);
  });
  for (double c : cost) r.value += c;
  return r;
}

Eigen::VectorXd energy_gradient(const BDT& input, const BDT& recon, const Assignment& phi) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(2 * recon.size());
  for (const Match& mt : phi.matches) {
    if (mt.right == kDiagonal) continue;
    const Eigen::Vector2d q = point(recon.branches[mt.right]);
    if (mt.left == kDiagonal) {
      const double d = q.y() - q.x();
      g.segment<2>(2 * mt.right) += Eigen::Vector2d(-d, d);
      continue;
    }
    const Eigen::Vector2d p = point(input.branches[mt.left]);
    if (p.x() == p.y() && q.x() == q.y()) continue;
    g.segment<2>(2 * mt.right) += 2.0 * (q - p);
  }
  return g;
}

double penalty_metric(const Eigen::MatrixXd& latent, const Eigen::MatrixXd& distances) {
  const Eigen::Index n = latent.rows();
  if (distances.rows() != n || distances.cols() != n)
    throw InvalidArgument("distance matrix does not match the latent point count");
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double r = distances(i, j) - (latent.row(i) - latent.row(j)).norm();
      s += r * r;
    }
  return s;
}

Eigen::MatrixXd penalty_metric_gradient(const Eigen::MatrixXd& latent,
                                        const Eigen::MatrixXd& distances) {
  const Eigen::Index n = latent.rows();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, latent.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const Eigen::RowVectorXd diff = latent.row(i) - latent.row(j);
      const double d = diff.norm();
      if (d == 0.0) continue;
      // Both ordered pairs (i,j) and (j,i) contribute the same term.
      const double wij = 0.5 * (distances(i, j) + distances(j, i));
      g.row(i) += -4.0 * (wij - d) / d * diff;
    }
  return g;
}

Eigen::MatrixXd aligned_centroids(const Eigen::MatrixXd& latent, const ClusteringVector& classes,
                                  int k, std::uint64_t seed) {
  if (k < 1) throw InvalidArgument("cluster count must be positive");
  if (classes.size() != latent.rows()) throw InvalidArgument("one class label per latent point");
  if (k < classes.k) throw InvalidArgument("fewer clusters than classes");
  const EuclideanKMeans km = kmeans(latent, k, seed);
  const int n = std::max(k, classes.k);
  Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < classes.size(); ++i)
    overlap(classes.member_of[i], km.clusters.member_of[i]) += 1.0;
  const AssignmentResult a = solve_hungarian(-overlap);
  Eigen::MatrixXd c(k, latent.cols());
  std::vector<char> used(k, 0);
  for (int cls = 0; cls < classes.k; ++cls) {
    c.row(cls) = km.centroids.row(a.row_to_col[cls]);
    used[a.row_to_col[cls]] = 1;
  }
  int row = classes.k;
  for (int l = 0; l < k; ++l)
    if (!used[l]) c.row(row++) = km.centroids.row(l);
  return c;
}

namespace {

// Scores -beta * |a - c_l| and their log-softmax for one point.
Eigen::VectorXd log_softmax_row(const Eigen::RowVectorXd& a, const Eigen::MatrixXd& centroids,
                                double beta) {
  Eigen::VectorXd s(centroids.rows());
  for (Eigen::Index l = 0; l < centroids.rows(); ++l) s[l] = -beta * (a - centroids.row(l)).norm();
  const double m = s.maxCoeff();
  return s.array() - (m + std::log((s.array() - m).exp().sum()));
}

}  // namespace

Eigen::MatrixXd soft_membership(const Eigen::MatrixXd& latent, const Eigen::MatrixXd& centroids,
                                double beta) {
  Eigen::MatrixXd p(latent.rows(), centroids.rows());
  for (Eigen::Index i = 0; i < latent.rows(); ++i)
    p.row(i) = log_softmax_row(latent.row(i), centroids, beta).array().exp().transpose();
  return p;
}

double penalty_cluster(const Eigen::MatrixXd& latent, const ClusteringVector& classes,
                       const Eigen::MatrixXd& centroids, double beta) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < latent.rows(); ++i)
    kl -= log_softmax_row(latent.row(i), centroids, beta)[classes.member_of[i]];
  return kl;
}

Eigen::MatrixXd penalty_cluster_gradient(const Eigen::MatrixXd& latent,
                                         const ClusteringVector& classes,
                                         const Eigen::MatrixXd& centroids, double beta) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(latent.rows(), latent.cols());
  for (Eigen::Index i = 0; i < latent.rows(); ++i) {
    const Eigen::VectorXd p =
        log_softmax_row(latent.row(i), centroids, beta).array().exp().matrix();
    for (Eigen::Index l = 0; l < centroids.rows(); ++l) {
      const Eigen::RowVectorXd diff = latent.row(i) - centroids.row(l);
      const double d = diff.norm();
      if (d == 0.0) continue;
      const double w = p[l] - (l == classes.member_of[i] ? 1.0 : 0.0);
      g.row(i) += w * (-beta / d) * diff;
    }
  }
  return g;
}

Eigen::VectorXd parameters(const Network& net) {
  Eigen::Index n = 0;
  for (const auto& l : net.layers)
    for (const SubLayer* s : {&l.in, &l.out}) n += 2 * s->origin().size() + s->basis.vectors.size();
  Eigen::VectorXd theta(n);
  Eigen::Index at = 0;
  for (const auto& l : net.layers)
    for (const SubLayer* s : {&l.in, &l.out}) {
      const Eigen::VectorXd o = vectorize(s->origin());
      theta.segment(at, o.size()) = o;
      at += o.size();
      const auto& v = s->basis.vectors;
      theta.segment(at, v.size()) = v.reshaped();
      at += v.size();
    }
  return theta;
}

void set_parameters(Network& net, const Eigen::VectorXd& theta) {
  Eigen::Index at = 0;
  for (auto& l : net.layers)
    for (SubLayer* s : {&l.in, &l.out}) {
      const Eigen::Index no = 2 * s->origin().size();
      auto& v = s->basis.vectors;
      if (at + no + v.size() > theta.size()) throw InvalidArgument("parameter vector too short");
      s->basis.origin = with_coordinates(s->basis.origin, theta.segment(at, no));
      at += no;
      v.reshaped() = theta.segment(at, v.size());
      at += v.size();
    }
  if (at != theta.size()) throw InvalidArgument("parameter vector too long");
}

namespace {

struct LayerGrad {
  Eigen::VectorXd in_origin, out_origin;
  Eigen::MatrixXd in_vectors, out_vectors;
};

std::vector<LayerGrad> zero_grad(const Network& net) {
  std::vector<LayerGrad> g;
  for (const auto& l : net.layers) {
    g.push_back({Eigen::VectorXd::Zero(2 * l.in.origin().size()),
                 Eigen::VectorXd::Zero(2 * l.out.origin().size()),
                 Eigen::MatrixXd::Zero(l.in.basis.vectors.rows(), l.in.basis.vectors.cols()),
                 Eigen::MatrixXd::Zero(l.out.basis.vectors.rows(), l.out.basis.vectors.cols())});
  }
  return g;
}

// Reverse pass of one member from the gradient on its reconstruction.
void backward(const Network& net, const MemberTrace& trace, Eigen::VectorXd g,
              const Eigen::RowVectorXd& latent_grad, std::vector<LayerGrad>& out) {
  for (int k = static_cast<int>(net.layers.size()) - 1; k >= 0; --k) {
    const Layer& layer = net.layers[k];
    const LayerState& st = trace.layers[k];
    LayerGrad& lg = out[k];

    Eigen::VectorXd g_raw = Eigen::VectorXd::Zero(st.raw.size());
    for (Eigen::Index j = 1; 2 * j < st.raw.size(); ++j) {
      const GammaBranch<double> gb(st.raw[2 * j], st.raw[2 * j + 1]);
      const auto [gx, gy] = gb.backward(g[2 * j], g[2 * j + 1]);
      g_raw[2 * j] = gx;
      g_raw[2 * j + 1] = gy;
    }
    lg.out_origin += g_raw;
    lg.out_vectors += g_raw * st.alpha.transpose();
    Eigen::VectorXd g_alpha = layer.out.basis.vectors.transpose() * g_raw;
    if (k == net.latent_layer()) g_alpha += latent_grad.transpose();

    const Eigen::VectorXd g_pre = leaky_relu_backward(st.solve.alpha, g_alpha, net.slope);
    Eigen::MatrixXd g_m;
    Eigen::VectorXd g_r;
    pinv_backward(st.system.m, st.system.r, st.solve, g_pre, g_m, g_r);

    const int n_in = k == 0 ? 0 : trace.layers[k - 1].out.size();
    Eigen::VectorXd g_input = Eigen::VectorXd::Zero(2 * n_in);
    for (std::size_t j = 0; j < st.partners.size(); ++j) {
      const Eigen::Index r0 = 2 * static_cast<Eigen::Index>(j);
      const int p = st.partners[j];
      if (p != kDiagonal) {
        lg.in_vectors.middleRows(r0, 2) += g_m.middleRows(r0, 2);
        lg.in_origin.segment<2>(r0) -= g_r.segment<2>(r0);
        if (k > 0) g_input.segment<2>(2 * p) += g_r.segment<2>(r0);
        continue;
      }
      // (I - Delta) is symmetric, so it maps the adjoints unchanged.
      const Eigen::RowVectorXd h = 0.5 * (g_m.row(r0) - g_m.row(r0 + 1));
      lg.in_vectors.row(r0) += h;
      lg.in_vectors.row(r0 + 1) -= h;
      const double hr = 0.5 * (g_r[r0] - g_r[r0 + 1]);
      lg.in_origin[r0] -= hr;
      lg.in_origin[r0 + 1] += hr;
    }
    g = std::move(g_input);
  }
}

}  // namespace

LossValue evaluate(const Network& net, std::span<const BDT> ensemble, int n_it,
                   const Penalties& pen, const FrozenState* frozen, FrozenState* capture,
                   Eigen::VectorXd* gradient) {
  const std::size_t n = ensemble.size();
  LossValue v;
  v.traces = forward(net, ensemble, n_it, frozen ? &frozen->partners : nullptr);

  std::vector<Assignment> phi(n);
  std::vector<double> cost(n);
  parallel_for(n, [&](std::size_t i) {
    const BDT& recon = v.traces[i].output();
    phi[i] = frozen ? frozen->energy[i] : wasserstein_bdt(ensemble[i], recon).phi;
    cost[i] = assignment_cost2(ensemble[i], recon, phi[i]);
  });
  for (double c : cost) v.energy += c;

  const int d = net.layers[net.latent_layer()].dim();
  v.latent.resize(static_cast<Eigen::Index>(n), d);
  for (std::size_t i = 0; i < n; ++i)
    v.latent.row(static_cast<Eigen::Index>(i)) =
        v.traces[i].layers[net.latent_layer()].alpha.transpose();

  Eigen::MatrixXd latent_grad = Eigen::MatrixXd::Zero(v.latent.rows(), d);
  if (pen.distances) {
    v.metric = penalty_metric(v.latent, *pen.distances);
    if (gradient) latent_grad += pen.lambda_m * penalty_metric_gradient(v.latent, *pen.distances);
  }
  Eigen::MatrixXd centroids;
  if (pen.classes) {
    centroids = frozen ? frozen->centroids
                       : aligned_centroids(v.latent, *pen.classes,
                                           pen.clusters > 0 ? pen.clusters : pen.classes->k, pen.seed);
    v.cluster = penalty_cluster(v.latent, *pen.classes, centroids, pen.beta);
    if (gradient)
      latent_grad += pen.lambda_c * penalty_cluster_gradient(v.latent, *pen.classes, centroids, pen.beta);
  }
  v.total = v.energy + pen.lambda_m * v.metric + pen.lambda_c * v.cluster;
  if (!std::isfinite(v.total)) throw NumericError("loss is not finite");

  if (capture) {
    capture->partners.assign(n, {});
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& st : v.traces[i].layers) capture->partners[i].push_back(st.partners);
    capture->energy = phi;
    capture->centroids = centroids;
  }

  if (gradient) {
    std::vector<std::vector<LayerGrad>> per(n);
    parallel_for(n, [&](std::size_t i) {
      per[i] = zero_grad(net);
      const BDT& recon = v.traces[i].output();
      backward(net, v.traces[i], energy_gradient(ensemble[i], recon, phi[i]),
               latent_grad.row(static_cast<Eigen::Index>(i)), per[i]);
    });
    std::vector<LayerGrad> total = zero_grad(net);
    for (const auto& g : per)
      for (std::size_t k = 0; k < total.size(); ++k) {
        total[k].in_origin += g[k].in_origin;
        total[k].in_vectors += g[k].in_vectors;
        total[k].out_origin += g[k].out_origin;
        total[k].out_vectors += g[k].out_vectors;
      }
    Eigen::VectorXd flat(parameters(net).size());
    Eigen::Index at = 0;
    for (const auto& g : total) {
      flat.segment(at, g.in_origin.size()) = g.in_origin;
      at += g.in_origin.size();
      flat.segment(at, g.in_vectors.size()) = g.in_vectors.reshaped();
      at += g.in_vectors.size();
      flat.segment(at, g.out_origin.size()) = g.out_origin;
      at += g.out_origin.size();
      flat.segment(at, g.out_vectors.size()) = g.out_vectors.reshaped();
      at += g.out_vectors.size();
    }
    *gradient = std::move(flat);
  }
  return v;
}

}  // namespace mtwae
