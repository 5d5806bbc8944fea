#include "mtwae/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/QR>

#include "mtwae/barycenter.hpp"
#include "mtwae/error.hpp"
#include "mtwae/kernels.hpp"
#include "mtwae/parallel.hpp"
#include "mtwae/rng.hpp"

namespace mtwae {

std::vector<int> Network::dims() const {
  std::vector<int> d;
  for (const auto& l : layers) d.push_back(l.dim());
  return d;
}

namespace {

void check_dims(const std::vector<int>& d, int n_e, int n_d) {
  if (n_e < 1 || n_d < 0) throw InvalidArgument("need n_e >= 1 and n_d >= 0");
  if (static_cast<int>(d.size()) != n_e + n_d)
    throw InvalidArgument("layer count must equal n_e + n_d");
  for (int x : d)
    if (x < 1) throw InvalidArgument("layer dimensions must be positive");
  for (int k = 1; k < n_e; ++k)
    if (!(d[k - 1] > d[k])) throw InvalidArgument("encoder dimensions must strictly decrease");
  for (int k = n_e; k < n_e + n_d; ++k)
    if (!(d[k - 1] < d[k])) throw InvalidArgument("decoder dimensions must strictly increase");
}

}  // namespace

void validate(const Network& net) {
  check_dims(net.dims(), net.n_e, net.n_d);
  for (const auto& l : net.layers) {
    validate(l.in.basis);
    validate(l.out.basis);
    if (l.in.basis.dim() != l.out.basis.dim())
      throw InvalidArgument("input and output sub-layers disagree on dimension");
  }
  if (!(net.slope >= 0.0)) throw InvalidArgument("activation slope must be nonnegative");
}

std::vector<int> TrainConfig::layer_dims() const {
  if (!dims.empty()) return dims;
  std::vector<int> d;
  for (int k = 1; k <= n_e; ++k) d.push_back(d_latent << (n_e - k));
  for (int j = 1; j <= n_d; ++j) {
    const double t = static_cast<double>(j) / n_d;
    d.push_back(d_latent + static_cast<int>(std::lround(t * (d_out - d_latent))));
  }
  return d;
}

void validate(const TrainConfig& c) {
  check_dims(c.layer_dims(), c.n_e, c.n_d);
  for (double cap : {c.cap_in_first, c.cap_inner, c.cap_out_last})
    if (!(cap > 0.0 && cap <= 1.0)) throw InvalidArgument("origin caps must lie in (0,1]");
  if (!(c.learning_rate > 0.0) || !(c.epsilon_hat > 0.0))
    throw InvalidArgument("learning rate and stabilizer must be positive");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0))
    throw InvalidArgument("moment decays must lie in [0,1)");
  if (!(c.init_mix >= 0.0 && c.init_mix <= 1.0)) throw InvalidArgument("init mix must lie in [0,1]");
  if (c.n_it < 1) throw InvalidArgument("n_it must be at least 1");
  if (c.restarts < 1) throw InvalidArgument("restarts must be at least 1");
  if (c.max_epochs < 1 || c.patience < 1) throw InvalidArgument("epoch budget and patience must be positive");
  if (c.clusters < 0) throw InvalidArgument("cluster count must be nonnegative");
  if (!(c.slope >= 0.0)) throw InvalidArgument("activation slope must be nonnegative");
}

std::vector<std::pair<int, int>> origin_caps(const TrainConfig& c, int total_branches) {
  const int layers = static_cast<int>(c.layer_dims().size());
  auto count = [&](double frac) {
    return std::max(1, static_cast<int>(std::floor(frac * total_branches)));
  };
  std::vector<std::pair<int, int>> caps;
  for (int k = 0; k < layers; ++k)
    caps.emplace_back(count(k == 0 ? c.cap_in_first : c.cap_inner),
                      count(k == layers - 1 ? c.cap_out_last : c.cap_inner));
  return caps;
}

BDT gamma(const BDT& raw) {
  BDT out = raw;
  if (out.empty()) return out;
  out.branches[0].birth = 0.0;
  out.branches[0].death = 1.0;
  for (int i = 1; i < out.size(); ++i) {
    const GammaBranch<double> g(raw.branches[i].birth, raw.branches[i].death);
    out.branches[i].birth = g.x;
    out.branches[i].death = g.y;
  }
  return out;
}

BDT truncate(const BDT& b, int max_branches) {
  if (max_branches < 1) throw InvalidArgument("truncation needs room for the root");
  if (b.size() <= max_branches) return b;
  const auto g = global_relative_persistence(b);
  std::vector<int> order(b.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin() + 1, order.end(), [&](int i, int j) { return g[i] > g[j]; });
  std::vector<char> keep(b.size(), 0);
  for (int i = 0; i < max_branches; ++i) keep[order[i]] = 1;

  std::vector<int> map(b.size(), -1);
  BDT out;
  out.normalized = b.normalized;
  out.scale = b.scale;
  for (int i = 0; i < b.size(); ++i) {
    if (!keep[i]) continue;
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

LayerState layer_forward(const Layer& layer, const BDT& b, int n_it, double slope,
                         const std::vector<int>* frozen) {
  LayerState s;
  s.partners = frozen ? *frozen : project(b, layer.in.basis, n_it, false).partners;
  s.system = build_system(b, layer.in.basis, s.partners);
  s.solve = PinvSolve<double>(s.system.m, s.system.r);
  s.alpha = leaky_relu(s.solve.alpha, slope);
  s.raw = vectorize(layer.out.origin()) + layer.out.basis.vectors * s.alpha;
  s.out = gamma(with_coordinates(layer.out.origin(), s.raw));
  s.out.scale = b.scale;
  return s;
}

BDT decode_layer(const Layer& layer, const Eigen::VectorXd& alpha) {
  return gamma(apply(layer.out.basis, alpha));
}

std::vector<MemberTrace> forward(const Network& net, std::span<const BDT> ensemble, int n_it,
                                 const std::vector<std::vector<std::vector<int>>>* frozen) {
  std::vector<MemberTrace> traces(ensemble.size());
  parallel_for(ensemble.size(), [&](std::size_t i) {
    const BDT* input = &ensemble[i];
    auto& t = traces[i];
    t.layers.reserve(net.layers.size());
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
      const std::vector<int>* fz = frozen ? &(*frozen)[i][k] : nullptr;
      t.layers.push_back(layer_forward(net.layers[k], *input, n_it, net.slope, fz));
      input = &t.layers.back().out;
    }
  });
  return traces;
}

namespace {

int rank_of(const Eigen::MatrixXd& m) {
  if (m.cols() == 0) return 0;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(1e-10);
  cod.compute(m);
  return static_cast<int>(cod.rank());
}

Eigen::MatrixXd greedy_basis(const BDT& origin, std::span<const BDT> inputs, int dim, int n_it,
                             Rng& rng) {
  const int rows = 2 * origin.size();
  const Eigen::VectorXd o = vectorize(origin);
  Eigen::MatrixXd v(rows, 0);
  const int n = static_cast<int>(inputs.size());
  for (int c = 0; c < dim; ++c) {
    Eigen::VectorXd col;
    if (c < n) {
      std::vector<double> err(n);
      const BDTBasis current{origin, v};
      parallel_for(n, [&](std::size_t i) {
        if (c == 0) {
          const double d = wasserstein_bdt(origin, inputs[i]).distance;
          err[i] = d * d;
        } else {
          err[i] = project(inputs[i], current, n_it).error;
        }
      });
      const int worst = static_cast<int>(std::max_element(err.begin(), err.end()) - err.begin());
      if (err[worst] > 1e-12) {
        const Assignment phi = wasserstein_bdt(origin, inputs[worst]).phi;
        Eigen::VectorXd cand = reorder(inputs[worst], origin, phi) - o;
        Eigen::MatrixXd trial(rows, c + 1);
        trial << v, cand;
        if (rank_of(trial) == c + 1) col = std::move(cand);
      }
    }
    if (col.size() == 0) {
      col.resize(rows);
      for (int r = 0; r < rows; ++r) col[r] = rng.uniform(-1.0, 1.0);
      double target = c > 0 ? v.colwise().norm().mean() : 0.0;
      if (!(target > 0.0)) target = 0.1;
      const double norm = col.norm();
      if (norm > 0.0) col *= target / norm;
    }
    v.conservativeResize(rows, c + 1);
    v.col(c) = col;
  }
  return v;
}

Eigen::MatrixXd random_stochastic(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd w(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) w(r, c) = rng.uniform();
    const double s = w.row(r).sum();
    if (s > 0.0) w.row(r) /= s;
    else w.row(r).setConstant(1.0 / cols);
  }
  return w;
}

// Row-stochastic map from input-origin to output-origin coordinates: a blend
// of a selection of the assigned input branch and a random stochastic matrix.
// Output branches left unassigned get the random rows alone.
Eigen::MatrixXd output_map(const BDT& out, const BDT& in, double mix, Rng& rng) {
  const Eigen::MatrixXd r = random_stochastic(2 * out.size(), 2 * in.size(), rng);
  if (mix >= 1.0) return r;
  const std::vector<int> partner = wasserstein_bdt(out, in).phi.left_partners(out.size());
  Eigen::MatrixXd w = r;
  for (int j = 0; j < out.size(); ++j) {
    if (partner[j] == kDiagonal) continue;
    for (int c = 0; c < 2; ++c) {
      w.row(2 * j + c) *= mix;
      w(2 * j + c, 2 * partner[j] + c) += 1.0 - mix;
    }
  }
  return w;
}

}  // namespace

Network initialize(std::span<const BDT> ensemble, const TrainConfig& config) {
  validate(config);
  if (ensemble.empty()) throw InvalidArgument("cannot initialize from an empty ensemble");
  int total = 0;
  for (const auto& b : ensemble) {
    if (!b.normalized) throw InvalidArgument("ensemble must be normalized");
    validate(b, false);
    total += b.size();
  }
  const std::vector<int> dims = config.layer_dims();
  const auto caps = origin_caps(config, total);

  Network net;
  net.n_e = config.n_e;
  net.n_d = config.n_d;
  net.slope = config.slope;

  Rng rng(config.seed);
  const BDT center = barycenter(ensemble).tree;
  std::vector<BDT> inputs(ensemble.begin(), ensemble.end());
  for (std::size_t k = 0; k < dims.size(); ++k) {
    Layer layer;
    BDT o_in = truncate(k == 0 ? center : barycenter(inputs).tree, caps[k].first);
    o_in.normalized = true;
    o_in.scale = {};
    layer.in.basis.vectors = greedy_basis(o_in, inputs, dims[k], config.n_it, rng);
    layer.in.basis.origin = o_in;

    BDT o_out = truncate(center, caps[k].second);
    o_out.normalized = true;
    o_out.scale = {};
    const Eigen::MatrixXd w = output_map(o_out, o_in, config.init_mix, rng);
    layer.out.basis.origin = gamma(with_coordinates(o_out, w * vectorize(o_in)));
    layer.out.basis.vectors = w * layer.in.basis.vectors;

    net.layers.push_back(std::move(layer));
    std::vector<BDT> next(inputs.size());
    parallel_for(inputs.size(), [&](std::size_t i) {
      next[i] = layer_forward(net.layers.back(), inputs[i], config.n_it, net.slope).out;
    });
    inputs = std::move(next);
  }
  validate(net);
  return net;
}

}  // namespace mtwae
