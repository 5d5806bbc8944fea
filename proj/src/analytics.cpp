#include "mtwae/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mtwae/error.hpp"
#include "mtwae/metric.hpp"
#include "mtwae/parallel.hpp"

namespace mtwae {

CompressedEnsemble compress(const TrainedModel& model, std::span<const BDT> ensemble,
                            std::vector<std::string> names) {
  CompressedEnsemble c;
  c.out = model.network.layers.back().out;
  const auto traces = forward(model.network, ensemble, model.config.n_it);
  c.coeffs.resize(static_cast<Eigen::Index>(ensemble.size()), c.out.basis.dim());
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    c.coeffs.row(static_cast<Eigen::Index>(i)) = traces[i].layers.back().alpha.transpose();
    c.scales.push_back(ensemble[i].scale);
  }
  if (names.empty())
    for (std::size_t i = 0; i < ensemble.size(); ++i) names.push_back("member_" + std::to_string(i));
  if (names.size() != ensemble.size()) throw InvalidArgument("one name per member");
  c.names = std::move(names);
  return c;
}

std::vector<BDT> decompress_normalized(const CompressedEnsemble& c) {
  if (c.coeffs.cols() != c.out.basis.dim())
    throw InvalidArgument("coefficient width does not match the stored basis");
  if (static_cast<int>(c.scales.size()) != c.size()) throw InvalidArgument("one scale per member");
  std::vector<BDT> out;
  for (int i = 0; i < c.size(); ++i) {
    BDT b = gamma(apply(c.out.basis, c.coeffs.row(i).transpose()));
    b.normalized = true;
    b.scale = c.scales[i];
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<BDT> decompress(const CompressedEnsemble& c) {
  std::vector<BDT> out = decompress_normalized(c);
  for (auto& b : out) b = denormalize(b);
  return out;
}

std::size_t binary_size(std::span<const BDT> ensemble) {
  ByteWriter w;
  w.i32(static_cast<std::int32_t>(ensemble.size()));
  for (const auto& b : ensemble) write_binary(w, b);
  return w.bytes().size();
}

namespace {

struct Sections {
  std::string origin, basis, coeffs, scales;
};

Sections pack(const CompressedEnsemble& c) {
  Sections s;
  ByteWriter o;
  write_binary(o, c.out.origin());
  s.origin = o.bytes();
  ByteWriter b;
  b.i32(static_cast<std::int32_t>(c.out.basis.vectors.cols()));
  b.matrix(c.out.basis.vectors);
  s.basis = b.bytes();
  ByteWriter k;
  k.i32(c.size());
  k.matrix(c.coeffs);
  s.coeffs = k.bytes();
  ByteWriter sc;
  for (const auto& x : c.scales) {
    sc.f64(x.min);
    sc.f64(x.range);
  }
  s.scales = sc.bytes();
  return s;
}

}  // namespace

std::size_t binary_size(const CompressedEnsemble& c) {
  const Sections s = pack(c);
  return s.origin.size() + s.basis.size() + s.coeffs.size() + s.scales.size();
}

double compression_factor(std::size_t original_bytes, std::size_t compressed_bytes) {
  if (original_bytes == 0 || compressed_bytes == 0) throw InvalidArgument("sizes must be positive");
  return static_cast<double>(original_bytes) / static_cast<double>(compressed_bytes);
}

Json to_json(const CompressedEnsemble& c) {
  const Sections s = pack(c);
  return {{"format", "mtwae-compressed-1"},
          {"members", c.names},
          {"origin", base64_encode(s.origin)},
          {"basis", base64_encode(s.basis)},
          {"coeffs", base64_encode(s.coeffs)},
          {"scales", base64_encode(s.scales)}};
}

CompressedEnsemble compressed_from_json(const Json& j) {
  if (!j.is_object() || j.value("format", "") != "mtwae-compressed-1")
    throw InputError("not a compressed ensemble");
  auto section = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string()) throw InputError(std::string("missing section ") + key);
    return base64_decode(j[key].get<std::string>());
  };
  CompressedEnsemble c;
  c.names = j.at("members").get<std::vector<std::string>>();
  const std::string origin = section("origin"), basis = section("basis"),
                    coeffs = section("coeffs"), scales = section("scales");
  ByteReader ro(origin);
  BDT o = read_binary(ro);
  o.normalized = true;
  validate(o, false);
  ByteReader rb(basis);
  const int d = rb.i32();
  c.out.basis.vectors = rb.matrix(2 * o.size(), d);
  c.out.basis.origin = std::move(o);
  ByteReader rk(coeffs);
  const int n = rk.i32();
  c.coeffs = rk.matrix(n, d);
  ByteReader rs(scales);
  for (int i = 0; i < n; ++i) {
    const double lo = rs.f64();
    c.scales.push_back({lo, rs.f64()});
  }
  if (!ro.done() || !rb.done() || !rk.done() || !rs.done())
    throw InputError("trailing bytes in a compressed section");
  if (static_cast<int>(c.names.size()) != n) throw InputError("member names do not match the coefficients");
  return c;
}

Eigen::MatrixXd layout2d(const TrainedModel& model) {
  if (model.latent.cols() != 2) throw InvalidArgument("layout needs a two-dimensional latent space");
  return model.latent;
}

std::vector<BDT> in_data_units(std::span<const BDT> ensemble) {
  std::vector<BDT> out;
  for (const auto& b : ensemble) out.push_back(b.normalized ? denormalize(b) : b);
  return out;
}

Eigen::MatrixXd euclidean_distances(const Eigen::MatrixXd& p) {
  const Eigen::Index n = p.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (p.row(i) - p.row(j)).norm();
  return d;
}

namespace {

Eigen::MatrixXd contingency(const ClusteringVector& a, const ClusteringVector& b) {
  if (a.size() != b.size()) throw InvalidArgument("partitions differ in size");
  const int ka = *std::max_element(a.member_of.begin(), a.member_of.end()) + 1;
  const int kb = *std::max_element(b.member_of.begin(), b.member_of.end()) + 1;
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(ka, kb);
  for (int i = 0; i < a.size(); ++i) t(a.member_of[i], b.member_of[i]) += 1.0;
  return t;
}

double entropy(const Eigen::VectorXd& counts, double n) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i)
    if (counts[i] > 0) h -= counts[i] / n * std::log(counts[i] / n);
  return h;
}

}  // namespace

double nmi(const ClusteringVector& a, const ClusteringVector& b) {
  if (a.size() == 0) throw InvalidArgument("empty partition");
  const Eigen::MatrixXd t = contingency(a, b);
  const double n = a.size();
  const Eigen::VectorXd ra = t.rowwise().sum(), cb = t.colwise().sum().transpose();
  double mi = 0.0;
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      if (t(i, j) > 0) mi += t(i, j) / n * std::log(n * t(i, j) / (ra[i] * cb[j]));
  const double ha = entropy(ra, n), hb = entropy(cb, n);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

double ari(const ClusteringVector& a, const ClusteringVector& b) {
  if (a.size() == 0) throw InvalidArgument("empty partition");
  const Eigen::MatrixXd t = contingency(a, b);
  auto c2 = [](double x) { return 0.5 * x * (x - 1.0); };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) index += c2(t.data()[i]);
  const Eigen::VectorXd ra = t.rowwise().sum(), cb = t.colwise().sum().transpose();
  for (Eigen::Index i = 0; i < ra.size(); ++i) sa += c2(ra[i]);
  for (Eigen::Index j = 0; j < cb.size(); ++j) sb += c2(cb[j]);
  const double expected = sa * sb / c2(a.size());
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

double sim(const Eigen::MatrixXd& d, const Eigen::MatrixXd& dl) {
  if (d.rows() != dl.rows() || d.cols() != dl.cols() || d.rows() != d.cols())
    throw InvalidArgument("distance matrices must be square and of equal size");
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = i + 1; j < d.cols(); ++j) {
      num += std::abs(d(i, j) - dl(i, j));
      den += std::max(d(i, j), dl(i, j));
    }
  if (den == 0.0) return 1.0;
  return std::clamp(1.0 - num / den, 0.0, 1.0);
}

double sim_normalized(const Eigen::MatrixXd& d, const Eigen::MatrixXd& dl) {
  const double a = d.size() ? d.maxCoeff() : 0.0, b = dl.size() ? dl.maxCoeff() : 0.0;
  return sim(a > 0.0 ? Eigen::MatrixXd(d / a) : d, b > 0.0 ? Eigen::MatrixXd(dl / b) : dl);
}

double average_relative_error(std::span<const BDT> ensemble, std::span<const BDT> reconstructed) {
  if (ensemble.size() != reconstructed.size() || ensemble.empty())
    throw InvalidArgument("need one reconstruction per member");
  const std::size_t n = ensemble.size();
  std::vector<double> err(n);
  parallel_for(n, [&](std::size_t i) { err[i] = wasserstein_bdt(ensemble[i], reconstructed[i]).distance; });
  double scale = distance_matrix(ensemble).maxCoeff();
  if (!(scale > 0.0)) {
    BDT root;
    root.branches.push_back({0.0, 1.0, kNoParent});
    root.normalized = true;
    for (const auto& b : ensemble) scale = std::max(scale, wasserstein_bdt(b, root).distance);
  }
  const double mean = std::accumulate(err.begin(), err.end(), 0.0) / n;
  return scale > 0.0 ? mean / scale : mean;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b, bool* degenerate) {
  const Eigen::ArrayXd x = a.array() - a.mean(), y = b.array() - b.mean();
  const double sx = std::sqrt((x * x).sum()), sy = std::sqrt((y * y).sum());
  if (degenerate) *degenerate = !(sx > 0.0 && sy > 0.0);
  if (!(sx > 0.0 && sy > 0.0)) return 0.0;
  return std::clamp((x * y).sum() / (sx * sy), -1.0, 1.0);
}

namespace {

std::vector<int> most_persistent(const BDT& b, int top_k) {
  const auto g = global_relative_persistence(b);
  std::vector<int> order(b.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return g[i] > g[j]; });
  order.resize(std::min<std::size_t>(order.size(), std::max(0, top_k)));
  return order;
}

}  // namespace

std::vector<PCVPoint> pcv(const Eigen::MatrixXd& latent, std::span<const BDT> ensemble,
                          const BarycenterResult& center, int top_k) {
  const int n = static_cast<int>(ensemble.size());
  if (latent.rows() != n || latent.cols() < 2) throw InvalidArgument("need N two-dimensional latent points");
  if (static_cast<int>(center.assignments.size()) != n)
    throw InvalidArgument("barycenter assignments do not match the ensemble");
  std::vector<std::vector<int>> partner(n);
  std::vector<BDT> raw(n);
  for (int i = 0; i < n; ++i) {
    partner[i] = center.assignments[i].left_partners(center.tree.size());
    raw[i] = ensemble[i].normalized ? denormalize(ensemble[i]) : ensemble[i];
  }
  std::vector<PCVPoint> out;
  for (int b : most_persistent(center.tree, top_k)) {
    Eigen::VectorXd p(n);
    for (int i = 0; i < n; ++i)
      p[i] = partner[i][b] == kDiagonal ? 0.0 : raw[i].branches[partner[i][b]].persistence();
    PCVPoint pt;
    pt.branch = b;
    bool d1 = false, d2 = false;
    pt.rho1 = pearson(p, latent.col(0), &d1);
    pt.rho2 = pearson(p, latent.col(1), &d2);
    pt.degenerate = d1 || d2;
    out.push_back(pt);
  }
  return out;
}

std::vector<FLIEntry> fli(const Network& net, const BDT& center, LatentTree which) {
  std::vector<const BDT*> chain;
  const int last = net.latent_layer();
  for (int k = 0; k <= last; ++k) chain.push_back(&net.layers[k].in.origin());
  switch (which) {
    case LatentTree::NextInput:
      if (last + 1 < static_cast<int>(net.layers.size())) chain.push_back(&net.layers[last + 1].in.origin());
      else chain.push_back(&net.layers[last].out.origin());
      break;
    case LatentTree::LatentOutput:
      chain.push_back(&net.layers[last].out.origin());
      break;
    case LatentTree::LatentInput:
      break;
  }
  std::vector<int> at(center.size());
  std::iota(at.begin(), at.end(), 0);
  const BDT* prev = &center;
  for (const BDT* next : chain) {
    const std::vector<int> p = wasserstein_bdt(*prev, *next).phi.left_partners(prev->size());
    for (int& a : at)
      if (a != kDiagonal) a = p[a];
    prev = next;
  }
  const auto g0 = global_relative_persistence(center);
  const auto g1 = global_relative_persistence(*prev);
  std::vector<FLIEntry> out;
  for (int b = 0; b < center.size(); ++b) {
    FLIEntry e;
    e.branch = b;
    e.original = g0[b];
    e.latent = at[b] == kDiagonal ? 0.0 : g1[at[b]];
    e.fli = e.original > 0.0 ? e.latent / e.original : 0.0;
    out.push_back(e);
  }
  return out;
}

std::vector<std::vector<std::pair<int, int>>> track_features(std::span<const BDT> sequence,
                                                             int top_k) {
  if (sequence.size() < 2) throw InvalidArgument("tracking needs at least two members");
  std::vector<std::vector<int>> next(sequence.size() - 1);
  parallel_for(next.size(), [&](std::size_t t) {
    next[t] = wasserstein_bdt(sequence[t], sequence[t + 1]).phi.left_partners(sequence[t].size());
  });
  std::vector<std::vector<std::pair<int, int>>> chains;
  for (int b : most_persistent(sequence[0], top_k)) {
    std::vector<std::pair<int, int>> c{{0, b}};
    for (std::size_t t = 0; t + 1 < sequence.size(); ++t) {
      const int p = next[t][c.back().second];
      if (p == kDiagonal) break;
      c.emplace_back(static_cast<int>(t + 1), p);
    }
    chains.push_back(std::move(c));
  }
  return chains;
}

}  // namespace mtwae
