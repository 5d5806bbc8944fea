#include "mtwae/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

#include <Eigen/LU>

#include "mtwae/error.hpp"
#include "mtwae/rng.hpp"
#include "mtwae/topology.hpp"

namespace mtwae {

static_assert(std::endian::native == std::endian::little,
              "field files are little-endian; add byte swapping for this target");

double ScalarField::range() const {
  if (values.empty()) return 0.0;
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return *hi - *lo;
}

void validate(const ScalarField& f) {
  if (f.dims[0] < 1 || f.dims[1] < 1 || f.dims[2] < 1)
    throw InvalidArgument("field dims must be positive");
  if (f.size() < 2) throw InvalidArgument("field needs at least two vertices");
  if (static_cast<int>(f.values.size()) != f.size())
    throw InvalidArgument("value count mismatch");
  for (double v : f.values)
    if (!std::isfinite(v)) throw InvalidArgument("non-finite value");
}

ScalarField load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open field file " + path);
  std::string header;
  if (!std::getline(in, header)) throw InputError(path + ": malformed header at byte 0");
  std::istringstream hs(header);
  std::string magic;
  ScalarField f;
  if (!(hs >> magic >> f.dims[0] >> f.dims[1] >> f.dims[2]) || magic != "SFLD1")
    throw InputError(path + ": malformed header at byte 0");
  if (f.dims[0] < 1 || f.dims[1] < 1 || f.dims[2] < 1 ||
      static_cast<long long>(f.dims[0]) * f.dims[1] * f.dims[2] > (1LL << 31))
    throw InputError(path + ": malformed header at byte 0");
  const std::size_t offset = header.size() + 1;
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t n = static_cast<std::size_t>(f.size());
  if (bytes.size() != n * sizeof(double)) {
    std::ostringstream msg;
    msg << path << ": value count mismatch at byte " << offset + std::min(bytes.size(), n * 8)
        << " (declared " << n << ", found " << bytes.size() / 8.0 << ")";
    throw InputError(msg.str());
  }
  f.values.resize(n);
  std::memcpy(f.values.data(), bytes.data(), bytes.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(f.values[i])) {
      std::ostringstream msg;
      msg << path << ": non-finite value at byte " << offset + i * 8;
      throw InputError(msg.str());
    }
  }
  if (f.size() < 2) throw InputError(path + ": field needs at least two vertices");
  return f;
}

void save_field(const ScalarField& f, const std::string& path) {
  validate(f);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << "SFLD1 " << f.dims[0] << ' ' << f.dims[1] << ' ' << f.dims[2] << '\n';
  out.write(reinterpret_cast<const char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
}

ScalarField generate_gaussian_mixture(const GaussianSpec& spec, int nx, int ny) {
  const std::size_t k = spec.centers.size();
  if (k == 0) throw InvalidArgument("empty Gaussian mixture");
  if (spec.amplitudes.size() != k || spec.widths.size() != k)
    throw InvalidArgument("Gaussian spec lists differ in length");
  for (double w : spec.widths)
    if (!(w > 0.0)) throw InvalidArgument("Gaussian widths must be positive");
  if (nx < 2 || ny < 1) throw InvalidArgument("grid too small");

  ScalarField f;
  f.dims = {nx, ny, 1};
  f.values.assign(static_cast<std::size_t>(nx) * ny, 0.0);
  for (int y = 0; y < ny; ++y) {
    const double py = ny > 1 ? static_cast<double>(y) / (ny - 1) : 0.5;
    for (int x = 0; x < nx; ++x) {
      const double px = static_cast<double>(x) / (nx - 1);
      double v = 0.0;
      for (std::size_t g = 0; g < k; ++g) {
        const double dx = px - spec.centers[g].x();
        const double dy = py - spec.centers[g].y();
        const double w = spec.widths[g];
        v += spec.amplitudes[g] * std::exp(-(dx * dx + dy * dy) / (2.0 * w * w));
      }
      f.values[f.index(x, y)] = v;
    }
  }
  return f;
}

ScalarField add_uniform_noise(const ScalarField& f, double eps, std::uint64_t seed) {
  if (eps < 0.0) throw InvalidArgument("noise amplitude must be non-negative");
  ScalarField out = f;
  if (eps == 0.0) return out;
  const double half = 0.5 * eps * f.range();
  Rng rng(seed);
  for (double& v : out.values) v += rng.uniform(-half, half);
  return out;
}

namespace {

// Base design: one broad hill whose gentle flanks host the two extra maxima,
// and one narrow hill far from both.
struct Design {
  Eigen::Vector2d hill1{0.15, 0.15};
  double amp1 = 4.0, width1 = 0.35;
  Eigen::Vector2d hill2{0.8, 0.8};
  double amp2 = 3.5, width2 = 0.08;
  double bump_width = 0.012;
  // Diagram points of the extra maxima keep these midpoints; their offset
  // from the diagonal encodes the ground-truth coordinate.
  double mid_x = 1.1, mid_y = 2.5;
  Eigen::Vector2d dir_x{1.0, 0.0};
  Eigen::Vector2d dir_y{0.0, 1.0};
};

struct Bump {
  double amplitude = 0.0;
  double radius = 0.0;
};

GaussianSpec base_spec(const Design& d) {
  GaussianSpec s;
  s.centers = {d.hill1, d.hill2};
  s.amplitudes = {d.amp1, d.amp2};
  s.widths = {d.width1, d.width2};
  return s;
}

void add_bump(GaussianSpec& s, const Design& d, const Eigen::Vector2d& dir, const Bump& b) {
  s.centers.push_back(d.hill1 + b.radius * dir);
  s.amplitudes.push_back(b.amplitude);
  s.widths.push_back(d.bump_width);
}

// (birth, death) of the diagram point created by the bump, or nullopt.
std::optional<Eigen::Vector2d> measure(const Design& d, const Eigen::Vector2d& dir, const Bump& b,
                                       int grid) {
  GaussianSpec s = base_spec(d);
  add_bump(s, d, dir, b);
  const ScalarField f = generate_gaussian_mixture(s, grid, grid);
  const PersistenceDiagram pd = persistence_pairs(compute_merge_tree(f, TreeKind::Split));
  const Eigen::Vector2d c = d.hill1 + b.radius * dir;
  const double h = 1.0 / (grid - 1);
  std::optional<Eigen::Vector2d> best;
  double best_dist = 4.0 * h;
  for (const auto& p : pd.points) {
    const int vx = p.extremum % grid, vy = p.extremum / grid;
    const double dist = (Eigen::Vector2d(vx * h, vy * h) - c).norm();
    if (dist <= best_dist) {
      best_dist = dist;
      best = Eigen::Vector2d(p.birth, p.death);
    }
  }
  return best;
}

Bump solve_bump(const Design& d, const Eigen::Vector2d& dir, double mid, double a, int grid) {
  const Eigen::Vector2d target(mid - a / std::sqrt(2.0), mid + a / std::sqrt(2.0));
  Bump b;
  // Start where the flank level equals the target saddle.
  b.radius = d.width1 * std::sqrt(2.0 * std::log(d.amp1 / target.x()));
  b.amplitude = target.y() - target.x() + 0.05;
  auto residual = [&](const Bump& q) -> std::optional<Eigen::Vector2d> {
    auto m = measure(d, dir, q, grid);
    if (!m) return std::nullopt;
    return Eigen::Vector2d(*m - target);
  };
  auto r = residual(b);
  if (!r) throw NumericError("stability ensemble: initial bump is not a maximum");
  for (int it = 0; it < 100 && r->norm() > 1e-11; ++it) {
    const double h = 1e-7;
    Eigen::Matrix2d J;
    for (int k = 0; k < 2; ++k) {
      Bump q = b;
      (k == 0 ? q.amplitude : q.radius) += h;
      auto rq = residual(q);
      if (!rq) throw NumericError("stability ensemble: bump vanished during solve");
      J.col(k) = (*rq - *r) / h;
    }
    const Eigen::Vector2d step = J.fullPivLu().solve(-*r);
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
      Bump q{b.amplitude + t * step.x(), b.radius + t * step.y()};
      if (q.amplitude <= 0.0) continue;
      auto rq = residual(q);
      if (rq && rq->norm() < r->norm()) {
        b = q;
        r = rq;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (r->norm() > 1e-6) throw NumericError("stability ensemble: bump solve did not converge");
  return b;
}

}  // namespace

StabilityEnsemble generate_stability_ensemble(double noise_eps, std::uint64_t seed, int grid) {
  const Design d;
  const double levels[4] = {0.0, 0.15, 0.85, 1.0};
  Bump bx[4], by[4];
  for (int i = 1; i < 4; ++i) {
    bx[i] = solve_bump(d, d.dir_x, d.mid_x, levels[i], grid);
    by[i] = solve_bump(d, d.dir_y, d.mid_y, levels[i], grid);
  }

  // Corner classes, each listed counter-clockwise from its outer corner.
  const int corner_of[4] = {0, 0, 1, 1};  // level index -> near 0 or near 1
  StabilityEnsemble e;
  Rng rng(seed);
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 4; ++i) {
      GaussianSpec s = base_spec(d);
      if (i > 0) add_bump(s, d, d.dir_x, bx[i]);
      if (j > 0) add_bump(s, d, d.dir_y, by[j]);
      ScalarField f = generate_gaussian_mixture(s, grid, grid);
      const std::uint64_t member_seed = rng.next();
      if (noise_eps > 0.0) f = add_uniform_noise(f, noise_eps, member_seed);
      std::ostringstream name;
      name << "f_" << levels[i] << "_" << levels[j];
      f.name = name.str();
      e.fields.push_back(std::move(f));
      e.parameters.emplace_back(levels[i], levels[j]);
      const int cx = corner_of[i], cy = corner_of[j];
      // 0 bottom-left, 1 bottom-right, 2 top-right, 3 top-left
      e.labels.push_back(cy == 0 ? cx : (cx == 1 ? 2 : 3));
    }
  }
  const int n = static_cast<int>(e.parameters.size());
  e.distances.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) e.distances(i, j) = (e.parameters[i] - e.parameters[j]).norm();
  return e;
}

}  // namespace mtwae
