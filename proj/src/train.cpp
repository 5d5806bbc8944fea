#include "mtwae/train.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "mtwae/error.hpp"
#include "mtwae/loss.hpp"
#include "mtwae/metric.hpp"
#include "mtwae/rng.hpp"

namespace mtwae {

std::vector<double> TrainedModel::energy_trace() const {
  std::vector<double> e;
  for (const auto& r : trace) e.push_back(r.energy);
  return e;
}

Adam::Adam(Eigen::Index n, double rate, double beta1, double beta2, double eps)
    : m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)),
      rate_(rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

Eigen::VectorXd Adam::step(const Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
  if (grad.size() != m_.size() || theta.size() != m_.size())
    throw InvalidArgument("optimizer state size mismatch");
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  p1_ *= beta1_;
  p2_ *= beta2_;
  const Eigen::ArrayXd mh = m_.array() / (1.0 - p1_);
  const Eigen::ArrayXd vh = v_.array() / (1.0 - p2_);
  return theta.array() - rate_ * mh / (vh.sqrt() + eps_);
}

namespace {

TrainedModel train_once(std::span<const BDT> ensemble, const TrainConfig& config,
                        std::uint64_t init_seed, const std::optional<ClusteringVector>& classes,
                        const Eigen::MatrixXd& distances) {
  TrainedModel model;
  model.config = config;
  TrainConfig init = config;
  init.seed = init_seed;
  model.network = initialize(ensemble, init);

  Penalties pen;
  pen.lambda_m = config.lambda_m;
  pen.lambda_c = config.lambda_c;
  pen.beta = config.softmax_beta;
  pen.clusters = config.clusters;
  pen.seed = config.seed;
  if (config.penalty_metric) pen.distances = &distances;
  if (config.penalty_cluster) pen.classes = &*classes;

  Eigen::VectorXd theta = parameters(model.network);
  Adam adam(theta.size(), config.learning_rate, config.beta1, config.beta2, config.epsilon_hat);
  double previous = std::numeric_limits<double>::infinity();
  int stalled = 0;
  LossValue last;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    Eigen::VectorXd grad;
    last = evaluate(model.network, ensemble, config.n_it, pen, nullptr, nullptr, &grad);
    model.trace.push_back({last.energy, last.metric, last.cluster, last.total});
    if (last.total == 0.0) {
      model.converged = true;
      break;
    }
    if (std::isfinite(previous)) {
      const double rel = (previous - last.total) / previous;
      stalled = (rel >= 0.0 && rel < config.stop_relative_decrease) ? stalled + 1 : 0;
    }
    previous = last.total;
    if (stalled >= config.patience) {
      model.converged = true;
      break;
    }
    if (epoch + 1 == config.max_epochs) break;
    if (!grad.allFinite()) throw NumericError("gradient is not finite");
    theta = adam.step(theta, grad);
    set_parameters(model.network, theta);
  }

  const int n = static_cast<int>(ensemble.size());
  model.latent = last.latent;
  model.last_coeffs.resize(n, model.network.layers.back().dim());
  for (int i = 0; i < n; ++i) model.last_coeffs.row(i) = last.traces[i].layers.back().alpha.transpose();
  return model;
}

}  // namespace

TrainedModel train(std::span<const BDT> ensemble, const TrainConfig& config,
                   const std::optional<ClusteringVector>& classes) {
  validate(config);
  if (config.penalty_cluster && !classes)
    throw InvalidArgument("clustering penalty needs ground-truth classes");
  if (classes && classes->size() != static_cast<int>(ensemble.size()))
    throw InvalidArgument("one class label per member");
  const Eigen::MatrixXd distances =
      config.penalty_metric ? distance_matrix(ensemble) : Eigen::MatrixXd();

  // Restart 0 uses the run seed itself; later ones derive theirs from it.
  Rng seeds(config.seed);
  TrainedModel best;
  for (int r = 0; r < config.restarts; ++r) {
    const std::uint64_t s = r == 0 ? config.seed : seeds.next();
    TrainedModel m = train_once(ensemble, config, s, classes, distances);
    if (r == 0 || m.trace.back().total < best.trace.back().total) best = std::move(m);
  }
  return best;
}

Eigen::VectorXd encode(const TrainedModel& model, const BDT& b) {
  const Network& net = model.network;
  BDT input = b;
  Eigen::VectorXd alpha;
  for (int k = 0; k < net.n_e; ++k) {
    LayerState s = layer_forward(net.layers[k], input, model.config.n_it, net.slope);
    alpha = std::move(s.alpha);
    input = std::move(s.out);
  }
  return alpha;
}

BDT decode(const TrainedModel& model, const Eigen::VectorXd& latent) {
  const Network& net = model.network;
  if (latent.size() != net.layers[net.latent_layer()].dim())
    throw InvalidArgument("latent vector has the wrong dimension");
  BDT out = decode_layer(net.layers[net.latent_layer()], latent);
  for (std::size_t k = net.n_e; k < net.layers.size(); ++k)
    out = layer_forward(net.layers[k], out, model.config.n_it, net.slope).out;
  return out;
}

BDT reconstruct(const TrainedModel& model, const BDT& b) {
  const std::vector<BDT> one{b};
  return forward(model.network, one, model.config.n_it)[0].output();
}

void write_trace_csv(const std::string& path, const TrainedModel& model) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out.precision(17);
  out << "epoch,E,P_M,P_C\n";
  for (int e = 0; e < model.epochs(); ++e) {
    const auto& r = model.trace[e];
    out << e << ',' << r.energy << ',' << r.metric << ',' << r.cluster << '\n';
  }
}

}  // namespace mtwae
