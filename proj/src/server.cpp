#include "mtwae/server.hpp"

#include <cmath>
#include <limits>

#include <httplib.h>

#include "mtwae/error.hpp"
#include "mtwae/metric.hpp"

namespace mtwae {

namespace {

constexpr int kMaxPathSteps = 1000;

Json row(const Eigen::MatrixXd& m, Eigen::Index i) {
  Json r = Json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) r.push_back(m(i, c));
  return r;
}

Json tree_json(const BDT& b) {
  return {{"bdt", to_json(b)}, {"diagram", to_json(bdt_to_diagram(b))}};
}

Eigen::VectorXd latent_point(const Json& j, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw InputError("latent point needs " + std::to_string(dim) + " numbers");
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) {
    if (!j[i].is_number()) throw InputError("latent coordinates must be numbers");
    v[i] = j[i].get<double>();
    if (!std::isfinite(v[i])) throw InputError("latent coordinates must be finite");
  }
  return v;
}

void send(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& message) {
  send(res, status, Json{{"error", message}});
}

}  // namespace

ClusteringVector layout_clusters(const Eigen::MatrixXd& layout, int k, std::uint64_t seed) {
  if (k <= 1 || layout.rows() < 2) {
    ClusteringVector c;
    c.k = 1;
    c.member_of.assign(layout.rows(), 0);
    return c;
  }
  return kmeans(layout, std::min<int>(k, static_cast<int>(layout.rows())), seed).clusters;
}

std::shared_ptr<const SessionState> make_session(TrainedModel model, std::vector<BDT> ensemble,
                                                 std::vector<std::string> names, int clusters) {
  auto s = std::make_shared<SessionState>();
  if (static_cast<Eigen::Index>(ensemble.size()) != model.latent.rows())
    throw InputError("the ensemble does not match the model's training set");
  if (names.empty())
    for (std::size_t i = 0; i < ensemble.size(); ++i) names.push_back("member_" + std::to_string(i));
  s->layout = layout2d(model);
  s->clusters = layout_clusters(s->layout, clusters, model.config.seed);
  s->center = barycenter(ensemble);
  s->pcv = pcv(s->layout, ensemble, s->center);
  s->fli = fli(model.network, s->center.tree);
  s->distances = distance_matrix(in_data_units(ensemble));
  s->model = std::move(model);
  s->ensemble = std::move(ensemble);
  s->names = std::move(names);
  return s;
}

BDT reconstruct_at(const SessionState& s, const Eigen::VectorXd& latent) {
  BDT b = decode(s.model, latent);
  Eigen::Index nearest = 0;
  (s.layout.rowwise() - latent.transpose()).rowwise().squaredNorm().minCoeff(&nearest);
  b.scale = s.ensemble[nearest].scale;
  b.normalized = true;
  return denormalize(b);
}

Json layout_json(const SessionState& s) {
  Json points = Json::array();
  for (Eigen::Index i = 0; i < s.layout.rows(); ++i)
    points.push_back({{"id", i},
                      {"name", s.names[i]},
                      {"x", s.layout(i, 0)},
                      {"y", s.layout(i, 1)},
                      {"cluster", s.clusters.member_of[i]}});
  return {{"points", points}};
}

Json pcv_json(const SessionState& s) {
  const BDT raw = s.center.tree.normalized ? denormalize(s.center.tree) : s.center.tree;
  Json out = Json::array();
  for (const auto& p : s.pcv)
    out.push_back({{"branch", p.branch},
                   {"birth", raw.branches[p.branch].birth},
                   {"death", raw.branches[p.branch].death},
                   {"rho1", p.rho1},
                   {"rho2", p.rho2},
                   {"degenerate", p.degenerate}});
  return {{"branches", out}};
}

Json fli_json(const SessionState& s) {
  Json out = Json::array();
  for (const auto& f : s.fli)
    out.push_back({{"branch", f.branch}, {"original", f.original}, {"latent", f.latent}, {"fli", f.fli}});
  return {{"barycenter", to_json(s.center.tree)}, {"branches", out}};
}

Json member_json(const SessionState& s, int i) {
  const BDT& b = s.ensemble[i];
  BDT recon = reconstruct(s.model, b);
  recon.scale = b.scale;
  return {{"id", i},
          {"name", s.names[i]},
          {"latent", row(s.layout, i)},
          {"cluster", s.clusters.member_of[i]},
          {"input", tree_json(b.normalized ? denormalize(b) : b)},
          {"reconstruction", tree_json(denormalize(recon))}};
}

ApiServer::ApiServer() : http_(std::make_unique<httplib::Server>()) { routes(); }

ApiServer::~ApiServer() { stop(); }

void ApiServer::load(std::shared_ptr<const SessionState> session) {
  std::lock_guard<std::mutex> lock(mu_);
  session_ = std::move(session);
}

std::shared_ptr<const SessionState> ApiServer::session() const {
  std::lock_guard<std::mutex> lock(mu_);
  return session_;
}

int ApiServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw InputError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void ApiServer::run() { http_->listen_after_bind(); }

void ApiServer::stop() {
  if (http_) http_->stop();
}

void ApiServer::wait_until_ready() const { http_->wait_until_ready(); }

void ApiServer::routes() {
  http_->set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  http_->Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  // Wraps a handler that needs a loaded session.
  auto with_session = [this](auto handler) {
    return [this, handler](const httplib::Request& req, httplib::Response& res) {
      const auto s = session();
      if (!s) return fail(res, 503, "no model loaded");
      try {
        handler(*s, req, res);
      } catch (const InputError& e) {
        fail(res, 400, e.what());
      } catch (const Json::exception& e) {
        fail(res, 400, e.what());
      } catch (const std::exception& e) {
        fail(res, 500, e.what());
      }
    };
  };
  auto body = [](const httplib::Request& req) {
    const Json j = Json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw InputError("body must be a JSON object");
    return j;
  };

  http_->Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
    send(res, 200, Json{{"status", "ok"}, {"loaded", session() != nullptr}});
  });
  http_->Get("/api/layout", with_session([](const SessionState& s, const httplib::Request&,
                                            httplib::Response& res) { send(res, 200, layout_json(s)); }));
  http_->Get("/api/pcv", with_session([](const SessionState& s, const httplib::Request&,
                                         httplib::Response& res) { send(res, 200, pcv_json(s)); }));
  http_->Get("/api/fli", with_session([](const SessionState& s, const httplib::Request&,
                                         httplib::Response& res) { send(res, 200, fli_json(s)); }));
  http_->Get(R"(/api/member/(-?\d+))",
             with_session([](const SessionState& s, const httplib::Request& req, httplib::Response& res) {
               long long i = -1;
               try {
                 i = std::stoll(req.matches[1].str());
               } catch (const std::exception&) {
               }
               if (i < 0 || i >= static_cast<long long>(s.ensemble.size()))
                 return fail(res, 404, "member index out of range");
               send(res, 200, member_json(s, static_cast<int>(i)));
             }));
  http_->Post("/api/reconstruct",
              with_session([body](const SessionState& s, const httplib::Request& req, httplib::Response& res) {
                const Json j = body(req);
                if (!j.contains("latent")) throw InputError("missing latent");
                const auto p = latent_point(j["latent"], static_cast<int>(s.layout.cols()));
                send(res, 200, tree_json(reconstruct_at(s, p)));
              }));
  http_->Post("/api/path",
              with_session([body](const SessionState& s, const httplib::Request& req, httplib::Response& res) {
                const Json j = body(req);
                if (!j.contains("from") || !j.contains("to")) throw InputError("missing from/to");
                const int d = static_cast<int>(s.layout.cols());
                const auto a = latent_point(j["from"], d), b = latent_point(j["to"], d);
                const Json steps = j.value("steps", Json(10));
                if (!steps.is_number_integer()) throw InputError("steps must be an integer");
                const int n = steps.get<int>();
                if (n < 2 || n > kMaxPathSteps)
                  throw InputError("steps must lie in [2, " + std::to_string(kMaxPathSteps) + "]");
                Json frames = Json::array();
                for (int k = 0; k < n; ++k) {
                  const double t = static_cast<double>(k) / (n - 1);
                  const Eigen::VectorXd p = k == n - 1 ? b : Eigen::VectorXd((1.0 - t) * a + t * b);
                  Json f = tree_json(reconstruct_at(s, p));
                  f["latent"] = Json(std::vector<double>(p.data(), p.data() + p.size()));
                  frames.push_back(std::move(f));
                }
                send(res, 200, Json{{"frames", frames}});
              }));
}

}  // namespace mtwae
