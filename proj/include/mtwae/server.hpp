#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mtwae/analytics.hpp"
#include "mtwae/serialization.hpp"

namespace httplib {
class Server;
}

namespace mtwae {

/// Everything the API serves. Built once, never mutated afterwards.
struct SessionState {
  TrainedModel model;
  std::vector<BDT> ensemble;  // normalized inputs
  std::vector<std::string> names;
  BarycenterResult center;
  Eigen::MatrixXd layout;
  ClusteringVector clusters;
  std::vector<PCVPoint> pcv;
  std::vector<FLIEntry> fli;
  Eigen::MatrixXd distances;  // Wasserstein, data units
};

/// Latent k-means with k clusters (k <= 1 puts everything in cluster 0).
ClusteringVector layout_clusters(const Eigen::MatrixXd& layout, int k, std::uint64_t seed);

std::shared_ptr<const SessionState> make_session(TrainedModel model, std::vector<BDT> ensemble,
                                                 std::vector<std::string> names, int clusters);

/// Decoded tree at a latent point, in data units. The scale is borrowed
/// from the member nearest in latent space.
BDT reconstruct_at(const SessionState& s, const Eigen::VectorXd& latent);

Json layout_json(const SessionState& s);
Json pcv_json(const SessionState& s);
Json fli_json(const SessionState& s);
Json member_json(const SessionState& s, int i);

class ApiServer {
 public:
  ApiServer();
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  void load(std::shared_ptr<const SessionState> session);
  /// Binds to host:port (port 0 picks a free one) and returns the port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  std::shared_ptr<const SessionState> session() const;
  void routes();

  std::unique_ptr<httplib::Server> http_;
  mutable std::mutex mu_;
  std::shared_ptr<const SessionState> session_;
};

}  // namespace mtwae
