#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mtwae/analytics.hpp"
#include "mtwae/cli.hpp"
#include "mtwae/metric.hpp"

using namespace mtwae;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(std::initializer_list<std::string> args) { return run_cli(std::vector<std::string>(args)); }

// One generated and extracted ensemble shared by the cases below.
struct Workspace {
  fs::path root = fs::temp_directory_path() / "mtwae_cli_test";
  std::string fields = (root / "fields").string();
  std::string pd = (root / "pd").string();
  std::string model = (root / "model").string();

  Workspace() {
    fs::remove_all(root);
    REQUIRE(run({"generate", "--grid", "128", "--seed", "1", "--out", fields}) == 0);
    REQUIRE(run({"extract", fields + "/manifest.json", "--mode", "pd", "--out", pd}) == 0);
    REQUIRE(run({"train", pd + "/manifest.json", "--mode", "pd", "--epochs", "60", "--restarts", "1",
                 "--out", model}) == 0);
  }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("extract writes one star tree per member in pd mode") {
  Workspace& w = workspace();
  const Manifest m = load_manifest(w.pd + "/manifest.json");
  CHECK(m.members.size() == 16);
  CHECK(m.has_labels());
  for (const auto& e : m.members) {
    const BDT b = load_bdt(m.resolve(e));
    CHECK(b.normalized);
    for (int i = 1; i < b.size(); ++i) CHECK(b.branches[i].parent == 0);
  }
  const fs::path again = w.root / "pd_again";
  REQUIRE(run({"extract", w.fields + "/manifest.json", "--mode", "pd", "--out", again.string()}) == 0);
  for (const auto& e : m.members) CHECK(slurp(again / e.path) == slurp(fs::path(w.pd) / e.path));
  CHECK(slurp(again / "provenance.json").find("\"versions\"") != std::string::npos);
}

TEST_CASE("distances are symmetric and match the ground truth") {
  Workspace& w = workspace();
  REQUIRE(run({"distances", w.pd + "/manifest.json", "--out", w.pd}) == 0);
  const Eigen::MatrixXd d = read_distance_csv(w.pd + "/distances.csv");
  const Eigen::MatrixXd t = read_distance_csv(w.fields + "/truth_distances.csv");
  CHECK(d == d.transpose());
  CHECK((d - t).cwiseAbs().maxCoeff() < 2e-3);
}

TEST_CASE("distances of a single tree") {
  Workspace& w = workspace();
  const fs::path dir = w.root / "single";
  fs::create_directories(dir);
  Manifest m = load_manifest(w.pd + "/manifest.json");
  m.members.resize(1);
  m.members[0].path = (fs::path(w.pd) / m.members[0].path).string();
  save_manifest((dir / "manifest.json").string(), m);
  REQUIRE(run({"distances", (dir / "manifest.json").string(), "--out", dir.string()}) == 0);
  const Eigen::MatrixXd d = read_distance_csv((dir / "distances.csv").string());
  CHECK(d.rows() == 1);
  CHECK(d(0, 0) == 0.0);
}

TEST_CASE("train writes a model and one energy row per epoch") {
  Workspace& w = workspace();
  const TrainedModel m = load_model(w.model + "/model.json");
  std::ifstream csv(w.model + "/energy.csv");
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == m.epochs());
  CHECK(m.config.eps1 == 1.0);
  CHECK(m.config.max_epochs == 60);

  const fs::path again = w.root / "model_again";
  REQUIRE(run({"train", w.pd + "/manifest.json", "--mode", "pd", "--epochs", "60", "--restarts", "1",
               "--out", again.string()}) == 0);
  CHECK(slurp(again / "model.json") == slurp(fs::path(w.model) / "model.json"));
}

TEST_CASE("compress and decompress round trip") {
  Workspace& w = workspace();
  const fs::path c = w.root / "comp", d = w.root / "dec";
  REQUIRE(run({"compress", w.pd + "/manifest.json", "--model", w.model + "/model.json", "--out", c.string()}) == 0);
  REQUIRE(run({"decompress", (c / "compressed.json").string(), "--out", d.string()}) == 0);
  const Json report = read_json((c / "compression.json").string());
  CHECK(report["factor"].get<double>() > 0.0);

  const Manifest in = load_manifest(w.pd + "/manifest.json");
  const Manifest out = load_manifest((d / "manifest.json").string());
  REQUIRE(out.members.size() == in.members.size());
  std::vector<BDT> originals;
  for (const auto& e : in.members) originals.push_back(load_bdt(in.resolve(e)));
  const TrainedModel m = load_model(w.model + "/model.json");
  const auto traces = forward(m.network, originals, m.config.n_it);
  for (std::size_t i = 0; i < out.members.size(); ++i) {
    const BDT b = load_bdt(out.resolve(out.members[i]));
    CHECK(out.members[i].name == in.members[i].name);
    CHECK(wasserstein_bdt(b, traces[i].output()).distance < 1e-9);
  }
}

TEST_CASE("layout report carries all scores and the training loss") {
  Workspace& w = workspace();
  const fs::path a = w.root / "layout", b = w.root / "layout_m";
  REQUIRE(run({"layout", w.pd + "/manifest.json", "--model", w.model + "/model.json", "--truth",
               w.fields + "/truth_distances.csv", "--out", a.string()}) == 0);
  const Json r = read_json((a / "report.json").string());
  for (const char* key : {"nmi", "ari", "sim"}) {
    REQUIRE(r.contains(key));
    CHECK(r[key].get<double>() >= 0.0);
    CHECK(r[key].get<double>() <= 1.0);
  }
  CHECK(r["sim_reference"] == "truth");
  CHECK(fs::exists(a / "layout.csv"));
  CHECK(fs::exists(a / "pcv.csv"));
  CHECK(fs::exists(a / "fli.json"));

  REQUIRE(run({"layout", w.pd + "/manifest.json", "--mode", "pd", "--epochs", "20", "--restarts", "1",
               "--penalty-metric", "--out", b.string()}) == 0);
  const Json rm = read_json((b / "report.json").string());
  CHECK(rm["penalty_metric"] == true);
  CHECK(rm["loss"]["P_M"].get<double>() > 0.0);
  CHECK(r["loss"]["P_M"].get<double>() == 0.0);
}

TEST_CASE("exit codes") {
  Workspace& w = workspace();
  const std::string out = (w.root / "err").string();
  CHECK(run({"train", (w.root / "missing.json").string(), "--out", out}) == 2);
  CHECK(run({"train", w.pd + "/manifest.json", "--bogus"}) == 2);
  CHECK(run({"extract", w.fields + "/manifest.json", "--mode", "pd", "--eps1", "0.5", "--out", out}) == 2);
  CHECK(run({"extract", w.fields + "/manifest.json", "--mode", "xx", "--out", out}) == 2);
  CHECK(run({"serve", w.pd + "/manifest.json", "--model", (w.root / "nope.json").string()}) == 2);
  CHECK(run({"train", w.fields + "/manifest.json", "--out", out}) == 2);
  CHECK(run({}) == 2);
  CHECK(run({"--version"}) == 0);
}
