#include "mtwae/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "mtwae/analytics.hpp"
#include "mtwae/error.hpp"
#include "mtwae/field.hpp"
#include "mtwae/metric.hpp"
#include "mtwae/server.hpp"

namespace fs = std::filesystem;

namespace mtwae {

namespace {

constexpr const char* kVersion = "1.0.0";

}  // namespace

std::string Manifest::resolve(const Entry& e) const {
  const fs::path p(e.path);
  return p.is_absolute() ? p.string() : (fs::path(dir) / p).string();
}

bool Manifest::has_labels() const {
  for (const auto& e : members)
    if (e.label < 0) return false;
  return !members.empty();
}

Manifest load_manifest(const std::string& path) {
  const Json j = read_json(path);
  Manifest m;
  try {
    m.kind = j.at("kind").get<std::string>();
    for (const auto& e : j.at("members"))
      m.members.push_back({e.at("name").get<std::string>(), e.at("path").get<std::string>(),
                           e.value("label", -1)});
  } catch (const Json::exception& e) {
    throw InputError(path + ": bad manifest: " + e.what());
  }
  if (m.kind != "fields" && m.kind != "bdts") throw InputError(path + ": unknown manifest kind " + m.kind);
  if (m.members.empty()) throw InputError(path + ": empty manifest");
  m.dir = fs::absolute(path).parent_path().string();
  return m;
}

void save_manifest(const std::string& path, const Manifest& m) {
  Json members = Json::array();
  for (const auto& e : m.members) {
    Json x{{"name", e.name}, {"path", e.path}};
    if (e.label >= 0) x["label"] = e.label;
    members.push_back(x);
  }
  write_json(path, {{"kind", m.kind}, {"members", members}});
}

namespace {

struct Options {
  // preprocessing
  std::string mode = "mt";
  std::optional<double> eps1;
  double eps2 = 0.95, eps3 = 0.9, simplify = 0.0025;
  std::string tree = "split";
  // generation
  double noise = 0.0;
  int grid = 256;
  // training
  std::string config_file;
  int latent_dim = 2, out_dim = 16, nit = 2, encoders = 1, decoders = 1;
  double lambda_m = 1.0, lambda_c = 1.0, beta = 5.0, lr = 1e-2;
  int epochs = 500, restarts = 4, clusters = 0;
  bool penalty_metric = false, penalty_cluster = false;
  std::uint64_t seed = 0;
  bool seed_given = false;
  // io
  std::string input, model, truth, out = ".", host = "127.0.0.1";
  int port = 8080;
};

std::vector<BDT> load_bdts(const Manifest& m) {
  if (m.kind != "bdts") throw InputError("expected a BDT manifest, got " + m.kind);
  std::vector<BDT> out;
  for (const auto& e : m.members) out.push_back(load_bdt(m.resolve(e)));
  return out;
}

std::vector<std::string> names_of(const Manifest& m) {
  std::vector<std::string> n;
  for (const auto& e : m.members) n.push_back(e.name);
  return n;
}

std::optional<ClusteringVector> labels_of(const Manifest& m) {
  if (!m.has_labels()) return std::nullopt;
  ClusteringVector c;
  for (const auto& e : m.members) {
    c.member_of.push_back(e.label);
    c.k = std::max(c.k, e.label + 1);
  }
  return c;
}

int distinct_labels(const Manifest& m) {
  std::set<int> s;
  for (const auto& e : m.members) s.insert(e.label);
  return m.has_labels() ? static_cast<int>(s.size()) : 0;
}

TrainConfig train_config(const Options& o, const CLI::App& cmd) {
  TrainConfig c = o.config_file.empty() ? TrainConfig{} : config_from_json(read_json(o.config_file));
  auto given = [&](const char* flag) { return cmd.count(flag) > 0 || o.config_file.empty(); };
  if (given("--latent-dim")) c.d_latent = o.latent_dim;
  if (given("--out-dim")) c.d_out = o.out_dim;
  if (given("--nit")) c.n_it = o.nit;
  if (given("--encoders")) c.n_e = o.encoders;
  if (given("--decoders")) c.n_d = o.decoders;
  if (given("--lambda-m")) c.lambda_m = o.lambda_m;
  if (given("--lambda-c")) c.lambda_c = o.lambda_c;
  if (given("--beta")) c.softmax_beta = o.beta;
  if (given("--lr")) c.learning_rate = o.lr;
  if (given("--epochs")) c.max_epochs = o.epochs;
  if (given("--restarts")) c.restarts = o.restarts;
  if (given("--clusters")) c.clusters = o.clusters;
  if (o.seed_given || o.config_file.empty()) c.seed = o.seed;
  if (given("--penalty-metric")) c.penalty_metric = o.penalty_metric;
  if (given("--penalty-cluster")) c.penalty_cluster = o.penalty_cluster;
  if (o.mode == "pd") c.eps1 = 1.0;
  else if (o.eps1) c.eps1 = *o.eps1;
  c.eps2 = o.eps2;
  c.eps3 = o.eps3;
  validate(c);
  return c;
}

std::string format(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw InputError("cannot write " + path);
}

void write_provenance(const Options& o, const std::string& command,
                      const std::vector<std::string>& args, const Json& extra = {}) {
  Json versions{{"mtwae", kVersion},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                              "." + std::to_string(EIGEN_MINOR_VERSION)},
                {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                {"compiler", __VERSION__}};
  Json p{{"command", command}, {"args", args}, {"seed", o.seed}, {"versions", versions}};
  if (!extra.is_null()) p["settings"] = extra;
  write_json((fs::path(o.out) / "provenance.json").string(), p);
}

std::string member_file(const std::string& prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu%s", prefix.c_str(), i, ext);
  return buf;
}

// ---- commands ----

void cmd_generate(const Options& o, const std::vector<std::string>& args) {
  const StabilityEnsemble e = generate_stability_ensemble(o.noise, o.seed, o.grid);
  Manifest m{"fields", o.out, {}};
  std::vector<std::string> names;
  for (std::size_t i = 0; i < e.fields.size(); ++i) {
    const std::string file = member_file("field", i, ".sfld");
    save_field(e.fields[i], (fs::path(o.out) / file).string());
    m.members.push_back({e.fields[i].name, file, e.labels[i]});
    names.push_back(e.fields[i].name);
  }
  save_manifest((fs::path(o.out) / "manifest.json").string(), m);
  write_distance_csv((fs::path(o.out) / "truth_distances.csv").string(), e.distances, names);
  write_provenance(o, "generate", args, {{"noise", o.noise}, {"grid", o.grid}});
  std::cout << "wrote " << e.fields.size() << " fields to " << o.out << "\n";
}

void cmd_extract(const Options& o, const std::vector<std::string>& args) {
  const Manifest in = load_manifest(o.input);
  if (in.kind != "fields") throw InputError("extract needs a field manifest");
  ExtractOptions x;
  x.kind = o.tree == "join" ? TreeKind::Join : TreeKind::Split;
  x.eps1 = o.mode == "pd" ? 1.0 : o.eps1.value_or(0.05);
  x.eps2 = o.eps2;
  x.eps3 = o.eps3;
  x.simplify = o.simplify;
  Manifest out{"bdts", o.out, {}};
  for (std::size_t i = 0; i < in.members.size(); ++i) {
    const auto& e = in.members[i];
    const BDT b = extract_bdt(load_field(in.resolve(e)), x);
    const std::string file = member_file("bdt", i, ".json");
    save_bdt((fs::path(o.out) / file).string(), b);
    out.members.push_back({e.name, file, e.label});
  }
  save_manifest((fs::path(o.out) / "manifest.json").string(), out);
  write_provenance(o, "extract", args,
                   {{"mode", o.mode}, {"tree", o.tree}, {"eps1", x.eps1}, {"eps2", x.eps2},
                    {"eps3", x.eps3}, {"simplify", x.simplify}});
  std::cout << "extracted " << out.members.size() << " trees to " << o.out << "\n";
}

void cmd_distances(const Options& o, const std::vector<std::string>& args) {
  const Manifest m = load_manifest(o.input);
  const Eigen::MatrixXd d = distance_matrix(in_data_units(load_bdts(m)));
  write_distance_csv((fs::path(o.out) / "distances.csv").string(), d, names_of(m));
  write_provenance(o, "distances", args);
  std::cout << "wrote " << d.rows() << "x" << d.cols() << " distance matrix\n";
}

TrainedModel fit(const Options& o, const CLI::App& cmd, const Manifest& m, const std::vector<BDT>& e) {
  const TrainConfig c = train_config(o, cmd);
  TrainedModel model = train(e, c, labels_of(m));
  std::cout << "trained " << model.epochs() << " epochs, final loss " << format(model.trace.back().total)
            << (model.converged ? " (converged)" : " (epoch limit)") << "\n";
  return model;
}

void cmd_train(const Options& o, const CLI::App& cmd, const std::vector<std::string>& args) {
  const Manifest m = load_manifest(o.input);
  const auto e = load_bdts(m);
  const TrainedModel model = fit(o, cmd, m, e);
  save_model((fs::path(o.out) / "model.json").string(), model);
  write_trace_csv((fs::path(o.out) / "energy.csv").string(), model);
  write_provenance(o, "train", args, to_json(model.config));
}

void cmd_compress(const Options& o, const std::vector<std::string>& args) {
  const Manifest m = load_manifest(o.input);
  const auto e = load_bdts(m);
  const TrainedModel model = load_model(o.model);
  const CompressedEnsemble c = compress(model, e, names_of(m));
  write_json((fs::path(o.out) / "compressed.json").string(), to_json(c));
  const std::size_t before = binary_size(e), after = binary_size(c);
  const double factor = compression_factor(before, after);
  const Json report{{"original_bytes", before}, {"compressed_bytes", after}, {"factor", factor}};
  write_json((fs::path(o.out) / "compression.json").string(), report);
  write_provenance(o, "compress", args);
  std::cout << "original " << before << " bytes, compressed " << after << " bytes, factor "
            << format(factor) << "\n";
}

void cmd_decompress(const Options& o, const std::vector<std::string>& args) {
  const CompressedEnsemble c = compressed_from_json(read_json(o.input));
  const auto trees = decompress(c);
  Manifest out{"bdts", o.out, {}};
  for (std::size_t i = 0; i < trees.size(); ++i) {
    const std::string file = member_file("bdt", i, ".json");
    save_bdt((fs::path(o.out) / file).string(), normalize(trees[i]));
    out.members.push_back({c.names[i], file, -1});
  }
  save_manifest((fs::path(o.out) / "manifest.json").string(), out);
  write_provenance(o, "decompress", args);
  std::cout << "decompressed " << trees.size() << " trees\n";
}

void cmd_layout(const Options& o, const CLI::App& cmd, const std::vector<std::string>& args) {
  const Manifest m = load_manifest(o.input);
  const auto e = load_bdts(m);
  const TrainedModel model = o.model.empty() ? fit(o, cmd, m, e) : load_model(o.model);
  if (o.model.empty()) save_model((fs::path(o.out) / "model.json").string(), model);
  const int k = o.clusters > 0 ? o.clusters : std::max(distinct_labels(m), 1);
  const auto session = make_session(model, e, names_of(m), k);
  const SessionState& s = *session;

  std::string csv = "id,name,x,y,cluster\n";
  for (Eigen::Index i = 0; i < s.layout.rows(); ++i)
    csv += std::to_string(i) + "," + s.names[i] + "," + format(s.layout(i, 0)) + "," +
           format(s.layout(i, 1)) + "," + std::to_string(s.clusters.member_of[i]) + "\n";
  write_text((fs::path(o.out) / "layout.csv").string(), csv);

  std::string pcv = "branch,rho1,rho2,degenerate\n";
  for (const auto& p : s.pcv)
    pcv += std::to_string(p.branch) + "," + format(p.rho1) + "," + format(p.rho2) + "," +
           (p.degenerate ? "1" : "0") + "\n";
  write_text((fs::path(o.out) / "pcv.csv").string(), pcv);
  std::string fli = "branch,original,latent,fli\n";
  for (const auto& f : s.fli)
    fli += std::to_string(f.branch) + "," + format(f.original) + "," + format(f.latent) + "," +
           format(f.fli) + "\n";
  write_text((fs::path(o.out) / "fli.csv").string(), fli);
  write_json((fs::path(o.out) / "pcv.json").string(), pcv_json(s));
  write_json((fs::path(o.out) / "fli.json").string(), fli_json(s));

  Eigen::MatrixXd reference = s.distances;
  if (!o.truth.empty()) {
    reference = read_distance_csv(o.truth);
    if (reference.rows() != s.layout.rows()) throw InputError("truth matrix does not match the ensemble");
  }
  const double similarity = sim_normalized(reference, euclidean_distances(s.layout));
  const EpochRecord& last = model.trace.back();
  Json report{{"members", s.ensemble.size()},
              {"clusters", k},
              {"sim", similarity},
              {"sim_reference", o.truth.empty() ? "wasserstein" : "truth"},
              {"penalty_metric", model.config.penalty_metric},
              {"penalty_cluster", model.config.penalty_cluster},
              {"loss", {{"E", last.energy}, {"P_M", last.metric}, {"P_C", last.cluster}, {"total", last.total}}},
              {"epochs", model.epochs()}};
  if (const auto truth = labels_of(m)) {
    report["nmi"] = nmi(*truth, s.clusters);
    report["ari"] = ari(*truth, s.clusters);
  } else {
    report["nmi"] = nullptr;
    report["ari"] = nullptr;
  }
  write_json((fs::path(o.out) / "report.json").string(), report);
  write_provenance(o, "layout", args, to_json(model.config));
  std::cout << report.dump() << "\n";
}

void cmd_serve(const Options& o, const std::vector<std::string>& args) {
  if (!fs::exists(o.model)) throw InputError("model file not found: " + o.model);
  const Manifest m = load_manifest(o.input);
  auto e = load_bdts(m);
  const int k = o.clusters > 0 ? o.clusters : std::max(distinct_labels(m), 1);
  ApiServer server;
  server.load(make_session(load_model(o.model), std::move(e), names_of(m), k));
  const int port = server.bind(o.host, o.port);
  (void)args;
  std::cout << "serving on http://" << o.host << ":" << port << std::endl;
  server.run();
}

void add_preprocessing(CLI::App* c, Options& o) {
  c->add_option("--mode", o.mode, "pd (diagrams, eps1 = 1) or mt (merge trees)")
      ->check(CLI::IsMember({"pd", "mt"}));
  c->add_option("--eps1", o.eps1, "saddle merging threshold")->check(CLI::Range(0.0, 1.0));
  c->add_option("--eps2", o.eps2, "normalization threshold")->check(CLI::Range(0.0, 1.0));
  c->add_option("--eps3", o.eps3, "normalization ratio")->check(CLI::Range(0.0, 1.0));
}

void add_training(CLI::App* c, Options& o) {
  c->add_option("--config", o.config_file, "TrainConfig JSON; flags override it");
  c->add_option("--latent-dim", o.latent_dim)->check(CLI::PositiveNumber);
  c->add_option("--out-dim", o.out_dim)->check(CLI::PositiveNumber);
  c->add_option("--nit", o.nit, "projection iterations")->check(CLI::PositiveNumber);
  c->add_option("--encoders", o.encoders)->check(CLI::PositiveNumber);
  c->add_option("--decoders", o.decoders)->check(CLI::NonNegativeNumber);
  c->add_option("--lambda-m", o.lambda_m)->check(CLI::NonNegativeNumber);
  c->add_option("--lambda-c", o.lambda_c)->check(CLI::NonNegativeNumber);
  c->add_option("--beta", o.beta, "soft-assignment sharpness")->check(CLI::PositiveNumber);
  c->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  c->add_option("--epochs", o.epochs, "epoch limit")->check(CLI::PositiveNumber);
  c->add_option("--restarts", o.restarts)->check(CLI::PositiveNumber);
  c->add_option("--clusters", o.clusters, "k (default: number of labels)")->check(CLI::NonNegativeNumber);
  c->add_flag("--penalty-metric", o.penalty_metric, "enable the metric penalty");
  c->add_flag("--penalty-cluster", o.penalty_cluster, "enable the clustering penalty (needs labels)");
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  Options o;
  CLI::App app{"Wasserstein auto-encoders of merge trees"};
  app.name("mtwae");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  auto* seed = app.add_option("--seed", o.seed, "random seed");
  app.add_option("--out", o.out, "output directory");

  auto* gen = app.add_subcommand("generate", "write the synthetic 16-member stability ensemble");
  gen->add_option("--noise", o.noise, "uniform noise amplitude relative to the range")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--grid", o.grid, "grid resolution")->check(CLI::Range(8, 4096));

  auto* ext = app.add_subcommand("extract", "fields to normalized BDT files");
  ext->add_option("manifest", o.input, "field manifest")->required();
  add_preprocessing(ext, o);
  ext->add_option("--simplify", o.simplify, "persistence simplification fraction")
      ->check(CLI::Range(0.0, 1.0));
  ext->add_option("--tree", o.tree, "split or join")->check(CLI::IsMember({"split", "join"}));

  auto* dist = app.add_subcommand("distances", "pairwise Wasserstein distances");
  dist->add_option("manifest", o.input, "BDT manifest")->required();

  auto* tr = app.add_subcommand("train", "train an auto-encoder");
  tr->add_option("manifest", o.input, "BDT manifest")->required();
  add_preprocessing(tr, o);
  add_training(tr, o);

  auto* comp = app.add_subcommand("compress", "encode an ensemble with a trained model");
  comp->add_option("manifest", o.input, "BDT manifest")->required();
  comp->add_option("--model", o.model)->required();

  auto* dec = app.add_subcommand("decompress", "rebuild trees from a compressed file");
  dec->add_option("compressed", o.input)->required();

  auto* lay = app.add_subcommand("layout", "2D layout, PCV, FLI and quality report");
  lay->add_option("manifest", o.input, "BDT manifest")->required();
  lay->add_option("--model", o.model, "trained model (trains one when omitted)");
  lay->add_option("--truth", o.truth, "reference distance matrix CSV for SIM");
  add_preprocessing(lay, o);
  add_training(lay, o);

  auto* srv = app.add_subcommand("serve", "HTTP API for the latent-space explorer");
  srv->add_option("manifest", o.input, "BDT manifest")->required();
  srv->add_option("--model", o.model)->required();
  srv->add_option("--port", o.port, "0 picks a free port")->capture_default_str()->check(CLI::Range(0, 65535));
  srv->add_option("--host", o.host)->capture_default_str();
  srv->add_option("--clusters", o.clusters, "layout k-means groups")->check(CLI::NonNegativeNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  o.seed_given = seed->count() > 0;

  try {
    if (o.mode == "pd" && o.eps1 && *o.eps1 != 1.0)
      throw InputError("pd mode fixes eps1 = 1");
    fs::create_directories(o.out);
    if (*gen) cmd_generate(o, args);
    else if (*ext) cmd_extract(o, args);
    else if (*dist) cmd_distances(o, args);
    else if (*tr) cmd_train(o, *tr, args);
    else if (*comp) cmd_compress(o, args);
    else if (*dec) cmd_decompress(o, args);
    else if (*lay) cmd_layout(o, *lay, args);
    else if (*srv) cmd_serve(o, args);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace mtwae
