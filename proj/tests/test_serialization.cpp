#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "mtwae/error.hpp"
#include "mtwae/serialization.hpp"
#include "oracles.hpp"

using namespace mtwae;

namespace {

bool same_bits(const BDT& a, const BDT& b) {
  if (a.size() != b.size() || a.normalized != b.normalized) return false;
  if (a.scale.min != b.scale.min || a.scale.range != b.scale.range) return false;
  for (int i = 0; i < a.size(); ++i) {
    const Branch &x = a.branches[i], &y = b.branches[i];
    if (x.birth != y.birth || x.death != y.death || x.parent != y.parent) return false;
  }
  return true;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("mtwae_" + name)).string();
}

}  // namespace

TEST_CASE("base64 known vectors") {
  CHECK(base64_encode("") == "");
  CHECK(base64_encode("f") == "Zg==");
  CHECK(base64_encode("fo") == "Zm8=");
  CHECK(base64_encode("foo") == "Zm9v");
  CHECK(base64_encode("foobar") == "Zm9vYmFy");
  CHECK(base64_decode("Zm9vYmE=") == "fooba");
  CHECK_THROWS_AS(base64_decode("Zm9v!"), InputError);
  CHECK_THROWS_AS(base64_decode("Zm9"), InputError);
}

TEST_CASE("base64 round trips arbitrary bytes") {
  Rng rng(4);
  for (int n = 0; n < 40; ++n) {
    std::string s;
    for (int i = 0; i < n; ++i) s.push_back(static_cast<char>(rng.next() & 0xff));
    CHECK(base64_decode(base64_encode(s)) == s);
  }
}

TEST_CASE("bdt json and binary round trips are bit exact") {
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    BDT b = oracle::random_bdt(rng, 1 + t % 7);
    if (t % 2) b = normalize(b);
    const BDT j = bdt_from_json(Json::parse(to_json(b).dump()));
    CHECK(same_bits(b, j));
    ByteWriter w;
    write_binary(w, b);
    ByteReader r(w.bytes());
    BDT k = read_binary(r);
    CHECK(r.done());
    k.normalized = b.normalized;
    CHECK(same_bits(b, k));
    CHECK(w.bytes().size() == 4 + 20 * static_cast<std::size_t>(b.size()) + 16);
  }
}

TEST_CASE("truncated binary input is rejected") {
  ByteWriter w;
  w.i32(3);
  w.f64(0.0);
  ByteReader r(w.bytes());
  CHECK_THROWS_AS(read_binary(r), InputError);
}

TEST_CASE("bdt json rejects invalid trees") {
  Json j = to_json(BDT{{{0, 1, kNoParent}, {0.2, 0.5, 0}}, false, {}});
  j["branches"][1][2] = 5;
  CHECK_THROWS_AS(bdt_from_json(j), InputError);
  CHECK_THROWS_AS(bdt_from_json(Json::array()), InputError);
}

TEST_CASE("malformed json files report an input error") {
  const std::string p = temp_path("bad.json");
  {
    std::FILE* f = std::fopen(p.c_str(), "w");
    std::fputs("{\"branches\": [", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(read_json(p), InputError);
  CHECK_THROWS_AS(read_json(temp_path("missing.json")), InputError);
  std::filesystem::remove(p);
}

TEST_CASE("model reload reproduces reconstructions bit for bit") {
  Rng rng(3);
  std::vector<BDT> ens;
  for (int i = 0; i < 4; ++i) ens.push_back(normalize(oracle::random_bdt(rng, 4)));
  TrainConfig c;
  c.d_out = 5;
  c.max_epochs = 15;
  c.restarts = 1;
  c.seed = 12;
  const TrainedModel m = train(ens, c);
  const std::string p = temp_path("model.json");
  save_model(p, m);
  const TrainedModel r = load_model(p);
  std::filesystem::remove(p);
  CHECK(r.latent == m.latent);
  CHECK(r.last_coeffs == m.last_coeffs);
  CHECK(r.epochs() == m.epochs());
  CHECK(r.config.seed == c.seed);
  CHECK(r.config.d_out == c.d_out);
  for (const auto& b : ens) CHECK(same_bits(reconstruct(m, b), reconstruct(r, b)));
  CHECK(to_json(r).dump() == to_json(m).dump());
}

TEST_CASE("config json rejects invalid values") {
  Json j = to_json(TrainConfig{});
  j["n_it"] = 0;
  CHECK_THROWS_AS(config_from_json(j), InputError);
}
