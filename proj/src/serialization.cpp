#include "mtwae/serialization.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mtwae/error.hpp"

namespace mtwae {

static_assert(std::endian::native == std::endian::little, "binary sections assume little-endian");

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    TrainConfig, n_it, n_e, n_d, d_latent, d_out, dims, cap_in_first, cap_inner, cap_out_last,
    init_mix, restarts, eps1, eps2, eps3, slope, learning_rate, beta1, beta2, epsilon_hat,
    penalty_metric, penalty_cluster, lambda_m, lambda_c, softmax_beta, clusters,
    stop_relative_decrease, patience, max_epochs, seed)

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EpochRecord, energy, metric, cluster, total)

namespace {

template <class T>
T field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw InputError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw InputError(std::string("bad field '") + key + "': " + e.what());
  }
}

}  // namespace

Json to_json(const BDT& b) {
  Json branches = Json::array();
  for (const auto& br : b.branches) branches.push_back({br.birth, br.death, br.parent});
  return {{"normalized", b.normalized},
          {"scale", {{"min", b.scale.min}, {"range", b.scale.range}}},
          {"branches", branches}};
}

BDT bdt_from_json(const Json& j, bool check) {
  BDT b;
  b.normalized = field<bool>(j, "normalized");
  const Json scale = field<Json>(j, "scale");
  b.scale = {field<double>(scale, "min"), field<double>(scale, "range")};
  for (const auto& br : field<std::vector<Json>>(j, "branches")) {
    if (!br.is_array() || br.size() != 3) throw InputError("branch must be [birth, death, parent]");
    try {
      b.branches.push_back({br[0].get<double>(), br[1].get<double>(), br[2].get<int>()});
    } catch (const Json::exception& e) {
      throw InputError(std::string("bad branch: ") + e.what());
    }
  }
  validate(b, check);
  return b;
}

Json to_json(const PersistenceDiagram& d) {
  Json points = Json::array();
  for (const auto& p : d.points) points.push_back({p.birth, p.death});
  return {{"points", points}};
}

Json to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  if (!j.is_array()) throw InputError("matrix must be an array of rows");
  if (j.empty()) return {};
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw InputError("ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw InputError("matrix entry is not a number");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

Json to_json(const BDTBasis& b) {
  return {{"origin", to_json(b.origin)}, {"vectors", to_json(b.vectors)}};
}

BDTBasis basis_from_json(const Json& j) {
  BDTBasis b;
  b.origin = bdt_from_json(field<Json>(j, "origin"), false);
  b.vectors = matrix_from_json(field<Json>(j, "vectors"));
  if (b.vectors.size() == 0) b.vectors.resize(2 * b.origin.size(), 0);
  validate(b);
  return b;
}

Json to_json(const TrainConfig& c) {
  Json j;
  nlohmann::to_json(j, c);
  return j;
}

TrainConfig config_from_json(const Json& j) {
  try {
    TrainConfig c = j.get<TrainConfig>();
    validate(c);
    return c;
  } catch (const Json::exception& e) {
    throw InputError(std::string("bad training config: ") + e.what());
  }
}

Json to_json(const TrainedModel& m) {
  Json layers = Json::array();
  for (const auto& l : m.network.layers)
    layers.push_back({{"in", to_json(l.in.basis)}, {"out", to_json(l.out.basis)}});
  return {{"config", to_json(m.config)},
          {"n_e", m.network.n_e},
          {"n_d", m.network.n_d},
          {"slope", m.network.slope},
          {"layers", layers},
          {"latent", to_json(m.latent)},
          {"last_coeffs", to_json(m.last_coeffs)},
          {"trace", m.trace},
          {"converged", m.converged}};
}

TrainedModel model_from_json(const Json& j) {
  TrainedModel m;
  m.config = config_from_json(field<Json>(j, "config"));
  m.network.n_e = field<int>(j, "n_e");
  m.network.n_d = field<int>(j, "n_d");
  m.network.slope = field<double>(j, "slope");
  for (const auto& l : field<std::vector<Json>>(j, "layers")) {
    Layer layer;
    layer.in.basis = basis_from_json(field<Json>(l, "in"));
    layer.out.basis = basis_from_json(field<Json>(l, "out"));
    m.network.layers.push_back(std::move(layer));
  }
  validate(m.network);
  m.latent = matrix_from_json(field<Json>(j, "latent"));
  m.last_coeffs = matrix_from_json(field<Json>(j, "last_coeffs"));
  m.trace = field<std::vector<EpochRecord>>(j, "trace");
  m.converged = field<bool>(j, "converged");
  if (m.trace.empty()) throw InputError("model has an empty energy trace");
  if (m.latent.rows() != m.last_coeffs.rows()) throw InputError("coefficient row counts differ");
  return m;
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InputError(path + ": malformed JSON at byte " + std::to_string(e.byte));
  }
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << j.dump(1) << '\n';
  if (!out) throw InputError("failed writing " + path);
}

BDT load_bdt(const std::string& path) { return bdt_from_json(read_json(path)); }
void save_bdt(const std::string& path, const BDT& b) { write_json(path, to_json(b)); }
TrainedModel load_model(const std::string& path) { return model_from_json(read_json(path)); }
void save_model(const std::string& path, const TrainedModel& m) { write_json(path, to_json(m)); }

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

std::string base64_encode(std::string_view bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (std::uint8_t(bytes[i]) << 16) | (std::uint8_t(bytes[i + 1]) << 8) |
                            std::uint8_t(bytes[i + 2]);
    for (int s = 18; s >= 0; s -= 6) out += kAlphabet[(v >> s) & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t v = std::uint8_t(bytes[i]) << 16;
    if (rest == 2) v |= std::uint8_t(bytes[i + 1]) << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string base64_decode(std::string_view text) {
  std::array<int, 256> lut;
  lut.fill(-1);
  for (int k = 0; k < 64; ++k) lut[static_cast<unsigned char>(kAlphabet[k])] = k;
  if (text.size() % 4 != 0) throw InputError("base64 length is not a multiple of 4");
  std::string out;
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t v = 0;
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char ch = text[i + k];
      int d = 0;
      if (ch == '=' && i + 4 == text.size() && k >= 2) {
        ++pad;
      } else {
        if (pad) throw InputError("base64 padding in the middle");
        d = lut[static_cast<unsigned char>(ch)];
        if (d < 0) throw InputError("invalid base64 character");
      }
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out += static_cast<char>((v >> 16) & 0xFF);
    if (pad < 2) out += static_cast<char>((v >> 8) & 0xFF);
    if (pad < 1) out += static_cast<char>(v & 0xFF);
  }
  return out;
}

void ByteWriter::f64(double v) {
  char b[8];
  std::memcpy(b, &v, 8);
  bytes_.append(b, 8);
}

void ByteWriter::i32(std::int32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  bytes_.append(b, 4);
}

void ByteWriter::matrix(const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
}

void ByteReader::need(std::size_t n) const {
  if (at_ + n > bytes_.size()) throw InputError("binary section truncated at byte " + std::to_string(at_));
}

double ByteReader::f64() {
  need(8);
  double v;
  std::memcpy(&v, bytes_.data() + at_, 8);
  at_ += 8;
  return v;
}

std::int32_t ByteReader::i32() {
  need(4);
  std::int32_t v;
  std::memcpy(&v, bytes_.data() + at_, 4);
  at_ += 4;
  return v;
}

Eigen::MatrixXd ByteReader::matrix(Eigen::Index rows, Eigen::Index cols) {
  if (rows < 0 || cols < 0) throw InputError("negative matrix shape");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
  return m;
}

void write_binary(ByteWriter& w, const BDT& b) {
  w.i32(b.size());
  for (const auto& br : b.branches) {
    w.f64(br.birth);
    w.f64(br.death);
    w.i32(br.parent);
  }
  w.f64(b.scale.min);
  w.f64(b.scale.range);
}

BDT read_binary(ByteReader& r) {
  BDT b;
  const int n = r.i32();
  if (n < 0) throw InputError("negative branch count");
  for (int i = 0; i < n; ++i) {
    const double x = r.f64(), y = r.f64();
    b.branches.push_back({x, y, r.i32()});
  }
  b.scale.min = r.f64();
  b.scale.range = r.f64();
  return b;
}

}  // namespace mtwae
