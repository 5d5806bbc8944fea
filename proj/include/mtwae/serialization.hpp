#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mtwae/network.hpp"
#include "mtwae/topology.hpp"
#include "mtwae/train.hpp"

namespace mtwae {

using Json = nlohmann::json;

Json to_json(const BDT& b);
/// `check` adds the birth/death and nesting checks on top of the structural ones.
BDT bdt_from_json(const Json& j, bool check = true);
Json to_json(const PersistenceDiagram& d);
Json to_json(const Eigen::MatrixXd& m);  // row-major nested arrays
Eigen::MatrixXd matrix_from_json(const Json& j);
Json to_json(const BDTBasis& b);
BDTBasis basis_from_json(const Json& j);
Json to_json(const TrainConfig& c);
TrainConfig config_from_json(const Json& j);
Json to_json(const TrainedModel& m);
TrainedModel model_from_json(const Json& j);

Json read_json(const std::string& path);
void write_json(const std::string& path, const Json& j);

BDT load_bdt(const std::string& path);
void save_bdt(const std::string& path, const BDT& b);
TrainedModel load_model(const std::string& path);
void save_model(const std::string& path, const TrainedModel& m);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

/// Little-endian fixed-width packing: 64-bit floats, 32-bit indices.
class ByteWriter {
 public:
  void f64(double v);
  void i32(std::int32_t v);
  void matrix(const Eigen::MatrixXd& m);  // column-major, no header
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}
  double f64();
  std::int32_t i32();
  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols);
  bool done() const { return at_ == bytes_.size(); }

 private:
  void need(std::size_t n) const;
  std::string_view bytes_;
  std::size_t at_ = 0;
};

/// Branch count, then (birth, death, parent) per branch, then the scale.
void write_binary(ByteWriter& w, const BDT& b);
BDT read_binary(ByteReader& r);

}  // namespace mtwae
