#ifndef LISREDUCE_SERIALIZE_HPP
#define LISREDUCE_SERIALIZE_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "lisreduce/fem.hpp"
#include "lisreduce/reduction.hpp"

namespace lisreduce {

using json = nlohmann::json;

namespace detail {

inline const char* b64_alphabet() {
  return "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

inline std::string base64_encode(const std::uint8_t* data, std::size_t len) {
  const char* tbl = b64_alphabet();
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    std::uint32_t v = data[i] << 16;
    if (i + 1 < len) v |= data[i + 1] << 8;
    if (i + 2 < len) v |= data[i + 2];
    out += tbl[(v >> 18) & 63];
    out += tbl[(v >> 12) & 63];
    out += i + 1 < len ? tbl[(v >> 6) & 63] : '=';
    out += i + 2 < len ? tbl[v & 63] : '=';
  }
  return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::vector<int> lut(256, -1);
  const char* tbl = b64_alphabet();
  for (int i = 0; i < 64; ++i) lut[static_cast<unsigned char>(tbl[i])] = i;
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    const int v = lut[static_cast<unsigned char>(c)];
    if (v < 0) throw config_error("base64_decode: invalid character");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xff));
    }
  }
  return out;
}

}  // namespace detail

// Matrices travel as row-major little-endian f64 blobs in base64.
inline json matrix_to_json(const Matrix& mat) {
  std::vector<std::uint8_t> bytes(sizeof(double) * mat.size());
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor rm = mat;
  std::memcpy(bytes.data(), rm.data(), bytes.size());
  return json{{"rows", mat.rows()},
              {"cols", mat.cols()},
              {"data", detail::base64_encode(bytes.data(), bytes.size())}};
}

inline Matrix matrix_from_json(const json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const auto bytes = detail::base64_decode(j.at("data").get<std::string>());
  if (bytes.size() != sizeof(double) * static_cast<std::size_t>(rows * cols))
    throw config_error("matrix_from_json: blob size does not match dimensions");
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor rm(rows, cols);
  std::memcpy(rm.data(), bytes.data(), bytes.size());
  return Matrix(rm);
}

inline json vector_to_json(const Vector& v) { return matrix_to_json(Matrix(v)); }

inline Vector vector_from_json(const json& j) {
  const Matrix m = matrix_from_json(j);
  if (m.cols() != 1) throw config_error("vector_from_json: expected a single column");
  return Vector(m.col(0));
}

inline constexpr int kContainerVersion = 1;

inline json model_to_json(const ModelBundle& bundle) {
  json j;
  j["format"] = "lisreduce-model";
  j["version"] = kContainerVersion;
  j["name"] = bundle.name;
  j["constants"] = bundle.constants;
  j["stiffness"] = matrix_to_json(bundle.system.stiffness());
  j["load_map"] = matrix_to_json(bundle.load_map.map);
  j["midpoints"] = vector_to_json(bundle.midpoints);
  j["field"] = {{"mean", bundle.field.mean},
                {"std_dev", bundle.field.std_dev},
                {"correlation_length", bundle.field.correlation_length}};
  j["prior_mean"] = vector_to_json(bundle.prior->mean);
  j["prior_sqrt"] = matrix_to_json(bundle.prior->sqrt_factor);
  json labels = json::array();
  for (const DofLabel& l : bundle.system.dof_labels())
    labels.push_back({{"kind", l.kind == DofKind::translation ? "t" : "r"}, {"z", l.z}});
  j["dof_labels"] = labels;
  return j;
}

inline ModelBundle model_from_json(const json& j) {
  if (j.value("format", "") != "lisreduce-model")
    throw config_error("model_from_json: not a lisreduce model container");
  if (j.value("version", 0) != kContainerVersion)
    throw config_error("model_from_json: unsupported container version");
  ModelBundle bundle;
  bundle.name = j.at("name").get<std::string>();
  bundle.constants = j.at("constants").get<std::map<std::string, double>>();
  Matrix stiffness = matrix_from_json(j.at("stiffness"));
  std::vector<DofLabel> labels;
  for (const auto& l : j.at("dof_labels")) {
    labels.push_back({l.at("kind").get<std::string>() == "t" ? DofKind::translation
                                                             : DofKind::rotation,
                      l.at("z").get<double>()});
  }
  bundle.system = StaticLinearSystem(std::move(stiffness), std::move(labels));
  bundle.load_map = LoadMap{matrix_from_json(j.at("load_map"))};
  bundle.midpoints = vector_from_json(j.at("midpoints"));
  const auto& f = j.at("field");
  bundle.field = RandomFieldSpec{f.at("mean").get<double>(), f.at("std_dev").get<double>(),
                                 f.at("correlation_length").get<double>()};
  bundle.prior = std::make_shared<GaussianBelief>(vector_from_json(j.at("prior_mean")),
                                                  matrix_from_json(j.at("prior_sqrt")));
  return bundle;
}

// Offline product: reduced operators plus everything needed to lift
// posteriors, ready for the online phase.
inline json reduced_to_json(const ReducedInverseProblem& red, const ObservationOperator& obs) {
  json j;
  j["format"] = "lisreduce-reduced";
  j["version"] = kContainerVersion;
  j["kind"] = red.basis.kind == BasisKind::lis ? "lis" : "pod";
  j["K_hat"] = matrix_to_json(red.K_hat);
  j["C_hat"] = matrix_to_json(red.C_hat);
  j["G_hat"] = matrix_to_json(red.G_hat);
  j["prior_hat_mean"] = vector_to_json(red.prior_hat.mean);
  j["prior_hat_sqrt"] = matrix_to_json(red.prior_hat.sqrt_factor);
  j["V"] = matrix_to_json(red.basis.V);
  j["W"] = matrix_to_json(red.basis.W);
  j["delta"] = vector_to_json(red.basis.delta);
  if (red.basis.sv_left.size()) j["sv_left"] = matrix_to_json(red.basis.sv_left);
  if (red.basis.sv_right.size()) j["sv_right"] = matrix_to_json(red.basis.sv_right);
  j["full_prior_mean"] = vector_to_json(red.full_prior->mean);
  j["full_prior_sqrt"] = matrix_to_json(red.full_prior->sqrt_factor);
  j["noise_mean"] = vector_to_json(red.noise.mean);
  j["noise_sqrt"] = matrix_to_json(red.noise.sqrt_factor);
  j["observed_dofs"] = obs.indices;
  return j;
}

struct StoredReducedProblem {
  ReducedInverseProblem problem;
  ObservationOperator obs;
};

inline StoredReducedProblem reduced_from_json(const json& j) {
  if (j.value("format", "") != "lisreduce-reduced")
    throw config_error("reduced_from_json: not a lisreduce reduced container");
  if (j.value("version", 0) != kContainerVersion)
    throw config_error("reduced_from_json: unsupported container version");
  StoredReducedProblem out;
  ReducedInverseProblem& red = out.problem;
  red.K_hat = matrix_from_json(j.at("K_hat"));
  red.C_hat = matrix_from_json(j.at("C_hat"));
  red.G_hat = matrix_from_json(j.at("G_hat"));
  red.prior_hat = GaussianBelief(vector_from_json(j.at("prior_hat_mean")),
                                 matrix_from_json(j.at("prior_hat_sqrt")));
  red.basis.kind = j.at("kind").get<std::string>() == "lis" ? BasisKind::lis : BasisKind::pod;
  red.basis.V = matrix_from_json(j.at("V"));
  red.basis.W = matrix_from_json(j.at("W"));
  red.basis.delta = vector_from_json(j.at("delta"));
  if (j.contains("sv_left")) red.basis.sv_left = matrix_from_json(j.at("sv_left"));
  if (j.contains("sv_right")) red.basis.sv_right = matrix_from_json(j.at("sv_right"));
  red.full_prior = std::make_shared<GaussianBelief>(vector_from_json(j.at("full_prior_mean")),
                                                    matrix_from_json(j.at("full_prior_sqrt")));
  red.noise = GaussianBelief(vector_from_json(j.at("noise_mean")),
                             matrix_from_json(j.at("noise_sqrt")));
  out.obs.indices = j.at("observed_dofs").get<std::vector<Index>>();
  return out;
}

inline void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw config_error("write_json_file: cannot open '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw config_error("write_json_file: write failure on '" + path + "'");
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("read_json_file: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw config_error("read_json_file: " + std::string(e.what()));
  }
  return j;
}

}  // namespace lisreduce

#endif  // LISREDUCE_SERIALIZE_HPP
