#include "tlasso/map_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tlasso/errors.hpp"

namespace tlasso {

namespace {

constexpr const char* kFormat = "transport-lasso-map";
constexpr int kVersion = 1;

std::string family_name(BasisFamily f) {
  return f == BasisFamily::kSignLaguerre ? "sign-laguerre" : "continuous-sign-laguerre";
}

BasisFamily family_from_name(const std::string& s) {
  if (s == "sign-laguerre") return BasisFamily::kSignLaguerre;
  if (s == "continuous-sign-laguerre") return BasisFamily::kContinuousSignLaguerre;
  throw IoError("map JSON: unknown basis family '" + s + "'");
}

}  // namespace

std::string map_to_json(const TransportMap& map, const TrainingMetadata& meta) {
  using nlohmann::json;
  const PceBasis& b = map.basis;
  json indices = json::array();
  for (const MultiIndex& m : b.indices()) {
    json entry = json::array();
    for (int j = 0; j < m.dim(); ++j) entry.push_back({m.degrees[j], int(m.parities[j])});
    indices.push_back(entry);
  }
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(map.coeffs.size()));
  for (Eigen::Index r = 0; r < map.coeffs.rows(); ++r) {
    for (Eigen::Index c = 0; c < map.coeffs.cols(); ++c) data.push_back(map.coeffs(r, c));
  }
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["basis"] = {{"dim", b.dim()},
                {"order", b.order()},
                {"family", family_name(b.family())},
                {"rate", b.prior().rate},
                {"indices", indices}};
  j["coefficients"] = {{"rows", map.coeffs.rows()}, {"cols", map.coeffs.cols()}, {"data", data}};
  j["lambda"] = map.lambda;
  j["sigma2"] = map.sigma2;
  j["fit"] = {{"converged", map.report.converged},
              {"iterations", map.report.iterations},
              {"final_residual", map.report.final_residual},
              {"nonmonotone_samples", map.report.nonmonotone_samples}};
  if (std::isfinite(map.report.final_objective)) {
    j["fit"]["final_objective"] = map.report.final_objective;
  } else {
    j["fit"]["final_objective"] = nullptr;
  }
  j["training"] = {{"n_train", meta.n_train}, {"seed", meta.seed}, {"rho", meta.rho}};
  return j.dump(2) + "\n";
}

TransportMap map_from_json(const std::string& text, TrainingMetadata* meta) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("map JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFormat) throw IoError("map JSON: wrong format tag");
    if (j.at("version").get<int>() != kVersion) {
      throw IoError("map JSON: unsupported version " + std::to_string(j.at("version").get<int>()));
    }
    const json& jb = j.at("basis");
    const int dim = jb.at("dim").get<int>();
    const int order = jb.at("order").get<int>();
    const BasisFamily family = family_from_name(jb.at("family").get<std::string>());
    const double rate = jb.at("rate").get<double>();
    std::vector<MultiIndex> indices;
    for (const json& entry : jb.at("indices")) {
      MultiIndex m;
      for (const json& pair : entry) {
        m.degrees.push_back(pair.at(0).get<int>());
        m.parities.push_back(static_cast<std::uint8_t>(pair.at(1).get<int>()));
      }
      indices.push_back(std::move(m));
    }
    PceBasis basis(LaplacianPrior(dim, rate), order, family, std::move(indices));

    const json& jc = j.at("coefficients");
    const Eigen::Index rows = jc.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = jc.at("cols").get<Eigen::Index>();
    const std::vector<double> data = jc.at("data").get<std::vector<double>>();
    if (rows != dim || cols != basis.size() ||
        static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw IoError("map JSON: coefficient shape does not match the basis");
    }
    Eigen::MatrixXd coeffs(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) coeffs(r, c) = data[r * cols + c];
    }
    TransportMap map{std::move(coeffs), std::move(basis), j.at("lambda").get<double>(),
                     j.at("sigma2").get<double>(), {}};
    if (j.contains("fit")) {
      const json& f = j["fit"];
      map.report.converged = f.value("converged", false);
      map.report.iterations = f.value("iterations", 0);
      map.report.final_residual = f.value("final_residual", 0.0);
      map.report.nonmonotone_samples = f.value("nonmonotone_samples", 0);
      if (f.contains("final_objective") && f["final_objective"].is_number()) {
        map.report.final_objective = f["final_objective"].get<double>();
      }
    }
    if (meta && j.contains("training")) {
      const json& t = j["training"];
      meta->n_train = t.value("n_train", 0);
      meta->seed = t.value("seed", std::uint64_t{0});
      meta->rho = t.value("rho", 0.0);
    }
    return map;
  } catch (const json::exception& e) {
    throw IoError(std::string("map JSON: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("map JSON: ") + e.what());
  }
}

void save_map(const std::string& path, const TransportMap& map, const TrainingMetadata& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << map_to_json(map, meta);
  if (!out) throw IoError("write failed for '" + path + "'");
}

TransportMap load_map(const std::string& path, TrainingMetadata* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return map_from_json(buf.str(), meta);
}

}  // namespace tlasso
