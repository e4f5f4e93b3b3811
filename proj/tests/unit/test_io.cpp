#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <sys/wait.h>

#include "tlasso/compare.hpp"
#include "tlasso/dataset.hpp"
#include "tlasso/errors.hpp"
#include "tlasso/format.hpp"
#include "tlasso/map_io.hpp"

using namespace tlasso;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "tlasso_unit_io";
  fs::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& body) {
  const fs::path p = scratch_dir() / name;
  std::ofstream(p) << body;
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("number and field formatting") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 5e-324}) {
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_field("two\nlines") == "\"two\nlines\"");
}

TEST_CASE("CSV parsing") {
  const auto t = parse_csv("a,\"b,c\",\"d\"\"e\"\r\n1,2,3\n4,5,6");
  REQUIRE(t.header.size() == 3);
  CHECK(t.header[1] == "b,c");
  CHECK(t.header[2] == "d\"e");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][2] == "6");
  CHECK_THROWS_AS(read_csv_file("/nonexistent/file.csv"), IoError);
}

TEST_CASE("dataset loading and standardization") {
  // Already standardized columns: mean 0 and unit norm.
  const double s = 1.0 / std::sqrt(2.0);
  const std::string path = write_file("std.csv",
                                      "u,v,y\n" + format_double(s) + ",0,1\n" + format_double(-s) +
                                          "," + format_double(s) + ",-1\n0," + format_double(-s) + ",0\n");
  const Dataset ds = load_dataset(path, "y");
  CHECK(ds.n() == 3);
  CHECK(ds.d() == 2);
  CHECK(ds.column_names == std::vector<std::string>{"u", "v"});
  CHECK(ds.response_name == "y");
  CHECK((ds.standardization.scales.array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(ds.standardization.means.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(ds.standardization.response_mean) < 1e-12);

  // Invariants on a generic file, response selected by name from the middle.
  const std::string raw = write_file("raw.csv", "a,target,b\n1,10,7\n2,11,3\n4,15,5\n8,13,1\n");
  const Dataset d2 = load_dataset(raw, "target");
  CHECK(d2.column_names == std::vector<std::string>{"a", "b"});
  for (int j = 0; j < d2.d(); ++j) {
    CHECK(std::abs(d2.design.col(j).mean()) < 1e-10);
    CHECK(std::abs(d2.design.col(j).norm() - 1.0) < 1e-10);
  }
  CHECK(std::abs(d2.response.mean()) < 1e-10);
  CHECK(d2.standardization.response_mean == doctest::Approx(12.25));
  // Back-transform: raw-scale coefficients reproduce the standardized fit.
  const Eigen::Vector2d x(0.3, -0.2);
  const Eigen::VectorXd raw_coef = d2.to_raw_scale(x);
  Eigen::MatrixXd raw_design(4, 2);
  raw_design << 1, 7, 2, 3, 4, 5, 8, 1;
  Eigen::VectorXd fit_raw = raw_design * raw_coef;
  fit_raw.array() -= fit_raw.mean();
  CHECK((fit_raw - d2.design * x).cwiseAbs().maxCoeff() < 1e-12);

  // Default response column is the last one.
  CHECK(load_dataset(raw).response_name == "b");

  CHECK_THROWS_AS(load_dataset(write_file("const.csv", "a,b,y\n5,1,1\n5,2,2\n5,3,4\n"), "y"),
                  DegenerateInput);
  CHECK_THROWS_AS(load_dataset(write_file("text.csv", "a,y\n1,2\nx,3\n"), "y"), IoError);
  CHECK_THROWS_AS(load_dataset(raw, "missing"), IoError);
  CHECK_THROWS_AS(load_dataset((scratch_dir() / "nope.csv").string()), IoError);
}

TEST_CASE("bundled fixture matches the diabetes schema") {
  const Dataset ds = load_dataset(TLASSO_FIXTURE_DIR "/diabetes_synthetic.csv", "y");
  CHECK(ds.n() == 20);
  CHECK(ds.d() == 10);
  CHECK(ds.column_names ==
        std::vector<std::string>{"age", "sex", "bmi", "bp", "s1", "s2", "s3", "s4", "s5", "s6"});
}

TEST_CASE("map serialization round trip is bit exact") {
  const PceBasis basis(LaplacianPrior(3, 0.7321), 3, BasisFamily::kContinuousSignLaguerre);
  TransportMap map{basis.identity_coefficients(), basis, 1.4642, 0.999};
  Rng rng(1);
  for (Eigen::Index i = 0; i < map.coeffs.size(); ++i) map.coeffs.data()[i] += uniform_open01(rng) * 1e-3;
  map.report.converged = true;
  map.report.iterations = 42;
  const TrainingMetadata meta{500, 7, 1.0};

  const std::string path = (scratch_dir() / "map.json").string();
  save_map(path, map, meta);
  TrainingMetadata back_meta;
  const TransportMap back = load_map(path, &back_meta);
  CHECK((back.coeffs.array() == map.coeffs.array()).all());
  CHECK(back.basis.indices() == map.basis.indices());
  CHECK(back.basis.family() == map.basis.family());
  CHECK(back.tau() == map.tau());
  CHECK(back.lambda == map.lambda);
  CHECK(back.sigma2 == map.sigma2);
  CHECK(back_meta.n_train == 500);
  CHECK(back_meta.seed == 7);

  const auto xs = sample_laplacian(basis.prior(), 200, 3);
  CHECK((back.apply_rows(xs.samples).array() == map.apply_rows(xs.samples).array()).all());
  CHECK(map_to_json(back, back_meta) == map_to_json(map, meta));

  auto doc = nlohmann::json::parse(map_to_json(map, meta));
  CHECK(doc["format"] == "transport-lasso-map");
  doc["version"] = 99;
  CHECK_THROWS_AS(map_from_json(doc.dump()), IoError);
  CHECK_THROWS_AS(map_from_json("{not json"), IoError);
  CHECK_THROWS_AS(load_map((scratch_dir() / "missing.json").string()), IoError);
}

TEST_CASE("compare harness on the bundled fixture") {
  const Dataset ds = load_dataset(TLASSO_FIXTURE_DIR "/diabetes_synthetic.csv", "y");
  CompareConfig cfg;
  cfg.lambda_pc = 1.5;
  cfg.n_push = 2000;
  cfg.gibbs.iters = 2000;
  cfg.gibbs.burn_in = 200;
  cfg.admm.residual_balancing = true;
  cfg.kde_points = 50;
  cfg.seed = 1;
  const auto r = compare_samplers(ds.design, ds.response, cfg);
  CHECK_FALSE(r.lambda_estimated);
  CHECK(r.lambda_pc == 1.5);
  CHECK(r.sigma2_hat == doctest::Approx(unbiased_sigma2(ds.design, ds.response)));
  CHECK(r.tau == doctest::Approx(1.5 / std::sqrt(r.sigma2_hat)));
  CHECK(r.lambda == doctest::Approx(2.0 * r.tau * r.sigma2_hat));
  CHECK(r.median_gap_sd.size() == 10);
  CHECK(r.kde_grid.cols() == 50);
  CHECK(r.kde_transport.allFinite());
  const auto json = nlohmann::json::parse(compare_to_json(r));
  CHECK(json["transport_ci_no_wider_count"] == r.narrower_count);
  std::ostringstream csv;
  write_compare_csv(r, csv);
  const std::string text = csv.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 11);
}

#ifdef TLASSO_CLI_PATH
namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TLASSO_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("CLI: fit, sample, determinism and validation") {
  const fs::path dir = scratch_dir();
  const std::string data = TLASSO_FIXTURE_DIR "/diabetes_synthetic.csv";
  const std::string map_a = (dir / "cli_map_a.json").string();
  const std::string map_b = (dir / "cli_map_b.json").string();
  const std::string common = " --data " + data + " --response y --seed 3 --lambda 2 --sigma2 1 --n-train 100 --max-iter 40";
  REQUIRE(run_cli("fit" + common + " --out " + map_a) == 0);
  REQUIRE(run_cli("fit" + common + " --workers 2 --out " + map_b) == 0);
  CHECK(slurp(map_a) == slurp(map_b));

  const std::string s_a = (dir / "cli_s_a.csv").string();
  const std::string s_b = (dir / "cli_s_b.csv").string();
  REQUIRE(run_cli("sample --map " + map_a + " --n 50 --seed 4 --out " + s_a) == 0);
  REQUIRE(run_cli("sample --map " + map_b + " --n 50 --seed 4 --out " + s_b) == 0);
  CHECK(slurp(s_a) == slurp(s_b));
  const std::string draws = slurp(s_a);
  CHECK(std::count(draws.begin(), draws.end(), '\n') == 51);

  const std::string empty = (dir / "cli_empty.csv").string();
  fs::remove(empty);
  CHECK(run_cli("sample --map " + map_a + " --n 0 --out " + empty) == 2);
  CHECK_FALSE(fs::exists(empty));
  CHECK(run_cli("fit --data " + (dir / "absent.csv").string() + " --out " + map_a) == 4);
  CHECK(run_cli("fit" + common + " --rho -1 --out " + map_a) == 2);
  CHECK(run_cli("bogus-subcommand") != 0);

  const std::string g_a = (dir / "cli_g_a.csv").string();
  const std::string g_b = (dir / "cli_g_b.csv").string();
  REQUIRE(run_cli("gibbs --data " + data + " --response y --lambda 1 --iters 200 --burn-in 20 --seed 5 --out " + g_a) == 0);
  REQUIRE(run_cli("gibbs --data " + data + " --response y --lambda 1 --iters 200 --burn-in 20 --seed 5 --out " + g_b) == 0);
  CHECK(slurp(g_a) == slurp(g_b));
}
#endif
