#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "tlasso/gibbs_baseline.hpp"
#include "tlasso/posterior_analysis.hpp"
#include "tlasso/transport_admm.hpp"

namespace tlasso {

// Transport (fixed sigma2) against the Park-Casella Gibbs sampler (random
// sigma2) at a matched penalty. The Gibbs model's prior rate is lambda_pc / sigma;
// the transport model fixes sigma2 at the unbiased least-squares estimate and
// uses tau = lambda_pc / sigma_hat, lambda = 2 tau sigma2_hat.
struct CompareConfig {
  std::optional<double> lambda_pc;  // estimated by Gibbs MCEM when absent
  double gibbs_em_init = 1.0;
  int gibbs_em_iters = 15;
  GibbsConfig gibbs_em_chain{2000, 500, 1, 0, false, 0.5, std::nullopt};
  int order = 3;
  BasisFamily family = BasisFamily::kContinuousSignLaguerre;
  int n_train = 500;
  int n_push = 10000;
  AdmmConfig admm;
  GibbsConfig gibbs;  // 10000 kept draws after 1000 burn-in
  std::uint64_t seed = 0;
  double level = 0.95;
  int kde_points = 200;
};

struct CompareResult {
  double lambda_pc = 0.0;
  bool lambda_estimated = false;
  double sigma2_hat = 0.0;
  double tau = 0.0;
  double lambda = 0.0;
  FitReport fit;
  PosteriorSummary transport;
  PosteriorSummary gibbs;
  Eigen::VectorXd transport_sd;
  Eigen::VectorXd gibbs_sd;
  double gibbs_sigma2_mean = 0.0;
  // |median_t - median_g| / gibbs_sd
  Eigen::VectorXd median_gap_sd;
  // Coordinates where the transport interval is no wider than the Gibbs one.
  int narrower_count = 0;
  Eigen::MatrixXd kde_grid;  // d x kde_points
  Eigen::MatrixXd kde_transport;
  Eigen::MatrixXd kde_gibbs;
};

// sum of squared residuals / (n - d - 1) of the least-squares fit.
double unbiased_sigma2(const Eigen::Ref<const Eigen::MatrixXd>& phi,
                       const Eigen::Ref<const Eigen::VectorXd>& y);

CompareResult compare_samplers(const Eigen::Ref<const Eigen::MatrixXd>& phi,
                               const Eigen::Ref<const Eigen::VectorXd>& y,
                               const CompareConfig& cfg);

std::string compare_to_json(const CompareResult& r);
// One row per coordinate.
void write_compare_csv(const CompareResult& r, std::ostream& out);

}  // namespace tlasso
