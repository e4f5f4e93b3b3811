#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <vector>

#include "tlasso/objective.hpp"
#include "tlasso/prior_pce.hpp"
#include "tlasso/transport_admm.hpp"

namespace tlasso {

struct EmConfig {
  double lambda_init = 1.0;
  int n_samples = 10000;  // posterior draws per E-step
  int n_train = 500;     // prior samples per map fit
  double rel_tol = 1e-3;
  int max_iter = 25;
  std::uint64_t seed = 0;
  // Start each E-step's ADMM from the previous map, rescaled to the new rate.
  bool warm_start = true;
  // lambda <- (lambda_new + lambda_old) / 2 after each M-step.
  bool average_last_two = false;

  void validate() const;
};

// lambdas[0] is lambda_init; lambdas[k+1] follows the k-th E/M step. All
// lambdas are in the objective's convention (lambda = 2 tau sigma2).
struct EmTrace {
  std::vector<double> lambdas;
  std::vector<double> mean_l1;
  std::vector<bool> admm_converged;
  std::vector<int> admm_iterations;
  bool converged = false;
};

// (1/N) sum_i ||row_i||_1
double mean_l1_norm(const Eigen::Ref<const Eigen::MatrixXd>& samples);

// d / mean_l1(samples): the ML estimate of a Laplacian rate.
double m_step(int d, const Eigen::Ref<const Eigen::MatrixXd>& samples);

// EM for lambda with transport-map E-steps. g_template supplies Phi, y and
// sigma2 (its lambda is ignored); basis supplies the order, family and index
// set, and is re-rated to tau = lambda / (2 sigma2) at every iteration.
EmTrace run_em(const LassoObjectiveG& g_template, const PceBasis& basis,
               const AdmmConfig& admm_cfg, const EmConfig& em_cfg);

}  // namespace tlasso
