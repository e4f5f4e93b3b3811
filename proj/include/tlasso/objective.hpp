#pragma once

#include <Eigen/Dense>

namespace tlasso {

// Negative log posterior of the Bayesian Lasso up to an additive constant:
//   g(x) = ||y - Phi x||^2 / (2 sigma2) + tau ||x||_1,   tau = lambda / (2 sigma2).
// With sigma2 = 1/2 this is the plain Lasso objective and tau == lambda.
struct LassoObjectiveG {
  Eigen::MatrixXd phi;
  Eigen::VectorXd y;
  double lambda = 1.0;
  double sigma2 = 0.5;

  LassoObjectiveG() = default;
  LassoObjectiveG(Eigen::MatrixXd phi, Eigen::VectorXd y, double lambda,
                  double sigma2 = 0.5);

  int dim() const { return static_cast<int>(phi.cols()); }
  int n_obs() const { return static_cast<int>(phi.rows()); }
  // Laplacian prior rate implied by (lambda, sigma2).
  double tau() const { return lambda / (2.0 * sigma2); }

  double value(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  // Same problem at a different lambda (EM, lambda sweeps).
  LassoObjectiveG with_lambda(double new_lambda) const;

  void validate() const;
};

}  // namespace tlasso
