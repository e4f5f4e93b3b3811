#pragma once

#include <Eigen/Dense>
#include <optional>

#include "tlasso/objective.hpp"

namespace tlasso {

// argmin_x ||response - design x||^2 + l1_weight ||x||_1
struct LassoProblem {
  Eigen::MatrixXd design;
  Eigen::VectorXd response;
  double l1_weight = 0.0;

  double objective(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  void validate() const;
};

struct LassoSolution {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
};

enum class LassoSolver { kCoordinateDescent, kGirls };

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// Cyclic coordinate descent with a cached residual. Stops when the largest
// coordinate change in a sweep drops below tol; otherwise returns the last
// iterate with converged = false.
LassoSolution coordinate_descent_lasso(
    const LassoProblem& problem, double tol = 1e-10, int max_sweeps = 100000,
    const std::optional<Eigen::VectorXd>& warm_start = std::nullopt);

// Iteratively reweighted least squares: each step solves
//   argmin ||y - Phi x||^2 + (lambda/2) sum_j x_j^2 / max(|x_j^prev|, epsilon),
// a majorizer of the Lasso objective, so the objective is monotone up to
// O(lambda * epsilon). A step that increases the objective ends the loop.
LassoSolution girls_lasso(
    const LassoProblem& problem, double epsilon = 1e-8, double tol = 1e-12,
    int max_iter = 10000,
    const std::optional<Eigen::VectorXd>& warm_start = std::nullopt);

// The ADMM p-update rewritten as a d-dimensional Lasso:
//   argmin_p ||y_hat - phi_hat p||^2 + l1_weight ||p||_1
// where phi_hat is the upper Cholesky factor of Phi^T Phi + sigma2 rho I.
struct PSubproblem {
  Eigen::MatrixXd phi_hat;
  Eigen::VectorXd y_hat;
  double l1_weight = 0.0;

  LassoProblem as_lasso() const { return {phi_hat, y_hat, l1_weight}; }
};

// Caches the factorization of Phi^T Phi + sigma2 rho I and Phi^T y for one
// (g, rho) pair. Immutable after construction; shared across ADMM workers.
//
// For general sigma2 the p-update objective
//   g(p) + (rho/2)||BA - p||^2 + gamma^T (p - BA)
// is multiplied through by 2 sigma2 before completing the square, which gives
//   phi_hat^T phi_hat = Phi^T Phi + sigma2 rho I
//   phi_hat^T y_hat   = Phi^T y + sigma2 rho BA - sigma2 gamma
//   l1_weight         = lambda.
// At sigma2 = 1/2 these are exactly the textbook (rho/2, gamma/2) forms.
class PUpdateFactor {
 public:
  PUpdateFactor(const LassoObjectiveG& g, double rho);

  PSubproblem build(const Eigen::Ref<const Eigen::VectorXd>& mapped_sample,
                    const Eigen::Ref<const Eigen::VectorXd>& gamma) const;

  const Eigen::MatrixXd& phi_hat() const { return phi_hat_; }
  double rho() const { return rho_; }

 private:
  double rho_;
  double sigma2_;
  double lambda_;
  Eigen::MatrixXd gram_;     // Phi^T Phi + sigma2 rho I
  Eigen::MatrixXd phi_hat_;  // upper factor of gram_
  Eigen::VectorXd phi_t_y_;
};

PSubproblem build_p_subproblem(const LassoObjectiveG& g,
                               const Eigen::Ref<const Eigen::MatrixXd>& coeffs,
                               const Eigen::Ref<const Eigen::VectorXd>& a_i,
                               const Eigen::Ref<const Eigen::VectorXd>& gamma_i,
                               double rho);

Eigen::VectorXd solve_p_update(
    const PSubproblem& sub, LassoSolver solver,
    const std::optional<Eigen::VectorXd>& warm_start = std::nullopt);

}  // namespace tlasso
