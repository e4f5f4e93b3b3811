#include "tlasso/lasso_solvers.hpp"

#include <cmath>
#include <limits>

#include "tlasso/errors.hpp"

namespace tlasso {

double LassoProblem::objective(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return (response - design * x).squaredNorm() + l1_weight * x.lpNorm<1>();
}

void LassoProblem::validate() const {
  require(design.rows() == response.size(),
          "LassoProblem: design rows must match response length");
  require(l1_weight >= 0.0 && std::isfinite(l1_weight),
          "LassoProblem: l1_weight must be non-negative");
  require(design.allFinite() && response.allFinite(),
          "LassoProblem: non-finite entries");
}

LassoSolution coordinate_descent_lasso(const LassoProblem& problem, double tol,
                                       int max_sweeps,
                                       const std::optional<Eigen::VectorXd>& warm_start) {
  problem.validate();
  require(tol > 0.0, "coordinate_descent_lasso: tol must be positive");
  const auto& phi = problem.design;
  const Eigen::Index d = phi.cols();
  const double half_l1 = 0.5 * problem.l1_weight;

  LassoSolution sol;
  sol.x = warm_start ? *warm_start : Eigen::VectorXd::Zero(d);
  require(sol.x.size() == d, "coordinate_descent_lasso: warm start has wrong size");

  const Eigen::VectorXd col_sq = phi.colwise().squaredNorm().transpose();
  Eigen::VectorXd residual = problem.response - phi * sol.x;

  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (col_sq(j) == 0.0) {
        sol.x(j) = 0.0;
        continue;
      }
      const double z = phi.col(j).dot(residual) + col_sq(j) * sol.x(j);
      const double updated = soft_threshold(z, half_l1) / col_sq(j);
      const double change = updated - sol.x(j);
      if (change != 0.0) {
        residual.noalias() -= change * phi.col(j);
        sol.x(j) = updated;
        max_change = std::max(max_change, std::abs(change));
      }
    }
    sol.iterations = sweep;
    if (max_change < tol) {
      sol.converged = true;
      break;
    }
  }
  return sol;
}

namespace {

// Solves (gram + diag(extra)) x = rhs, retrying once with a small ridge.
Eigen::VectorXd weighted_solve(const Eigen::MatrixXd& gram,
                               const Eigen::VectorXd& extra,
                               const Eigen::VectorXd& rhs) {
  Eigen::MatrixXd system = gram;
  system.diagonal() += extra;
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  const double ridge =
      1e-10 * std::max(1.0, system.diagonal().cwiseAbs().maxCoeff());
  system.diagonal().array() += ridge;
  llt.compute(system);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("girls_lasso: weighted least-squares system is singular");
  }
  return llt.solve(rhs);
}

}  // namespace

LassoSolution girls_lasso(const LassoProblem& problem, double epsilon, double tol,
                          int max_iter,
                          const std::optional<Eigen::VectorXd>& warm_start) {
  problem.validate();
  require(epsilon > 0.0, "girls_lasso: epsilon must be positive");
  require(tol > 0.0, "girls_lasso: tol must be positive");
  const Eigen::Index d = problem.design.cols();
  const Eigen::MatrixXd gram = problem.design.transpose() * problem.design;
  const Eigen::VectorXd rhs = problem.design.transpose() * problem.response;
  const double half_l1 = 0.5 * problem.l1_weight;

  LassoSolution sol;
  if (warm_start) {
    require(warm_start->size() == d, "girls_lasso: warm start has wrong size");
    sol.x = *warm_start;
  } else {
    sol.x = weighted_solve(gram, Eigen::VectorXd::Zero(d), rhs);
  }
  if (problem.l1_weight == 0.0) {
    sol.x = weighted_solve(gram, Eigen::VectorXd::Zero(d), rhs);
    sol.iterations = 1;
    sol.converged = true;
    return sol;
  }

  double best = problem.objective(sol.x);
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd weights =
        half_l1 * sol.x.cwiseAbs().cwiseMax(epsilon).cwiseInverse();
    Eigen::VectorXd next = weighted_solve(gram, weights, rhs);
    const double value = problem.objective(next);
    sol.iterations = it;
    if (value > best + problem.l1_weight * epsilon * d +
                    1e-15 * std::max(1.0, std::abs(best))) {
      sol.converged = true;
      break;
    }
    const double change = (next - sol.x).lpNorm<Eigen::Infinity>();
    sol.x = std::move(next);
    best = std::min(best, value);
    if (change < tol * std::max(1.0, sol.x.lpNorm<Eigen::Infinity>())) {
      sol.converged = true;
      break;
    }
  }
  // Coordinates driven to the smoothing floor are zeros of the Lasso solution.
  for (Eigen::Index j = 0; j < d; ++j) {
    if (std::abs(sol.x(j)) <= 10.0 * epsilon) sol.x(j) = 0.0;
  }
  return sol;
}

PUpdateFactor::PUpdateFactor(const LassoObjectiveG& g, double rho)
    : rho_(rho), sigma2_(g.sigma2), lambda_(g.lambda) {
  require(rho > 0.0 && std::isfinite(rho), "PUpdateFactor: rho must be positive");
  g.validate();
  gram_ = g.phi.transpose() * g.phi;
  gram_.diagonal().array() += sigma2_ * rho_;
  Eigen::LLT<Eigen::MatrixXd> llt(gram_);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("PUpdateFactor: Cholesky of Phi^T Phi + sigma2 rho I failed");
  }
  phi_hat_ = llt.matrixU();
  phi_t_y_ = g.phi.transpose() * g.y;
}

PSubproblem PUpdateFactor::build(const Eigen::Ref<const Eigen::VectorXd>& mapped_sample,
                                 const Eigen::Ref<const Eigen::VectorXd>& gamma) const {
  require(mapped_sample.size() == phi_t_y_.size() && gamma.size() == phi_t_y_.size(),
          "PUpdateFactor::build: dimension mismatch");
  PSubproblem sub;
  Eigen::VectorXd linear = phi_t_y_ + sigma2_ * rho_ * mapped_sample - sigma2_ * gamma;
  // phi_hat^T y_hat = linear, one triangular solve.
  phi_hat_.transpose().triangularView<Eigen::Lower>().solveInPlace(linear);
  sub.phi_hat = phi_hat_;
  sub.y_hat = std::move(linear);
  sub.l1_weight = lambda_;
  return sub;
}

PSubproblem build_p_subproblem(const LassoObjectiveG& g,
                               const Eigen::Ref<const Eigen::MatrixXd>& coeffs,
                               const Eigen::Ref<const Eigen::VectorXd>& a_i,
                               const Eigen::Ref<const Eigen::VectorXd>& gamma_i,
                               double rho) {
  require(coeffs.cols() == a_i.size(), "build_p_subproblem: coeffs/A_i mismatch");
  return PUpdateFactor(g, rho).build(coeffs * a_i, gamma_i);
}

Eigen::VectorXd solve_p_update(const PSubproblem& sub, LassoSolver solver,
                               const std::optional<Eigen::VectorXd>& warm_start) {
  const LassoProblem problem = sub.as_lasso();
  LassoSolution sol = solver == LassoSolver::kCoordinateDescent
                          ? coordinate_descent_lasso(problem, 1e-12, 100000, warm_start)
                          : girls_lasso(problem, 1e-10, 1e-13, 10000, warm_start);
  if (!sol.x.allFinite()) throw NumericalError("solve_p_update: non-finite solution");
  return sol.x;
}

}  // namespace tlasso
