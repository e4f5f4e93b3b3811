#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "tlasso/lasso_solvers.hpp"
#include "tlasso/objective.hpp"
#include "tlasso/prior_pce.hpp"

namespace tlasso {

enum class InitMode { kIdentity, kRandom };

// One line of the per-iteration trace.
struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;        // empirical KL objective at B (inf if some det <= 0)
  double primal_residual = 0.0;  // max_i of the three constraint residuals
  double b_change = 0.0;         // ||B_new - B_old||_F / ||B_old||_F
  double rho = 0.0;
};

struct AdmmConfig {
  double rho = 1.0;
  int max_iter = 500;
  double tol_b = 1e-4;
  double tol_res = 1e-3;
  InitMode init_mode = InitMode::kIdentity;
  std::uint64_t init_seed = 0;
  int workers = 1;
  LassoSolver p_solver = LassoSolver::kCoordinateDescent;
  // Doubles/halves rho when primal and dual residuals drift apart by more
  // than a factor of 10. Off by default; changes the iterates, not the fixed
  // points.
  bool residual_balancing = false;
  // Objective evaluation costs one extra pass over the samples per iteration.
  bool track_objective = true;
  std::function<void(const IterationRecord&)> on_iteration;

  void validate() const;
};

struct FitReport {
  bool converged = false;
  int iterations = 0;
  double final_residual = 0.0;
  double final_objective = 0.0;
  // Training samples where det(coeffs * J_i) <= 0 at the returned map.
  int nonmonotone_samples = 0;
  std::vector<IterationRecord> history;
};

// S(x) = coeffs * A(x).
struct TransportMap {
  Eigen::MatrixXd coeffs;  // d x K
  PceBasis basis;
  double lambda = 1.0;
  double sigma2 = 0.5;
  FitReport report;

  int dim() const { return basis.dim(); }
  double tau() const { return basis.prior().rate; }

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  // J_S(x) = coeffs * J(x), d x d.
  Eigen::MatrixXd jacobian(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  // Row-wise apply over an N x d matrix.
  Eigen::MatrixXd apply_rows(const Eigen::Ref<const Eigen::MatrixXd>& xs,
                             int workers = 1) const;
};

Eigen::VectorXd apply_map(const TransportMap& map,
                          const Eigen::Ref<const Eigen::VectorXd>& x);

// A_i and J_i for every training sample, stored side by side:
//   a: K x N, column i = A(X_i)
//   j: K x (N d), columns [i d, i d + d) = J(X_i)
struct TrainingTables {
  Eigen::MatrixXd a;
  Eigen::MatrixXd j;
  int n_samples = 0;
  int dim = 0;

  static TrainingTables build(const PceBasis& basis, const SampleBatch& batch,
                              int workers = 1);

  int basis_size() const { return static_cast<int>(a.rows()); }
  auto a_i(int i) const { return a.col(i); }
  auto j_i(int i) const { return j.middleCols(static_cast<Eigen::Index>(i) * dim, dim); }
};

// [rho (I + (1/N) sum_i A_i A_i^T + J_i J_i^T)]^{-1}, symmetrized.
Eigen::MatrixXd precompute_M(const TrainingTables& tables, double rho);

// Consensus variable plus the per-sample blocks. Column layouts mirror
// TrainingTables: p and gamma are d x N, z and beta are d x (N d).
struct AdmmState {
  Eigen::MatrixXd b;
  std::vector<Eigen::MatrixXd> f;
  std::vector<Eigen::MatrixXd> alpha;
  Eigen::MatrixXd z;
  Eigen::MatrixXd beta;
  Eigen::MatrixXd p;
  Eigen::MatrixXd gamma;
  Eigen::MatrixXd m;
  double rho = 1.0;
  int iteration = 0;

  int n_samples() const { return static_cast<int>(p.cols()); }
  int dim() const { return static_cast<int>(b.rows()); }
  auto z_i(int i) { return z.middleCols(static_cast<Eigen::Index>(i) * dim(), dim()); }
  auto z_i(int i) const { return z.middleCols(static_cast<Eigen::Index>(i) * dim(), dim()); }
  auto beta_i(int i) { return beta.middleCols(static_cast<Eigen::Index>(i) * dim(), dim()); }
  auto beta_i(int i) const {
    return beta.middleCols(static_cast<Eigen::Index>(i) * dim(), dim());
  }
};

// Consensus step. Columns of B are computed in fixed-width blocks, so the
// result is bitwise independent of `workers`.
Eigen::MatrixXd update_B(const AdmmState& state, const TrainingTables& tables,
                         int workers = 1);

Eigen::MatrixXd update_F(const Eigen::Ref<const Eigen::MatrixXd>& alpha_i,
                         const Eigen::Ref<const Eigen::MatrixXd>& b_new, double rho);

// argmin_{Z > 0} -log det Z + (rho/2) ||Z - W||_F^2 with W = sym(B J_i - beta_i / rho).
Eigen::MatrixXd update_Z(const Eigen::Ref<const Eigen::MatrixXd>& b_new,
                         const Eigen::Ref<const Eigen::MatrixXd>& j_i,
                         const Eigen::Ref<const Eigen::MatrixXd>& beta_i, double rho);

struct DualBlock {
  Eigen::VectorXd gamma;
  Eigen::MatrixXd beta;
  Eigen::MatrixXd alpha;
};

// Dual ascent for one sample, given the freshly updated primal block.
DualBlock update_duals(const DualBlock& duals,
                       const Eigen::Ref<const Eigen::VectorXd>& p_i,
                       const Eigen::Ref<const Eigen::MatrixXd>& z_i,
                       const Eigen::Ref<const Eigen::MatrixXd>& f_i,
                       const Eigen::Ref<const Eigen::MatrixXd>& b_new,
                       const Eigen::Ref<const Eigen::VectorXd>& a_i,
                       const Eigen::Ref<const Eigen::MatrixXd>& j_i, double rho);

struct ObjectiveValue {
  double value = 0.0;  // +inf when some det(B J_i) <= 0
  bool feasible = true;
  int nonpositive_dets = 0;
};

// (1/N) sum_i [g(B A_i) - log det(B J_i)]
ObjectiveValue empirical_objective(const Eigen::Ref<const Eigen::MatrixXd>& b,
                                   const LassoObjectiveG& g,
                                   const TrainingTables& tables, int workers = 1);

// Full-state initialization for a given starting B (identity, random or warm).
AdmmState initialize_state(const Eigen::Ref<const Eigen::MatrixXd>& b0,
                           const TrainingTables& tables, double rho);

// Consensus ADMM for the map coefficients. Never throws on non-convergence;
// check map.report.converged. Throws NumericalError if an iterate turns NaN.
TransportMap run_admm(const LassoObjectiveG& g, const SampleBatch& train,
                      const PceBasis& basis, const AdmmConfig& cfg,
                      const std::optional<Eigen::MatrixXd>& warm_start = std::nullopt);

struct JacobianResidual {
  Eigen::VectorXd r;        // log p(x) + g(S(x)) - log det J_S(x)
  std::vector<bool> valid;  // false where det J_S(x) <= 0
};

// Change-of-variables diagnostic: for a perfect map r(x) is constant in x.
JacobianResidual jacobian_equation_residual(const TransportMap& map,
                                            const LassoObjectiveG& g,
                                            const SampleBatch& xs);

// Number of rows of xs where det J_S(x) <= 0 (held-out monotonicity check).
int count_nonmonotone(const TransportMap& map, const Eigen::Ref<const Eigen::MatrixXd>& xs);

}  // namespace tlasso
