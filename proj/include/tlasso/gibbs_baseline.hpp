#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>

#include "tlasso/random.hpp"

namespace tlasso {

// Park-Casella hierarchy with pi(sigma2) ~ 1/sigma2:
//   x | t^2, sigma2 ~ N(0, sigma2 D_t),  t_j^2 ~ Exp(lambda_pc^2 / 2).
struct GibbsState {
  Eigen::VectorXd x;
  Eigen::VectorXd inv_t2;
  double sigma2 = 1.0;
};

struct GibbsConfig {
  int iters = 10000;  // kept draws after burn-in (before thinning)
  int burn_in = 1000;
  int thin = 1;
  std::uint64_t seed = 0;
  // Hold sigma2 at sigma2_fixed: the fixed-parameter scale-mixture sampler.
  bool fix_sigma2 = false;
  double sigma2_fixed = 0.5;
  // Starting point; defaults to least squares (ridge-stabilized), its
  // residual variance and inv_t2 = 1.
  std::optional<GibbsState> init;

  void validate() const;
};

struct GibbsChain {
  Eigen::MatrixXd draws;         // M x d
  Eigen::VectorXd sigma2_draws;  // M
  Eigen::VectorXd mean_t2;       // chain average of t_j^2 (used by MCEM)
  int burn_in = 0;
  int thin = 1;
  double lambda_pc = 0.0;
};

// N(A^{-1} Phi^T y, sigma2 A^{-1}), A = Phi^T Phi + diag(inv_t2).
Eigen::VectorXd sample_x_conditional(const Eigen::Ref<const Eigen::VectorXd>& y,
                                     const Eigen::Ref<const Eigen::MatrixXd>& phi,
                                     const Eigen::Ref<const Eigen::VectorXd>& inv_t2,
                                     double sigma2, Rng& rng);

struct InvGammaParams {
  double shape;
  double scale;
};

// Shape (n-1)/2 + d/2, scale ||y - Phi x||^2 / 2 + sum_j x_j^2 inv_t2_j / 2.
InvGammaParams sigma2_conditional_params(const Eigen::Ref<const Eigen::VectorXd>& y,
                                         const Eigen::Ref<const Eigen::MatrixXd>& phi,
                                         const Eigen::Ref<const Eigen::VectorXd>& x,
                                         const Eigen::Ref<const Eigen::VectorXd>& inv_t2);

double sample_sigma2_conditional(const Eigen::Ref<const Eigen::VectorXd>& y,
                                 const Eigen::Ref<const Eigen::MatrixXd>& phi,
                                 const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const Eigen::Ref<const Eigen::VectorXd>& inv_t2, Rng& rng);

// 1/t_j^2 ~ InverseGaussian(sqrt(lambda_pc^2 sigma2 / x_j^2), lambda_pc^2);
// x_j == 0 falls back to t_j^2 ~ Exp(lambda_pc^2 / 2).
Eigen::VectorXd sample_invt2_conditional(const Eigen::Ref<const Eigen::VectorXd>& x,
                                         double sigma2, double lambda_pc, Rng& rng);

// Michael-Schucany-Haas transformation sampler.
double sample_inverse_gaussian(double mean, double shape, Rng& rng);
double inverse_gaussian_cdf(double x, double mean, double shape);

GibbsChain run_gibbs(const Eigen::Ref<const Eigen::VectorXd>& y,
                     const Eigen::Ref<const Eigen::MatrixXd>& phi, double lambda_pc,
                     const GibbsConfig& cfg);

// Park-Casella Monte Carlo EM for lambda_pc: lambda <- sqrt(2 d / sum_j E[t_j^2]).
struct GibbsEmResult {
  double lambda_pc = 0.0;
  std::vector<double> trace;
};
GibbsEmResult gibbs_em_lambda(const Eigen::Ref<const Eigen::VectorXd>& y,
                              const Eigen::Ref<const Eigen::MatrixXd>& phi,
                              double lambda_init, int em_iters, const GibbsConfig& cfg);

// Header "iteration,sigma2,x1..xd", one row per kept draw.
void write_chain_csv(const GibbsChain& chain, std::ostream& out);

}  // namespace tlasso
