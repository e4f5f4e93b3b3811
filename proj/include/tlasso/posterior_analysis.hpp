#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tlasso/em_lambda.hpp"
#include "tlasso/gibbs_baseline.hpp"
#include "tlasso/objective.hpp"
#include "tlasso/transport_admm.hpp"

namespace tlasso {

// n fresh prior draws at the map's rate, pushed through the map. N x d.
Eigen::MatrixXd push_samples(const TransportMap& map, int n, std::uint64_t seed,
                             int workers = 1);

// Even N averages the two middle order statistics.
Eigen::VectorXd componentwise_median(const Eigen::Ref<const Eigen::MatrixXd>& samples);

// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile_sorted(const std::vector<double>& sorted, double p);

struct CredibleIntervals {
  Eigen::VectorXd low;
  Eigen::VectorXd high;
};

// Equal-tailed: quantiles (1-level)/2 and 1-(1-level)/2 per column.
CredibleIntervals credible_intervals(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                     double level);

// 1.06 * sd * N^{-1/5}
double silverman_bandwidth(const Eigen::Ref<const Eigen::VectorXd>& samples);

// Gaussian-kernel density estimate on `grid`.
Eigen::VectorXd kde(const Eigen::Ref<const Eigen::VectorXd>& samples,
                    const Eigen::Ref<const Eigen::VectorXd>& grid);

struct PosteriorSummary {
  Eigen::VectorXd medians;
  Eigen::VectorXd ci_low;
  Eigen::VectorXd ci_high;
  int n_samples = 0;
  double lambda = 0.0;
};

PosteriorSummary summarize(const Eigen::Ref<const Eigen::MatrixXd>& samples, double lambda,
                           double level = 0.95);

enum class PathSampler { kTransport, kGibbs, kLassoPoint };
enum class LambdaMethod { kNone, kCv, kEm, kGibbsEm };

std::string to_string(PathSampler s);
std::string to_string(LambdaMethod m);

struct PathConfig {
  AdmmConfig admm;
  int order = 3;
  BasisFamily family = BasisFamily::kContinuousSignLaguerre;
  int n_train = 500;
  int n_push = 10000;
  GibbsConfig gibbs;
  std::uint64_t seed = 0;
  double level = 0.95;
  // Annotate the path with an estimated lambda: cv for lasso-point, em for
  // transport, gibbs-em for gibbs.
  bool estimate_optimal = false;
  EmConfig em;
  int cv_folds = 10;
  int gibbs_em_iters = 10;
  double gibbs_em_init = 1.0;  // lambda_pc
};

// The grid is in the objective's lambda convention (lambda = 2 tau sigma2).
// The Gibbs sampler is run at lambda_pc = tau * sigma, reported per row.
struct PathResult {
  PathSampler sampler = PathSampler::kTransport;
  double sigma2 = 0.5;
  Eigen::VectorXd lambda_grid;
  Eigen::VectorXd lambda_pc;
  Eigen::MatrixXd medians_by_lambda;  // grid x d
  Eigen::MatrixXd ci_low;
  Eigen::MatrixXd ci_high;
  std::vector<std::string> errors;  // empty string where the grid point succeeded
  LambdaMethod method = LambdaMethod::kNone;
  std::optional<double> optimal_lambda;
  std::optional<double> optimal_lambda_pc;
};

PathResult lambda_sweep_path(const LassoObjectiveG& g_template,
                             const std::vector<double>& lambda_grid, PathSampler sampler,
                             const PathConfig& cfg);

// K-fold cross-validated Lasso penalty (objective ||y - Phi x||^2 + lambda ||x||_1),
// minimizing mean held-out squared error over `grid`.
double cv_lasso_lambda(const Eigen::Ref<const Eigen::MatrixXd>& phi,
                       const Eigen::Ref<const Eigen::VectorXd>& y,
                       const std::vector<double>& grid, int folds, std::uint64_t seed);

// One row per (lambda, coordinate).
void write_path_csv(const PathResult& path, std::ostream& out);
std::string path_to_json(const PathResult& path);

}  // namespace tlasso
