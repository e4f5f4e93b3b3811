#include "tlasso/em_lambda.hpp"

#include <cmath>
#include <optional>

#include "tlasso/errors.hpp"
#include "tlasso/posterior_analysis.hpp"
#include "tlasso/random.hpp"

namespace tlasso {

void EmConfig::validate() const {
  require(lambda_init > 0.0 && std::isfinite(lambda_init),
          "EmConfig: lambda_init must be positive");
  require(n_samples >= 1, "EmConfig: n_samples must be >= 1");
  require(n_train >= 1, "EmConfig: n_train must be >= 1");
  require(rel_tol > 0.0, "EmConfig: rel_tol must be positive");
  require(max_iter >= 1, "EmConfig: max_iter must be >= 1");
}

double mean_l1_norm(const Eigen::Ref<const Eigen::MatrixXd>& samples) {
  require(samples.rows() >= 1, "mean_l1_norm: need at least one sample");
  return samples.cwiseAbs().sum() / static_cast<double>(samples.rows());
}

double m_step(int d, const Eigen::Ref<const Eigen::MatrixXd>& samples) {
  require(d >= 1, "m_step: dimension must be >= 1");
  require(samples.rows() >= 1, "m_step: need at least one sample");
  require(samples.cols() == d, "m_step: sample width differs from d");
  require(samples.allFinite(), "m_step: non-finite samples");
  const double m = mean_l1_norm(samples);
  if (m == 0.0) throw DegenerateInput("m_step: all samples are zero");
  return d / m;
}

EmTrace run_em(const LassoObjectiveG& g_template, const PceBasis& basis,
               const AdmmConfig& admm_cfg, const EmConfig& em_cfg) {
  em_cfg.validate();
  admm_cfg.validate();
  require(basis.dim() == g_template.dim(), "run_em: basis and objective dimensions differ");
  const int d = basis.dim();
  const double sigma2 = g_template.sigma2;

  EmTrace trace;
  trace.lambdas.push_back(em_cfg.lambda_init);
  std::optional<Eigen::MatrixXd> warm;
  double warm_rate = 0.0;

  for (int k = 0; k < em_cfg.max_iter; ++k) {
    const double lambda = trace.lambdas.back();
    const LassoObjectiveG g = g_template.with_lambda(lambda);
    const double rate = g.tau();
    const LaplacianPrior prior(d, rate);
    const PceBasis rated(prior, basis.order(), basis.family(), basis.indices());

    const SampleBatch train =
        sample_laplacian(prior, em_cfg.n_train, mix_seed(em_cfg.seed, 2 * k));
    std::optional<Eigen::MatrixXd> start;
    if (em_cfg.warm_start && warm) start = *warm * (warm_rate / rate);
    const TransportMap map = run_admm(g, train, rated, admm_cfg, start);
    trace.admm_converged.push_back(map.report.converged);
    trace.admm_iterations.push_back(map.report.iterations);
    warm = map.coeffs;
    warm_rate = rate;

    const Eigen::MatrixXd z = push_samples(map, em_cfg.n_samples,
                                           mix_seed(em_cfg.seed, 2 * k + 1),
                                           admm_cfg.workers);
    trace.mean_l1.push_back(mean_l1_norm(z));
    double next = 2.0 * sigma2 * m_step(d, z);
    if (em_cfg.average_last_two) next = 0.5 * (next + lambda);
    if (!std::isfinite(next) || next <= 0.0) {
      throw NumericalError("run_em: M-step produced a non-positive lambda");
    }
    trace.lambdas.push_back(next);
    if (std::abs(next - lambda) / lambda < em_cfg.rel_tol) {
      trace.converged = true;
      break;
    }
  }
  return trace;
}

}  // namespace tlasso
