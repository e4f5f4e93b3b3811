#include "tlasso/gibbs_baseline.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <string>

#include "tlasso/errors.hpp"
#include "tlasso/format.hpp"

namespace tlasso {

namespace {

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

void check_design(const Eigen::Ref<const Eigen::VectorXd>& y,
                  const Eigen::Ref<const Eigen::MatrixXd>& phi, const char* who) {
  require(phi.rows() == y.size(), std::string(who) + ": phi rows must match y length");
  require(phi.cols() >= 1, std::string(who) + ": need at least one column");
}

}  // namespace

void GibbsConfig::validate() const {
  require(iters >= 1, "GibbsConfig: iters must be >= 1");
  require(burn_in >= 0, "GibbsConfig: burn_in must be >= 0");
  require(thin >= 1, "GibbsConfig: thin must be >= 1");
  if (fix_sigma2) require(sigma2_fixed > 0.0, "GibbsConfig: sigma2_fixed must be positive");
}

Eigen::VectorXd sample_x_conditional(const Eigen::Ref<const Eigen::VectorXd>& y,
                                     const Eigen::Ref<const Eigen::MatrixXd>& phi,
                                     const Eigen::Ref<const Eigen::VectorXd>& inv_t2,
                                     double sigma2, Rng& rng) {
  check_design(y, phi, "sample_x_conditional");
  require(inv_t2.size() == phi.cols(), "sample_x_conditional: inv_t2 has wrong size");
  require(sigma2 > 0.0, "sample_x_conditional: sigma2 must be positive");
  Eigen::MatrixXd a = phi.transpose() * phi;
  a.diagonal() += inv_t2;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("sample_x_conditional: Cholesky of Phi^T Phi + D^-1 failed");
  }
  const Eigen::VectorXd mean = llt.solve(phi.transpose() * y);
  std::normal_distribution<double> normal;
  Eigen::VectorXd e(phi.cols());
  for (Eigen::Index j = 0; j < e.size(); ++j) e(j) = normal(rng);
  // A = L L^T, so L^{-T} e has covariance A^{-1}.
  llt.matrixU().solveInPlace(e);
  return mean + std::sqrt(sigma2) * e;
}

InvGammaParams sigma2_conditional_params(const Eigen::Ref<const Eigen::VectorXd>& y,
                                         const Eigen::Ref<const Eigen::MatrixXd>& phi,
                                         const Eigen::Ref<const Eigen::VectorXd>& x,
                                         const Eigen::Ref<const Eigen::VectorXd>& inv_t2) {
  check_design(y, phi, "sample_sigma2_conditional");
  require(x.size() == phi.cols() && inv_t2.size() == phi.cols(),
          "sample_sigma2_conditional: dimension mismatch");
  const double n = static_cast<double>(y.size());
  const double d = static_cast<double>(x.size());
  InvGammaParams p;
  p.shape = 0.5 * (n - 1.0) + 0.5 * d;
  p.scale = 0.5 * (y - phi * x).squaredNorm() + 0.5 * (x.array().square() * inv_t2.array()).sum();
  if (!(p.scale > 0.0) || !(p.shape > 0.0)) {
    throw DegenerateInput("sample_sigma2_conditional: non-positive inverse-gamma parameters");
  }
  return p;
}

double sample_sigma2_conditional(const Eigen::Ref<const Eigen::VectorXd>& y,
                                 const Eigen::Ref<const Eigen::MatrixXd>& phi,
                                 const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const Eigen::Ref<const Eigen::VectorXd>& inv_t2, Rng& rng) {
  const InvGammaParams p = sigma2_conditional_params(y, phi, x, inv_t2);
  std::gamma_distribution<double> gamma(p.shape, 1.0);
  return p.scale / gamma(rng);
}

double sample_inverse_gaussian(double mean, double shape, Rng& rng) {
  require(mean > 0.0 && shape > 0.0, "sample_inverse_gaussian: parameters must be positive");
  if (std::isinf(mean)) {
    // Limit mean -> inf is the Levy distribution with scale `shape`.
    std::normal_distribution<double> normal;
    const double z = normal(rng);
    return shape / (z * z);
  }
  std::normal_distribution<double> normal;
  const double nu = normal(rng);
  const double a = mean * nu * nu / (2.0 * shape);
  // mean * (1 + a - sqrt(a^2 + 2a)), written without cancellation.
  const double x = mean / (1.0 + a + std::sqrt(a * a + 2.0 * a));
  const double u = uniform_open01(rng);
  return u <= mean / (mean + x) ? x : mean * mean / x;
}

double inverse_gaussian_cdf(double x, double mean, double shape) {
  require(mean > 0.0 && shape > 0.0, "inverse_gaussian_cdf: parameters must be positive");
  if (x <= 0.0) return 0.0;
  const double r = std::sqrt(shape / x);
  const double first = std_normal_cdf(r * (x / mean - 1.0));
  const double tail = 0.5 * std::erfc(r * (x / mean + 1.0) / std::sqrt(2.0));
  const double second = tail > 0.0 ? std::exp(2.0 * shape / mean + std::log(tail)) : 0.0;
  return std::min(1.0, first + second);
}

Eigen::VectorXd sample_invt2_conditional(const Eigen::Ref<const Eigen::VectorXd>& x,
                                         double sigma2, double lambda_pc, Rng& rng) {
  require(sigma2 > 0.0, "sample_invt2_conditional: sigma2 must be positive");
  require(lambda_pc > 0.0, "sample_invt2_conditional: lambda_pc must be positive");
  const double shape = lambda_pc * lambda_pc;
  Eigen::VectorXd out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x(j) == 0.0) {
      std::exponential_distribution<double> expo(0.5 * shape);
      double t2 = expo(rng);
      while (t2 == 0.0) t2 = expo(rng);
      out(j) = 1.0 / t2;
      continue;
    }
    const double mean = std::sqrt(shape * sigma2) / std::abs(x(j));
    double v = sample_inverse_gaussian(mean, shape, rng);
    // Guard the open support against underflow at extreme parameters.
    if (!(v > 0.0)) v = std::numeric_limits<double>::min();
    out(j) = v;
  }
  return out;
}

GibbsChain run_gibbs(const Eigen::Ref<const Eigen::VectorXd>& y,
                     const Eigen::Ref<const Eigen::MatrixXd>& phi, double lambda_pc,
                     const GibbsConfig& cfg) {
  cfg.validate();
  check_design(y, phi, "run_gibbs");
  require(lambda_pc > 0.0 && std::isfinite(lambda_pc), "run_gibbs: lambda_pc must be positive");
  const int d = static_cast<int>(phi.cols());
  const int n = static_cast<int>(phi.rows());
  Rng rng(cfg.seed);

  GibbsState s;
  if (cfg.init) {
    s = *cfg.init;
    require(s.x.size() == d && s.inv_t2.size() == d, "run_gibbs: init has wrong size");
    require((s.inv_t2.array() > 0.0).all() && s.sigma2 > 0.0,
            "run_gibbs: init must have positive inv_t2 and sigma2");
  } else {
    Eigen::MatrixXd gram = phi.transpose() * phi;
    gram.diagonal().array() += 1e-8 * std::max(1.0, gram.diagonal().maxCoeff());
    s.x = gram.llt().solve(phi.transpose() * y);
    s.inv_t2 = Eigen::VectorXd::Ones(d);
    const double rss = (y - phi * s.x).squaredNorm();
    s.sigma2 = rss > 0.0 ? rss / std::max(1, n - 1) : 1.0;
  }
  if (cfg.fix_sigma2) s.sigma2 = cfg.sigma2_fixed;

  const int kept = (cfg.iters + cfg.thin - 1) / cfg.thin;
  GibbsChain chain;
  chain.draws.resize(kept, d);
  chain.sigma2_draws.resize(kept);
  chain.mean_t2 = Eigen::VectorXd::Zero(d);
  chain.burn_in = cfg.burn_in;
  chain.thin = cfg.thin;
  chain.lambda_pc = lambda_pc;

  int row = 0;
  const int total = cfg.burn_in + cfg.iters;
  for (int it = 0; it < total; ++it) {
    s.x = sample_x_conditional(y, phi, s.inv_t2, s.sigma2, rng);
    if (!cfg.fix_sigma2) s.sigma2 = sample_sigma2_conditional(y, phi, s.x, s.inv_t2, rng);
    s.inv_t2 = sample_invt2_conditional(s.x, s.sigma2, lambda_pc, rng);
    if (!s.x.allFinite() || !std::isfinite(s.sigma2)) {
      throw NumericalError("run_gibbs: non-finite state at iteration " + std::to_string(it));
    }
    const int k = it - cfg.burn_in;
    if (k < 0) continue;
    chain.mean_t2 += s.inv_t2.cwiseInverse();
    if (k % cfg.thin == 0) {
      chain.draws.row(row) = s.x.transpose();
      chain.sigma2_draws(row) = s.sigma2;
      ++row;
    }
  }
  chain.mean_t2 /= static_cast<double>(cfg.iters);
  return chain;
}

GibbsEmResult gibbs_em_lambda(const Eigen::Ref<const Eigen::VectorXd>& y,
                              const Eigen::Ref<const Eigen::MatrixXd>& phi,
                              double lambda_init, int em_iters, const GibbsConfig& cfg) {
  require(lambda_init > 0.0, "gibbs_em_lambda: lambda_init must be positive");
  require(em_iters >= 1, "gibbs_em_lambda: em_iters must be >= 1");
  const int d = static_cast<int>(phi.cols());
  GibbsEmResult res;
  res.lambda_pc = lambda_init;
  res.trace.push_back(lambda_init);
  GibbsConfig c = cfg;
  for (int k = 0; k < em_iters; ++k) {
    c.seed = mix_seed(cfg.seed, k);
    const GibbsChain chain = run_gibbs(y, phi, res.lambda_pc, c);
    res.lambda_pc = std::sqrt(2.0 * d / chain.mean_t2.sum());
    res.trace.push_back(res.lambda_pc);
  }
  return res;
}

void write_chain_csv(const GibbsChain& chain, std::ostream& out) {
  out << "iteration,sigma2";
  for (Eigen::Index j = 0; j < chain.draws.cols(); ++j) out << ",x" << (j + 1);
  out << '\n';
  for (Eigen::Index i = 0; i < chain.draws.rows(); ++i) {
    out << (chain.burn_in + i * chain.thin) << ',' << format_double(chain.sigma2_draws(i));
    for (Eigen::Index j = 0; j < chain.draws.cols(); ++j) {
      out << ',' << format_double(chain.draws(i, j));
    }
    out << '\n';
  }
}

}  // namespace tlasso
