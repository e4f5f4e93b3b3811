#include "tlasso/compare.hpp"

#include <cmath>
#include <ostream>

#include <json.hpp>

#include "tlasso/errors.hpp"
#include "tlasso/format.hpp"
#include "tlasso/random.hpp"

namespace tlasso {

namespace {

Eigen::VectorXd column_sd(const Eigen::MatrixXd& s) {
  const Eigen::RowVectorXd mean = s.colwise().mean();
  return ((s.rowwise() - mean).array().square().colwise().sum() /
          static_cast<double>(s.rows() - 1))
      .sqrt()
      .transpose();
}

std::vector<double> to_vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::json rows(const Eigen::MatrixXd& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_vec(m.row(i).transpose()));
  return out;
}

}  // namespace

double unbiased_sigma2(const Eigen::Ref<const Eigen::MatrixXd>& phi,
                       const Eigen::Ref<const Eigen::VectorXd>& y) {
  const Eigen::Index n = phi.rows();
  const Eigen::Index d = phi.cols();
  require(y.size() == n, "unbiased_sigma2: phi rows must match y length");
  require(n > d + 1, "unbiased_sigma2: need n > d + 1");
  const Eigen::VectorXd beta = phi.colPivHouseholderQr().solve(y);
  const double rss = (y - phi * beta).squaredNorm();
  if (!(rss > 0.0)) throw DegenerateInput("unbiased_sigma2: exact fit, zero residual");
  return rss / static_cast<double>(n - d - 1);
}

CompareResult compare_samplers(const Eigen::Ref<const Eigen::MatrixXd>& phi,
                               const Eigen::Ref<const Eigen::VectorXd>& y,
                               const CompareConfig& cfg) {
  require(cfg.n_push >= 2, "compare: n_push must be >= 2");
  require(cfg.kde_points >= 2, "compare: kde_points must be >= 2");
  const int d = static_cast<int>(phi.cols());
  CompareResult r;
  if (cfg.lambda_pc) {
    require(*cfg.lambda_pc > 0.0, "compare: lambda_pc must be positive");
    r.lambda_pc = *cfg.lambda_pc;
  } else {
    GibbsConfig em_chain = cfg.gibbs_em_chain;
    em_chain.seed = mix_seed(cfg.seed, 1);
    r.lambda_pc = gibbs_em_lambda(y, phi, cfg.gibbs_em_init, cfg.gibbs_em_iters, em_chain).lambda_pc;
    r.lambda_estimated = true;
  }
  r.sigma2_hat = unbiased_sigma2(phi, y);
  r.tau = r.lambda_pc / std::sqrt(r.sigma2_hat);
  r.lambda = 2.0 * r.tau * r.sigma2_hat;

  const LassoObjectiveG g(phi, y, r.lambda, r.sigma2_hat);
  const LaplacianPrior prior(d, g.tau());
  const PceBasis basis(prior, cfg.order, cfg.family);
  const SampleBatch train = sample_laplacian(prior, cfg.n_train, mix_seed(cfg.seed, 2));
  const TransportMap map = run_admm(g, train, basis, cfg.admm);
  r.fit = map.report;
  const Eigen::MatrixXd zt = push_samples(map, cfg.n_push, mix_seed(cfg.seed, 3), cfg.admm.workers);

  GibbsConfig gc = cfg.gibbs;
  gc.seed = mix_seed(cfg.seed, 4);
  const GibbsChain chain = run_gibbs(y, phi, r.lambda_pc, gc);
  require(chain.draws.rows() >= 2, "compare: Gibbs chain needs at least two draws");

  r.transport = summarize(zt, r.lambda, cfg.level);
  r.gibbs = summarize(chain.draws, r.lambda_pc, cfg.level);
  r.transport_sd = column_sd(zt);
  r.gibbs_sd = column_sd(chain.draws);
  r.gibbs_sigma2_mean = chain.sigma2_draws.mean();
  r.median_gap_sd =
      (r.transport.medians - r.gibbs.medians).cwiseAbs().cwiseQuotient(r.gibbs_sd);
  for (int j = 0; j < d; ++j) {
    const double wt = r.transport.ci_high(j) - r.transport.ci_low(j);
    const double wg = r.gibbs.ci_high(j) - r.gibbs.ci_low(j);
    if (wt <= wg) ++r.narrower_count;
  }

  r.kde_grid.resize(d, cfg.kde_points);
  r.kde_transport.resize(d, cfg.kde_points);
  r.kde_gibbs.resize(d, cfg.kde_points);
  for (int j = 0; j < d; ++j) {
    const double lo = std::min(zt.col(j).minCoeff(), chain.draws.col(j).minCoeff());
    const double hi = std::max(zt.col(j).maxCoeff(), chain.draws.col(j).maxCoeff());
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(cfg.kde_points, lo, hi);
    r.kde_grid.row(j) = grid.transpose();
    r.kde_transport.row(j) = kde(zt.col(j), grid).transpose();
    r.kde_gibbs.row(j) = kde(chain.draws.col(j), grid).transpose();
  }
  return r;
}

std::string compare_to_json(const CompareResult& r) {
  nlohmann::json j;
  j["conventions"] = {
      {"lambda_pc", r.lambda_pc},
      {"lambda_pc_estimated", r.lambda_estimated},
      {"sigma2_fixed", r.sigma2_hat},
      {"tau", r.tau},
      {"lambda", r.lambda},
      {"note", "gibbs prior rate is lambda_pc/sigma with sigma random; transport uses "
               "tau = lambda_pc/sqrt(sigma2_fixed) and lambda = 2 tau sigma2_fixed"}};
  j["fit"] = {{"converged", r.fit.converged},
              {"iterations", r.fit.iterations},
              {"final_residual", r.fit.final_residual}};
  auto summary = [](const PosteriorSummary& s, const Eigen::VectorXd& sd) {
    return nlohmann::json{{"median", to_vec(s.medians)},
                          {"ci_low", to_vec(s.ci_low)},
                          {"ci_high", to_vec(s.ci_high)},
                          {"sd", to_vec(sd)},
                          {"n_samples", s.n_samples}};
  };
  j["transport"] = summary(r.transport, r.transport_sd);
  j["gibbs"] = summary(r.gibbs, r.gibbs_sd);
  j["gibbs"]["sigma2_mean"] = r.gibbs_sigma2_mean;
  j["median_gap_sd"] = to_vec(r.median_gap_sd);
  j["transport_ci_no_wider_count"] = r.narrower_count;
  j["kde"] = {{"grid", rows(r.kde_grid)},
              {"transport", rows(r.kde_transport)},
              {"gibbs", rows(r.kde_gibbs)}};
  return j.dump(2) + "\n";
}

void write_compare_csv(const CompareResult& r, std::ostream& out) {
  out << "coordinate,transport_median,transport_ci_low,transport_ci_high,transport_sd,"
         "gibbs_median,gibbs_ci_low,gibbs_ci_high,gibbs_sd,median_gap_sd\n";
  for (Eigen::Index j = 0; j < r.transport.medians.size(); ++j) {
    out << (j + 1) << ',' << format_double(r.transport.medians(j)) << ','
        << format_double(r.transport.ci_low(j)) << ',' << format_double(r.transport.ci_high(j))
        << ',' << format_double(r.transport_sd(j)) << ',' << format_double(r.gibbs.medians(j))
        << ',' << format_double(r.gibbs.ci_low(j)) << ',' << format_double(r.gibbs.ci_high(j))
        << ',' << format_double(r.gibbs_sd(j)) << ',' << format_double(r.median_gap_sd(j))
        << '\n';
  }
}

}  // namespace tlasso
