#include "tlasso/posterior_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "tlasso/errors.hpp"
#include "tlasso/format.hpp"
#include "tlasso/lasso_solvers.hpp"
#include "tlasso/parallel.hpp"
#include "tlasso/random.hpp"

namespace tlasso {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> sorted_column(const Eigen::Ref<const Eigen::MatrixXd>& m, Eigen::Index j) {
  std::vector<double> v(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) v[i] = m(i, j);
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

Eigen::MatrixXd push_samples(const TransportMap& map, int n, std::uint64_t seed,
                             int workers) {
  require(n >= 1, "push_samples: n must be >= 1");
  const SampleBatch xs = sample_laplacian(map.basis.prior(), n, seed);
  return map.apply_rows(xs.samples, workers);
}

Eigen::VectorXd componentwise_median(const Eigen::Ref<const Eigen::MatrixXd>& samples) {
  require(samples.rows() >= 1, "componentwise_median: need at least one sample");
  Eigen::VectorXd out(samples.cols());
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const std::vector<double> v = sorted_column(samples, j);
    const std::size_t n = v.size();
    out(j) = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  }
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  require(!sorted.empty(), "quantile_sorted: empty input");
  require(p >= 0.0 && p <= 1.0, "quantile_sorted: p must lie in [0, 1]");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

CredibleIntervals credible_intervals(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                     double level) {
  require(level > 0.0 && level < 1.0, "credible_intervals: level must lie in (0, 1)");
  require(samples.rows() >= 1, "credible_intervals: need at least one sample");
  const double tail = 0.5 * (1.0 - level);
  CredibleIntervals ci{Eigen::VectorXd(samples.cols()), Eigen::VectorXd(samples.cols())};
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const std::vector<double> v = sorted_column(samples, j);
    ci.low(j) = quantile_sorted(v, tail);
    ci.high(j) = quantile_sorted(v, 1.0 - tail);
  }
  return ci;
}

double silverman_bandwidth(const Eigen::Ref<const Eigen::VectorXd>& samples) {
  const Eigen::Index n = samples.size();
  require(n >= 2, "kde: need at least two samples");
  const double mean = samples.mean();
  const double sd = std::sqrt((samples.array() - mean).square().sum() / (n - 1));
  if (!(sd > 0.0)) throw DegenerateInput("kde: samples have zero variance");
  return 1.06 * sd * std::pow(static_cast<double>(n), -0.2);
}

Eigen::VectorXd kde(const Eigen::Ref<const Eigen::VectorXd>& samples,
                    const Eigen::Ref<const Eigen::VectorXd>& grid) {
  const double h = silverman_bandwidth(samples);
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * M_PI));
  Eigen::VectorXd out(grid.size());
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    out(g) = ((samples.array() - grid(g)) / h).square().unaryExpr([](double z) {
      return std::exp(-0.5 * z);
    }).sum() * norm;
  }
  return out;
}

PosteriorSummary summarize(const Eigen::Ref<const Eigen::MatrixXd>& samples, double lambda,
                           double level) {
  PosteriorSummary s;
  s.medians = componentwise_median(samples);
  const CredibleIntervals ci = credible_intervals(samples, level);
  s.ci_low = ci.low;
  s.ci_high = ci.high;
  s.n_samples = static_cast<int>(samples.rows());
  s.lambda = lambda;
  return s;
}

std::string to_string(PathSampler s) {
  switch (s) {
    case PathSampler::kTransport: return "transport";
    case PathSampler::kGibbs: return "gibbs";
    case PathSampler::kLassoPoint: return "lasso-point";
  }
  return "unknown";
}

std::string to_string(LambdaMethod m) {
  switch (m) {
    case LambdaMethod::kNone: return "none";
    case LambdaMethod::kCv: return "cv";
    case LambdaMethod::kEm: return "em";
    case LambdaMethod::kGibbsEm: return "gibbs-em";
  }
  return "unknown";
}

double cv_lasso_lambda(const Eigen::Ref<const Eigen::MatrixXd>& phi,
                       const Eigen::Ref<const Eigen::VectorXd>& y,
                       const std::vector<double>& grid, int folds, std::uint64_t seed) {
  const int n = static_cast<int>(phi.rows());
  require(y.size() == n, "cv_lasso_lambda: phi rows must match y length");
  require(!grid.empty(), "cv_lasso_lambda: empty grid");
  require(folds >= 2 && folds <= n, "cv_lasso_lambda: folds must lie in [2, n]");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(std::uniform_int_distribution<int>(0, i)(rng));
    std::swap(perm[i], perm[j]);
  }
  std::vector<double> err(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train, test;
    for (int i = 0; i < n; ++i) (i % folds == f ? test : train).push_back(perm[i]);
    LassoProblem prob;
    prob.design = phi(train, Eigen::all);
    prob.response = y(train);
    std::optional<Eigen::VectorXd> warm;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      prob.l1_weight = grid[k];
      const LassoSolution sol = coordinate_descent_lasso(prob, 1e-10, 100000, warm);
      warm = sol.x;
      err[k] += (y(test) - phi(test, Eigen::all) * sol.x).squaredNorm();
    }
  }
  const auto best = std::min_element(err.begin(), err.end());
  return grid[static_cast<std::size_t>(best - err.begin())];
}

PathResult lambda_sweep_path(const LassoObjectiveG& g_template,
                             const std::vector<double>& lambda_grid, PathSampler sampler,
                             const PathConfig& cfg) {
  require(!lambda_grid.empty(), "lambda_sweep_path: empty grid");
  for (std::size_t k = 0; k < lambda_grid.size(); ++k) {
    require(lambda_grid[k] > 0.0 && std::isfinite(lambda_grid[k]),
            "lambda_sweep_path: grid values must be positive");
    if (k > 0) {
      require(lambda_grid[k] > lambda_grid[k - 1],
              "lambda_sweep_path: grid must be strictly increasing");
    }
  }
  require(cfg.level > 0.0 && cfg.level < 1.0, "lambda_sweep_path: level must lie in (0, 1)");
  const int d = g_template.dim();
  const int m = static_cast<int>(lambda_grid.size());
  const double sigma = std::sqrt(g_template.sigma2);

  PathResult res;
  res.sampler = sampler;
  res.sigma2 = g_template.sigma2;
  res.lambda_grid = Eigen::Map<const Eigen::VectorXd>(lambda_grid.data(), m);
  res.lambda_pc.resize(m);
  res.medians_by_lambda = Eigen::MatrixXd::Constant(m, d, kNaN);
  res.ci_low = res.medians_by_lambda;
  res.ci_high = res.medians_by_lambda;
  res.errors.assign(m, "");

  // Sequential so that each transport fit can start from its neighbor's map.
  std::optional<Eigen::MatrixXd> warm;
  double warm_rate = 0.0;
  std::optional<Eigen::VectorXd> warm_point;
  for (int k = 0; k < m; ++k) {
    const LassoObjectiveG g = g_template.with_lambda(lambda_grid[k]);
    res.lambda_pc(k) = g.tau() * sigma;
    try {
      Eigen::MatrixXd draws;
      switch (sampler) {
        case PathSampler::kLassoPoint: {
          LassoProblem prob{g.phi, g.y, g.lambda};
          const LassoSolution sol = coordinate_descent_lasso(prob, 1e-12, 100000, warm_point);
          warm_point = sol.x;
          draws = sol.x.transpose();
          break;
        }
        case PathSampler::kTransport: {
          const LaplacianPrior prior(d, g.tau());
          const PceBasis basis(prior, cfg.order, cfg.family);
          const SampleBatch train = sample_laplacian(prior, cfg.n_train, mix_seed(cfg.seed, 2 * k));
          std::optional<Eigen::MatrixXd> start;
          if (warm) start = *warm * (warm_rate / prior.rate);
          const TransportMap map = run_admm(g, train, basis, cfg.admm, start);
          warm = map.coeffs;
          warm_rate = prior.rate;
          if (!map.report.converged) {
            res.errors[k] = "ADMM did not converge in " + std::to_string(map.report.iterations) +
                            " iterations";
          }
          draws = push_samples(map, cfg.n_push, mix_seed(cfg.seed, 2 * k + 1), cfg.admm.workers);
          break;
        }
        case PathSampler::kGibbs: {
          GibbsConfig gc = cfg.gibbs;
          gc.seed = mix_seed(cfg.gibbs.seed, k);
          draws = run_gibbs(g.y, g.phi, res.lambda_pc(k), gc).draws;
          break;
        }
      }
      const PosteriorSummary s = summarize(draws, g.lambda, cfg.level);
      res.medians_by_lambda.row(k) = s.medians.transpose();
      res.ci_low.row(k) = s.ci_low.transpose();
      res.ci_high.row(k) = s.ci_high.transpose();
    } catch (const std::exception& e) {
      res.errors[k] = e.what();
    }
  }

  if (cfg.estimate_optimal) {
    switch (sampler) {
      case PathSampler::kLassoPoint:
        res.method = LambdaMethod::kCv;
        res.optimal_lambda = cv_lasso_lambda(g_template.phi, g_template.y, lambda_grid,
                                             cfg.cv_folds, cfg.seed);
        break;
      case PathSampler::kTransport: {
        res.method = LambdaMethod::kEm;
        const PceBasis basis(LaplacianPrior(d, 1.0), cfg.order, cfg.family);
        const EmTrace trace = run_em(g_template, basis, cfg.admm, cfg.em);
        res.optimal_lambda = trace.lambdas.back();
        break;
      }
      case PathSampler::kGibbs: {
        res.method = LambdaMethod::kGibbsEm;
        const GibbsEmResult em = gibbs_em_lambda(g_template.y, g_template.phi,
                                                 cfg.gibbs_em_init, cfg.gibbs_em_iters, cfg.gibbs);
        res.optimal_lambda_pc = em.lambda_pc;
        break;
      }
    }
    // Both conventions, related through the fixed sigma2 of the objective.
    if (res.optimal_lambda && !res.optimal_lambda_pc) {
      res.optimal_lambda_pc = *res.optimal_lambda / (2.0 * g_template.sigma2) * sigma;
    } else if (res.optimal_lambda_pc && !res.optimal_lambda) {
      res.optimal_lambda = *res.optimal_lambda_pc / sigma * 2.0 * g_template.sigma2;
    }
  }
  return res;
}

void write_path_csv(const PathResult& path, std::ostream& out) {
  out << "sampler,lambda,lambda_pc,coordinate,median,ci_low,ci_high,error\n";
  for (Eigen::Index k = 0; k < path.lambda_grid.size(); ++k) {
    for (Eigen::Index j = 0; j < path.medians_by_lambda.cols(); ++j) {
      out << to_string(path.sampler) << ',' << format_double(path.lambda_grid(k)) << ','
          << format_double(path.lambda_pc(k)) << ',' << (j + 1) << ','
          << format_double(path.medians_by_lambda(k, j)) << ','
          << format_double(path.ci_low(k, j)) << ',' << format_double(path.ci_high(k, j)) << ','
          << csv_field(path.errors[k]) << '\n';
    }
  }
}

namespace {

nlohmann::json nullable(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json rows_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(nullable(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::string path_to_json(const PathResult& path) {
  nlohmann::json j;
  j["sampler"] = to_string(path.sampler);
  j["sigma2"] = path.sigma2;
  j["lambda_grid"] = std::vector<double>(path.lambda_grid.data(),
                                         path.lambda_grid.data() + path.lambda_grid.size());
  j["lambda_pc"] = std::vector<double>(path.lambda_pc.data(),
                                       path.lambda_pc.data() + path.lambda_pc.size());
  j["medians"] = rows_json(path.medians_by_lambda);
  j["ci_low"] = rows_json(path.ci_low);
  j["ci_high"] = rows_json(path.ci_high);
  j["errors"] = path.errors;
  j["optimal"] = {
      {"method", to_string(path.method)},
      {"lambda", path.optimal_lambda ? nlohmann::json(*path.optimal_lambda) : nlohmann::json()},
      {"lambda_pc",
       path.optimal_lambda_pc ? nlohmann::json(*path.optimal_lambda_pc) : nlohmann::json()},
  };
  return j.dump(2);
}

}  // namespace tlasso
