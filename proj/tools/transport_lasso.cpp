// transport_lasso: fit | sample | em | gibbs | path | compare
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "tlasso/compare.hpp"
#include "tlasso/dataset.hpp"
#include "tlasso/em_lambda.hpp"
#include "tlasso/errors.hpp"
#include "tlasso/format.hpp"
#include "tlasso/gibbs_baseline.hpp"
#include "tlasso/map_io.hpp"
#include "tlasso/posterior_analysis.hpp"
#include "tlasso/transport_admm.hpp"

namespace {

using namespace tlasso;

enum ExitCode { kOk = 0, kUsage = 2, kNumerical = 3, kIo = 4 };

struct Options {
  std::string data;
  std::string response = "y";
  std::uint64_t seed = 0;
  double rho = 1.0;
  int order = 3;
  int n_train = 500;
  double lambda = 1.0;
  std::string lambda_grid;
  double sigma2 = 0.5;
  double tol = 1e-4;
  double tol_res = 1e-3;
  int max_iter = 500;
  int workers = 0;
  std::string solver = "cd";
  std::string basis = "continuous";
  bool residual_balancing = false;
  std::string init = "identity";
  std::string out;
  std::string format = "csv";

  std::string trace;
  std::string map;
  int n = 10000;
  int n_samples = 10000;
  double em_tol = 1e-3;
  int em_max_iter = 25;
  bool no_warm_start = false;
  bool average = false;
  int iters = 10000;
  int burn_in = 1000;
  int thin = 1;
  double fix_sigma2 = 0.0;
  std::string sampler = "transport";
  bool estimate_optimal = false;
  int n_push = 10000;
  double lambda_pc = 0.0;
};

int resolve_workers(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("TRANSPORT_LASSO_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1) return v;
    } catch (const std::exception&) {
    }
    throw InvalidArgument("TRANSPORT_LASSO_THREADS must be a positive integer");
  }
  return 1;
}

AdmmConfig admm_config(const Options& o) {
  AdmmConfig c;
  c.rho = o.rho;
  c.max_iter = o.max_iter;
  c.tol_b = o.tol;
  c.tol_res = o.tol_res;
  c.workers = resolve_workers(o.workers);
  c.residual_balancing = o.residual_balancing;
  c.p_solver = o.solver == "girls" ? LassoSolver::kGirls : LassoSolver::kCoordinateDescent;
  c.init_mode = o.init == "random" ? InitMode::kRandom : InitMode::kIdentity;
  c.init_seed = mix_seed(o.seed, 101);
  c.validate();
  return c;
}

BasisFamily basis_family(const Options& o) {
  return o.basis == "sign" ? BasisFamily::kSignLaguerre : BasisFamily::kContinuousSignLaguerre;
}

void require_positive(double v, const char* name) {
  require(v > 0.0, std::string(name) + " must be positive");
}

std::vector<double> parse_grid(const std::string& spec) {
  require(!spec.empty(), "--lambda-grid is required");
  std::vector<double> grid;
  if (spec.find(':') != std::string::npos) {
    // lo:hi:count, log-spaced
    std::stringstream ss(spec);
    std::string a, b, c;
    std::getline(ss, a, ':');
    std::getline(ss, b, ':');
    std::getline(ss, c, ':');
    double lo = 0, hi = 0;
    int count = 0;
    try {
      lo = std::stod(a);
      hi = std::stod(b);
      count = std::stoi(c);
    } catch (const std::exception&) {
      throw InvalidArgument("--lambda-grid: expected lo:hi:count, got '" + spec + "'");
    }
    require(lo > 0.0 && hi > lo && count >= 2, "--lambda-grid: need 0 < lo < hi and count >= 2");
    for (int k = 0; k < count; ++k) {
      grid.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / (count - 1)));
    }
    return grid;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      grid.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw InvalidArgument("--lambda-grid: bad value '" + item + "'");
    }
  }
  return grid;
}

// Writes to --out or stdout. The file is only created once the payload exists.
void emit(const Options& o, const std::string& payload) {
  if (o.out.empty() || o.out == "-") {
    std::cout << payload;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw IoError("cannot write '" + o.out + "'");
  f << payload;
  if (!f) throw IoError("write failed for '" + o.out + "'");
}

Dataset load(const Options& o) {
  require(!o.data.empty(), "--data is required");
  return load_dataset(o.data, o.response);
}

int cmd_fit(const Options& o) {
  require_positive(o.lambda, "--lambda");
  require_positive(o.sigma2, "--sigma2");
  require(o.n_train >= 1, "--n-train must be >= 1");
  require(o.order >= 2, "--order must be >= 2");
  require(!o.out.empty(), "fit needs --out for the map file");
  const AdmmConfig cfg = admm_config(o);
  const Dataset ds = load(o);
  const LassoObjectiveG g(ds.design, ds.response, o.lambda, o.sigma2);
  const LaplacianPrior prior(ds.d(), g.tau());
  const PceBasis basis(prior, o.order, basis_family(o));
  const SampleBatch train = sample_laplacian(prior, o.n_train, o.seed);
  const TransportMap map = run_admm(g, train, basis, cfg);

  save_map(o.out, map, TrainingMetadata{o.n_train, o.seed, o.rho});
  if (!o.trace.empty()) {
    std::ofstream t(o.trace, std::ios::binary);
    if (!t) throw IoError("cannot write '" + o.trace + "'");
    t << "iteration,objective,primal_residual,b_change,rho\n";
    for (const IterationRecord& r : map.report.history) {
      t << r.iteration << ',' << format_double(r.objective) << ','
        << format_double(r.primal_residual) << ',' << format_double(r.b_change) << ','
        << format_double(r.rho) << '\n';
    }
  }
  std::cerr << "fit: converged=" << (map.report.converged ? "yes" : "no")
            << " iterations=" << map.report.iterations
            << " residual=" << map.report.final_residual << " basis_size=" << basis.size()
            << '\n';
  return kOk;
}

int cmd_sample(const Options& o) {
  require(o.n >= 1, "--n must be >= 1");
  require(!o.map.empty(), "--map is required");
  require(o.format == "csv" || o.format == "json", "--format must be csv or json");
  const TransportMap map = load_map(o.map);
  const Eigen::MatrixXd z = push_samples(map, o.n, o.seed, resolve_workers(o.workers));
  std::ostringstream s;
  if (o.format == "csv") {
    for (int j = 0; j < map.dim(); ++j) s << (j ? "," : "") << 'x' << (j + 1);
    s << '\n';
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      for (Eigen::Index j = 0; j < z.cols(); ++j) s << (j ? "," : "") << format_double(z(i, j));
      s << '\n';
    }
  } else {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(z.cols()));
      for (Eigen::Index c = 0; c < z.cols(); ++c) row[static_cast<std::size_t>(c)] = z(i, c);
      j.push_back(row);
    }
    s << nlohmann::json{{"samples", j}}.dump(2) << '\n';
  }
  emit(o, s.str());
  return kOk;
}

int cmd_em(const Options& o) {
  require_positive(o.sigma2, "--sigma2");
  EmConfig em;
  em.lambda_init = o.lambda;
  em.n_samples = o.n_samples;
  em.n_train = o.n_train;
  em.rel_tol = o.em_tol;
  em.max_iter = o.em_max_iter;
  em.seed = o.seed;
  em.warm_start = !o.no_warm_start;
  em.average_last_two = o.average;
  em.validate();
  const AdmmConfig cfg = admm_config(o);
  const Dataset ds = load(o);
  const LassoObjectiveG g(ds.design, ds.response, o.lambda, o.sigma2);
  const PceBasis basis(LaplacianPrior(ds.d(), 1.0), o.order, basis_family(o));
  const EmTrace trace = run_em(g, basis, cfg, em);
  std::ostringstream s;
  if (o.format == "json") {
    nlohmann::json j;
    j["lambdas"] = trace.lambdas;
    j["mean_l1"] = trace.mean_l1;
    j["admm_converged"] = trace.admm_converged;
    j["admm_iterations"] = trace.admm_iterations;
    j["converged"] = trace.converged;
    j["sigma2"] = o.sigma2;
    s << j.dump(2) << '\n';
  } else {
    s << "iteration,lambda,mean_l1,admm_converged,admm_iterations\n";
    for (std::size_t k = 0; k < trace.lambdas.size(); ++k) {
      s << k << ',' << format_double(trace.lambdas[k]) << ',';
      if (k < trace.mean_l1.size()) {
        s << format_double(trace.mean_l1[k]) << ',' << (trace.admm_converged[k] ? 1 : 0) << ','
          << trace.admm_iterations[k];
      } else {
        s << ",,";
      }
      s << '\n';
    }
  }
  emit(o, s.str());
  return kOk;
}

int cmd_gibbs(const Options& o) {
  require_positive(o.lambda, "--lambda");
  GibbsConfig gc;
  gc.iters = o.iters;
  gc.burn_in = o.burn_in;
  gc.thin = o.thin;
  gc.seed = o.seed;
  if (o.fix_sigma2 > 0.0) {
    gc.fix_sigma2 = true;
    gc.sigma2_fixed = o.fix_sigma2;
  }
  gc.validate();
  const Dataset ds = load(o);
  const GibbsChain chain = run_gibbs(ds.response, ds.design, o.lambda, gc);
  std::ostringstream s;
  write_chain_csv(chain, s);
  emit(o, s.str());
  return kOk;
}

int cmd_path(const Options& o) {
  require_positive(o.sigma2, "--sigma2");
  require(o.format == "csv" || o.format == "json", "--format must be csv or json");
  PathSampler sampler;
  if (o.sampler == "transport") sampler = PathSampler::kTransport;
  else if (o.sampler == "gibbs") sampler = PathSampler::kGibbs;
  else if (o.sampler == "lasso-point") sampler = PathSampler::kLassoPoint;
  else throw InvalidArgument("--sampler must be transport, gibbs or lasso-point");
  const std::vector<double> grid = parse_grid(o.lambda_grid);
  PathConfig pc;
  pc.admm = admm_config(o);
  pc.order = o.order;
  pc.family = basis_family(o);
  pc.n_train = o.n_train;
  pc.n_push = o.n_push;
  pc.gibbs.iters = o.iters;
  pc.gibbs.burn_in = o.burn_in;
  pc.gibbs.thin = o.thin;
  pc.gibbs.seed = mix_seed(o.seed, 7);
  pc.seed = o.seed;
  pc.estimate_optimal = o.estimate_optimal;
  pc.em.lambda_init = grid[grid.size() / 2];
  pc.em.seed = mix_seed(o.seed, 8);
  pc.em.n_train = o.n_train;
  const Dataset ds = load(o);
  const LassoObjectiveG g(ds.design, ds.response, grid.front(), o.sigma2);
  const PathResult res = lambda_sweep_path(g, grid, sampler, pc);
  std::ostringstream s;
  if (o.format == "csv") write_path_csv(res, s);
  else s << path_to_json(res) << '\n';
  emit(o, s.str());
  return kOk;
}

int cmd_compare(const Options& o) {
  require(o.format == "csv" || o.format == "json", "--format must be csv or json");
  CompareConfig cc;
  if (o.lambda_pc > 0.0) cc.lambda_pc = o.lambda_pc;
  cc.order = o.order;
  cc.family = basis_family(o);
  cc.n_train = o.n_train;
  cc.n_push = o.n_push;
  cc.admm = admm_config(o);
  cc.gibbs.iters = o.iters;
  cc.gibbs.burn_in = o.burn_in;
  cc.gibbs.thin = o.thin;
  cc.seed = o.seed;
  const Dataset ds = load(o);
  const CompareResult r = compare_samplers(ds.design, ds.response, cc);
  std::ostringstream s;
  if (o.format == "json") s << compare_to_json(r);
  else write_compare_csv(r, s);
  emit(o, s.str());
  return kOk;
}

void add_data(CLI::App* c, Options& o) {
  c->add_option("--data", o.data, "CSV with a header row");
  c->add_option("--response", o.response, "Response column name");
}

void add_fit_flags(CLI::App* c, Options& o) {
  c->add_option("--rho", o.rho, "ADMM penalty (prior-normalized units)");
  c->add_option("--order", o.order, "PCE total order");
  c->add_option("--n-train", o.n_train, "Prior samples per map fit");
  c->add_option("--tol", o.tol, "Relative B-change tolerance");
  c->add_option("--tol-res", o.tol_res, "Primal residual tolerance");
  c->add_option("--max-iter", o.max_iter, "ADMM iteration cap");
  c->add_option("--solver", o.solver, "p-update solver")->check(CLI::IsMember({"cd", "girls"}));
  c->add_option("--basis", o.basis, "Basis family")
      ->check(CLI::IsMember({"continuous", "sign"}));
  c->add_option("--init", o.init, "ADMM initialization")
      ->check(CLI::IsMember({"identity", "random"}));
  c->add_flag("--residual-balancing", o.residual_balancing, "Adapt rho during ADMM");
  c->add_option("--sigma2", o.sigma2, "Fixed noise variance (lambda = 2 tau sigma2)");
}

void diagnostic_dump(const std::string& sub, const Options& o, const std::exception& e) {
  nlohmann::json j;
  j["subcommand"] = sub;
  j["error"] = e.what();
  j["config"] = {{"data", o.data},         {"seed", o.seed},       {"rho", o.rho},
                 {"order", o.order},       {"n_train", o.n_train}, {"lambda", o.lambda},
                 {"sigma2", o.sigma2},     {"tol", o.tol},         {"tol_res", o.tol_res},
                 {"max_iter", o.max_iter}, {"solver", o.solver},   {"basis", o.basis}};
  std::cerr << "diagnostic: " << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Bayesian Lasso posterior sampling with transport maps"};
  app.set_config("--config", "", "Read options from a TOML/INI file");
  app.require_subcommand(1);
  app.add_option("--seed", o.seed, "RNG seed")->capture_default_str();
  app.add_option("--workers", o.workers, "Worker threads (default: TRANSPORT_LASSO_THREADS or 1)");
  app.add_option("--out", o.out, "Output path (default stdout)");
  app.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  app.fallthrough();

  auto* fit = app.add_subcommand("fit", "Train a transport map; writes map JSON");
  add_data(fit, o);
  add_fit_flags(fit, o);
  fit->add_option("--lambda", o.lambda, "Lasso lambda");
  fit->add_option("--trace", o.trace, "Residual trace CSV");

  auto* sample = app.add_subcommand("sample", "Push prior draws through a saved map");
  sample->add_option("--map", o.map, "Map JSON from fit");
  sample->add_option("--n", o.n, "Number of draws");

  auto* em = app.add_subcommand("em", "EM estimate of lambda with transport E-steps");
  add_data(em, o);
  add_fit_flags(em, o);
  em->add_option("--lambda", o.lambda, "Initial lambda");
  em->add_option("--n-samples", o.n_samples, "Posterior draws per E-step");
  em->add_option("--em-tol", o.em_tol, "Relative lambda change to stop");
  em->add_option("--em-max-iter", o.em_max_iter, "EM iteration cap");
  em->add_flag("--no-warm-start", o.no_warm_start, "Refit each map from identity");
  em->add_flag("--average", o.average, "Average the last two lambda iterates");

  auto* gibbs = app.add_subcommand("gibbs", "Park-Casella Gibbs chain");
  add_data(gibbs, o);
  gibbs->add_option("--lambda", o.lambda, "Park-Casella lambda (prior rate lambda/sigma)");
  gibbs->add_option("--iters", o.iters, "Kept iterations");
  gibbs->add_option("--burn-in", o.burn_in, "Discarded iterations");
  gibbs->add_option("--thin", o.thin, "Thinning");
  gibbs->add_option("--fix-sigma2", o.fix_sigma2, "Hold sigma2 fixed at this value");

  auto* path = app.add_subcommand("path", "Medians and intervals over a lambda grid");
  add_data(path, o);
  add_fit_flags(path, o);
  path->add_option("--lambda-grid", o.lambda_grid, "Comma list or lo:hi:count (log-spaced)");
  path->add_option("--sampler", o.sampler, "transport | gibbs | lasso-point");
  path->add_flag("--estimate-optimal", o.estimate_optimal, "Annotate with cv / em / gibbs-em");
  path->add_option("--n-push", o.n_push, "Transport draws per grid point");
  path->add_option("--iters", o.iters, "Gibbs kept iterations");
  path->add_option("--burn-in", o.burn_in, "Gibbs burn-in");
  path->add_option("--thin", o.thin, "Gibbs thinning");

  auto* compare = app.add_subcommand("compare", "Transport vs Gibbs at a matched penalty");
  add_data(compare, o);
  add_fit_flags(compare, o);
  compare->add_option("--lambda", o.lambda_pc,
                      "Park-Casella lambda; estimated by Gibbs MCEM when omitted");
  compare->add_option("--n-push", o.n_push, "Transport draws");
  compare->add_option("--iters", o.iters, "Gibbs kept iterations");
  compare->add_option("--burn-in", o.burn_in, "Gibbs burn-in");
  compare->add_option("--thin", o.thin, "Gibbs thinning");

  CLI11_PARSE(app, argc, argv);

  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    if (sub == "fit") return cmd_fit(o);
    if (sub == "sample") return cmd_sample(o);
    if (sub == "em") return cmd_em(o);
    if (sub == "gibbs") return cmd_gibbs(o);
    if (sub == "path") return cmd_path(o);
    if (sub == "compare") return cmd_compare(o);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    diagnostic_dump(sub, o, e);
    return kNumerical;
  }
  return kUsage;
}
