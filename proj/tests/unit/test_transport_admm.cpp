#include <doctest.h>

#include <cmath>

#include "../oracles.hpp"
#include "tlasso/errors.hpp"
#include "tlasso/transport_admm.hpp"

using namespace tlasso;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

TrainingTables random_tables(int n, int K, int d, Rng& rng) {
  TrainingTables t;
  t.n_samples = n;
  t.dim = d;
  t.a = random_matrix(K, n, rng);
  t.j = random_matrix(K, n * d, rng);
  return t;
}

AdmmState random_state(const TrainingTables& t, double rho, Rng& rng) {
  const int n = t.n_samples, d = t.dim, K = t.basis_size();
  AdmmState s;
  s.rho = rho;
  s.b = random_matrix(d, K, rng);
  for (int i = 0; i < n; ++i) {
    s.f.push_back(random_matrix(d, K, rng));
    s.alpha.push_back(random_matrix(d, K, rng));
  }
  s.z = random_matrix(d, n * d, rng);
  s.beta = random_matrix(d, n * d, rng);
  s.p = random_matrix(d, n, rng);
  s.gamma = random_matrix(d, n, rng);
  s.m = precompute_M(t, rho);
  return s;
}

// Straight-line form of the consensus step.
Eigen::MatrixXd naive_update_B(const AdmmState& s, const TrainingTables& t) {
  const int d = t.dim, K = t.basis_size(), n = t.n_samples;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(d, K);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd a = t.a.col(i);
    const Eigen::MatrixXd j = t.j.middleCols(i * d, d);
    const Eigen::MatrixXd z = s.z.middleCols(i * d, d);
    const Eigen::MatrixXd beta = s.beta.middleCols(i * d, d);
    sum += s.rho * (s.f[i] + s.p.col(i) * a.transpose() + z * j.transpose()) +
           s.gamma.col(i) * a.transpose() + beta * j.transpose() + s.alpha[i];
  }
  return (sum / n) * s.m;
}

LassoObjectiveG zero_design_problem(int d) {
  return LassoObjectiveG(Eigen::MatrixXd::Zero(3, d), Eigen::VectorXd::Zero(3), 1.0, 0.5);
}

// One full sweep of the ADMM updates through the public step functions.
void manual_iteration(AdmmState& s, const TrainingTables& t, const LassoObjectiveG& g) {
  s.b = update_B(s, t);
  const PUpdateFactor factor(g, s.rho);
  for (int i = 0; i < t.n_samples; ++i) {
    s.f[i] = update_F(s.alpha[i], s.b, s.rho);
    s.z_i(i) = update_Z(s.b, t.j_i(i), s.beta_i(i), s.rho);
    s.p.col(i) = solve_p_update(factor.build(s.b * t.a_i(i), s.gamma.col(i)),
                                LassoSolver::kCoordinateDescent, Eigen::VectorXd(s.p.col(i)));
    DualBlock duals{s.gamma.col(i), s.beta_i(i), s.alpha[i]};
    duals = update_duals(duals, s.p.col(i), s.z_i(i), s.f[i], s.b, t.a_i(i), t.j_i(i), s.rho);
    s.gamma.col(i) = duals.gamma;
    s.beta_i(i) = duals.beta;
    s.alpha[i] = duals.alpha;
  }
}

}  // namespace

TEST_CASE("precompute_M") {
  TrainingTables zero;
  zero.n_samples = 1;
  zero.dim = 1;
  zero.a = Eigen::MatrixXd::Zero(4, 1);
  zero.j = Eigen::MatrixXd::Zero(4, 1);
  CHECK((precompute_M(zero, 2.0) - 0.5 * Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-15);

  Rng rng(1);
  const auto t = random_tables(3, 4, 2, rng);
  for (double rho : {0.3, 1.0, 5.0}) {
    const Eigen::MatrixXd m = precompute_M(t, rho);
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(4, 4);
    for (int i = 0; i < 3; ++i) {
      system += (t.a.col(i) * t.a.col(i).transpose() +
                 t.j.middleCols(i * 2, 2) * t.j.middleCols(i * 2, 2).transpose()) / 3.0;
    }
    system *= rho;
    CHECK((m * system - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::VectorXd ev = m.selfadjointView<Eigen::Lower>().eigenvalues();
    CHECK(ev.minCoeff() > 0.0);
    CHECK(ev.maxCoeff() <= 1.0 / rho * (1 + 1e-12));
  }
  CHECK_THROWS_AS(precompute_M(t, 0.0), InvalidArgument);
}

TEST_CASE("update_B") {
  Rng rng(2);
  // Collapsed case: A = 0, J = 0, zero duals gives B = F_1.
  TrainingTables zero;
  zero.n_samples = 1;
  zero.dim = 2;
  zero.a = Eigen::MatrixXd::Zero(3, 1);
  zero.j = Eigen::MatrixXd::Zero(3, 2);
  AdmmState s = random_state(zero, 1.7, rng);
  s.alpha[0].setZero();
  s.gamma.setZero();
  s.beta.setZero();
  CHECK((update_B(s, zero) - s.f[0]).cwiseAbs().maxCoeff() < 1e-12);

  // Random instance against the straight-line formula, several worker counts.
  for (int K : {4, 70, 150}) {
    const auto t = random_tables(37, K, 2, rng);
    const AdmmState r = random_state(t, 1.3, rng);
    const Eigen::MatrixXd ref = naive_update_B(r, t);
    const Eigen::MatrixXd b1 = update_B(r, t, 1);
    CHECK((b1 - ref).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
    CHECK((update_B(r, t, 3).array() == b1.array()).all());
    CHECK((update_B(r, t, 4).array() == b1.array()).all());
  }

  // Consensus fixed point: F_i = B, p_i = B A_i, Z_i = B J_i, zero duals.
  const auto t = random_tables(5, 6, 2, rng);
  AdmmState c = random_state(t, 0.8, rng);
  for (int i = 0; i < 5; ++i) {
    c.f[i] = c.b;
    c.alpha[i].setZero();
    c.z_i(i) = c.b * t.j_i(i);
  }
  c.p = c.b * t.a;
  c.gamma.setZero();
  c.beta.setZero();
  CHECK((update_B(c, t) - c.b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("update_F") {
  Rng rng(3);
  const Eigen::MatrixXd b = random_matrix(2, 5, rng);
  CHECK((update_F(Eigen::MatrixXd::Zero(2, 5), b, 2.0) - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK(update_F(b, b, 1.0).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::MatrixXd alpha = random_matrix(2, 5, rng);
  CHECK((update_F(alpha, b, 0.7) - (b - alpha / 0.7)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("update_Z: closed form and stationarity") {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  CHECK(update_Z(Eigen::MatrixXd::Zero(1, 1), one, Eigen::MatrixXd::Zero(1, 1), 1.0)(0, 0) ==
        doctest::Approx(1.0));
  CHECK(update_Z(1.5 * one, one, Eigen::MatrixXd::Zero(1, 1), 1.0)(0, 0) == doctest::Approx(2.0));
  // Strongly negative W: the root must stay positive and accurate.
  const double z_neg = update_Z(-1e8 * one, one, Eigen::MatrixXd::Zero(1, 1), 1.0)(0, 0);
  CHECK(z_neg > 0.0);
  // Stationarity of -log z + (z + 1e8)^2 / 2, scaled to avoid cancellation.
  CHECK(std::abs(z_neg * (z_neg + 1e8) - 1.0) < 1e-8);

  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const double rho = trial % 2 ? 2.0 : 0.25 + 4.0 * uniform_open01(rng);
    const Eigen::MatrixXd b = random_matrix(3, 7, rng);
    const Eigen::MatrixXd j = random_matrix(7, 3, rng);
    const Eigen::MatrixXd beta = random_matrix(3, 3, rng);
    const Eigen::MatrixXd z = update_Z(b, j, beta, rho);
    const Eigen::MatrixXd w_raw = b * j - beta / rho;
    const Eigen::MatrixXd w = 0.5 * (w_raw + w_raw.transpose());
    CHECK((z - z.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(z.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() > 0.0);
    const Eigen::MatrixXd grad = -z.inverse() + rho * (z - w);
    CHECK(grad.cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("update_duals") {
  Rng rng(5);
  const Eigen::MatrixXd b = random_matrix(2, 4, rng);
  const Eigen::VectorXd a = random_matrix(4, 1, rng).col(0);
  const Eigen::MatrixXd j = random_matrix(4, 2, rng);
  DualBlock duals{random_matrix(2, 1, rng).col(0), random_matrix(2, 2, rng), random_matrix(2, 4, rng)};

  const DualBlock same = update_duals(duals, b * a, b * j, b, b, a, j, 3.0);
  CHECK((same.gamma - duals.gamma).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((same.beta - duals.beta).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((same.alpha - duals.alpha).cwiseAbs().maxCoeff() < 1e-14);

  const Eigen::VectorXd v(Eigen::Vector2d(0.3, -1.2));
  CHECK((update_duals(duals, b * a + v, b * j, b, b, a, j, 1.0).gamma - (duals.gamma + v))
            .cwiseAbs()
            .maxCoeff() < 1e-14);

  const Eigen::VectorXd p = random_matrix(2, 1, rng).col(0);
  const Eigen::MatrixXd z = random_matrix(2, 2, rng);
  const Eigen::MatrixXd f = random_matrix(2, 4, rng);
  const double rho = 0.6;
  const DualBlock out = update_duals(duals, p, z, f, b, a, j, rho);
  CHECK((out.gamma - (duals.gamma + rho * (p - b * a))).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((out.beta - (duals.beta + rho * (z - b * j))).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((out.alpha - (duals.alpha + rho * (f - b))).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("empirical objective") {
  const LaplacianPrior prior(1, 1.0);
  const PceBasis basis(prior, 3, BasisFamily::kContinuousSignLaguerre);
  const auto batch = sample_laplacian(prior, 200, 3);
  const auto tables = TrainingTables::build(basis, batch);
  const auto g = zero_design_problem(1);
  const Eigen::MatrixXd id = basis.identity_coefficients();

  // Phi = 0: g(x) = tau |x| = -log p(x) + log(tau / 2).
  const auto obj = empirical_objective(id, g, tables);
  CHECK(obj.feasible);
  double neg_log_p = 0.0;
  for (int i = 0; i < batch.size(); ++i) neg_log_p -= prior.log_density(batch.samples.row(i).transpose());
  neg_log_p /= batch.size();
  CHECK(obj.value == doctest::Approx(neg_log_p + std::log(0.5)).epsilon(1e-12));

  // Duplicated samples leave the average unchanged.
  SampleBatch doubled = batch;
  doubled.samples.resize(400, 1);
  doubled.samples << batch.samples, batch.samples;
  const auto tables2 = TrainingTables::build(basis, doubled);
  Rng rng(6);
  const Eigen::MatrixXd b = id + 0.05 * random_matrix(1, basis.size(), rng);
  CHECK(empirical_objective(b, g, tables2).value ==
        doctest::Approx(empirical_objective(b, g, tables).value).epsilon(1e-12));

  // Term-by-term accumulation on a regression problem, d = 2.
  const LaplacianPrior p2(2, 0.8);
  const PceBasis b2(p2, 2);
  const auto batch2 = sample_laplacian(p2, 30, 8);
  const auto t2 = TrainingTables::build(b2, batch2);
  const LassoObjectiveG g2(random_matrix(6, 2, rng), random_matrix(6, 1, rng).col(0), 0.8 * 2 * 0.7, 0.7);
  const Eigen::MatrixXd coeffs = b2.identity_coefficients() + 0.02 * random_matrix(2, b2.size(), rng);
  double acc = 0.0;
  bool ok = true;
  for (int i = 0; i < batch2.size(); ++i) {
    const Eigen::VectorXd x = batch2.samples.row(i).transpose();
    const Eigen::VectorXd s = coeffs * b2.evaluate(x);
    const double det = (coeffs * b2.jacobian(x)).determinant();
    ok = ok && det > 0;
    acc += (g2.y - g2.phi * s).squaredNorm() / (2 * g2.sigma2) + g2.tau() * s.lpNorm<1>() - std::log(det);
  }
  REQUIRE(ok);
  CHECK(empirical_objective(coeffs, g2, t2).value == doctest::Approx(acc / batch2.size()).epsilon(1e-12));

  // Negated map: every determinant negative.
  const auto bad = empirical_objective(-id, g, tables);
  CHECK_FALSE(bad.feasible);
  CHECK(std::isinf(bad.value));
  CHECK(bad.nonpositive_dets == batch.size());
}

TEST_CASE("transport map application") {
  const LaplacianPrior prior(2, 1.5);
  const PceBasis basis(prior, 3, BasisFamily::kContinuousSignLaguerre);
  TransportMap map{basis.identity_coefficients(), basis};
  const auto xs = sample_laplacian(prior, 50, 9);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd x = xs.samples.row(i).transpose();
    CHECK((apply_map(map, x) - x).cwiseAbs().maxCoeff() < 1e-14);
  }
  CHECK((map.apply_rows(xs.samples) - xs.samples).cwiseAbs().maxCoeff() < 1e-14);

  map.coeffs.setZero();
  CHECK(map.apply_rows(xs.samples).cwiseAbs().maxCoeff() == 0.0);

  Rng rng(10);
  map.coeffs = random_matrix(2, basis.size(), rng);
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd x = xs.samples.row(i).transpose();
    Eigen::VectorXd ref = Eigen::VectorXd::Zero(2);
    for (int k = 0; k < basis.size(); ++k) {
      const auto& idx = basis.indices()[k];
      double phi_k = 1.0;
      for (int c = 0; c < 2; ++c) phi_k *= basis.factor(idx.degrees[c], idx.parities[c], x(c));
      ref += map.coeffs.col(k) * phi_k;
    }
    CHECK((map.apply(x) - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK((map.apply_rows(xs.samples, 1).array() == map.apply_rows(xs.samples, 4).array()).all());
  CHECK_THROWS_AS(map.apply(Eigen::VectorXd::Zero(3)), InvalidArgument);
}

TEST_CASE("jacobian-equation residual") {
  const LaplacianPrior prior(1, 1.0);
  const PceBasis basis(prior, 3, BasisFamily::kContinuousSignLaguerre);
  const auto g = zero_design_problem(1);
  const auto xs = sample_laplacian(prior, 1000, 12);
  TransportMap map{basis.identity_coefficients(), basis, g.lambda, g.sigma2};
  const auto exact = jacobian_equation_residual(map, g, xs);
  CHECK(oracle::sample_sd(exact.r) < 1e-10);

  double prev = oracle::sample_sd(exact.r);
  Rng rng(13);
  const Eigen::MatrixXd direction = random_matrix(1, basis.size(), rng);
  for (double eps : {0.01, 0.03, 0.1}) {
    TransportMap bent = map;
    bent.coeffs += eps * direction;
    const auto res = jacobian_equation_residual(bent, g, xs);
    std::vector<double> valid;
    for (int i = 0; i < xs.size(); ++i)
      if (res.valid[i]) valid.push_back(res.r(i));
    const double sd = oracle::sample_sd(valid);
    CHECK(sd > prev);
    prev = sd;
  }

  TransportMap flipped = map;
  flipped.coeffs = -flipped.coeffs;
  const auto res = jacobian_equation_residual(flipped, g, xs);
  CHECK(std::none_of(res.valid.begin(), res.valid.end(), [](bool v) { return v; }));
  CHECK(count_nonmonotone(flipped, xs.samples) == xs.size());
  CHECK(count_nonmonotone(map, xs.samples) == 0);
}

TEST_CASE("run_admm: determinism across worker counts") {
  const LaplacianPrior prior(2, 1.0);
  const PceBasis basis(prior, 3, BasisFamily::kContinuousSignLaguerre);
  Rng rng(14);
  const LassoObjectiveG g(random_matrix(15, 2, rng), random_matrix(15, 1, rng).col(0), 1.0, 0.5);
  const auto train = sample_laplacian(prior, 100, 15);
  AdmmConfig cfg;
  cfg.max_iter = 25;
  cfg.workers = 1;
  const auto a = run_admm(g, train, basis, cfg);
  cfg.workers = 4;
  const auto b = run_admm(g, train, basis, cfg);
  CHECK((a.coeffs.array() == b.coeffs.array()).all());
  REQUIRE(a.report.history.size() == b.report.history.size());
  for (std::size_t k = 0; k < a.report.history.size(); ++k) {
    CHECK(a.report.history[k].primal_residual == b.report.history[k].primal_residual);
    CHECK(a.report.history[k].objective == b.report.history[k].objective);
  }
  cfg.init_mode = InitMode::kRandom;
  cfg.init_seed = 3;
  const auto r1 = run_admm(g, train, basis, cfg);
  cfg.workers = 1;
  const auto r2 = run_admm(g, train, basis, cfg);
  CHECK((r1.coeffs.array() == r2.coeffs.array()).all());
}

TEST_CASE("run_admm: reports, callbacks and validation") {
  const LaplacianPrior prior(1, 1.0);
  const PceBasis basis(prior, 3, BasisFamily::kContinuousSignLaguerre);
  const auto g = zero_design_problem(1);
  const auto train = sample_laplacian(prior, 200, 1);
  AdmmConfig cfg;
  cfg.max_iter = 3;
  int calls = 0;
  cfg.on_iteration = [&](const IterationRecord& r) {
    ++calls;
    CHECK(r.iteration == calls);
    CHECK(std::isfinite(r.primal_residual));
  };
  const auto map = run_admm(g, train, basis, cfg);
  CHECK(calls == 3);
  CHECK_FALSE(map.report.converged);
  CHECK(map.report.iterations == 3);
  CHECK(map.coeffs.allFinite());

  AdmmConfig bad;
  bad.rho = -1.0;
  CHECK_THROWS_AS(run_admm(g, train, basis, bad), InvalidArgument);
  const auto wrong_rate = sample_laplacian(LaplacianPrior(1, 2.0), 50, 1);
  CHECK_THROWS_AS(run_admm(g, wrong_rate, basis, AdmmConfig{}), InvalidArgument);
  CHECK_THROWS_AS(run_admm(g, train, basis, AdmmConfig{}, Eigen::MatrixXd::Zero(1, 2)),
                  InvalidArgument);
}

TEST_CASE("ADMM fixed point on the zero-design problem") {
  const LaplacianPrior prior(1, 1.0);
  const PceBasis basis(prior, 2, BasisFamily::kContinuousSignLaguerre);
  const auto g = zero_design_problem(1);
  const auto train = sample_laplacian(prior, 40, 2);
  const auto tables = TrainingTables::build(basis, train);
  AdmmState s = initialize_state(basis.identity_coefficients(), tables, 1.0);
  double change = 1.0;
  // The first sweep barely moves B (duals start at zero), so do not stop early.
  for (int it = 0; it < 4000 && (it < 10 || change > 1e-12); ++it) {
    const Eigen::MatrixXd before = s.b;
    manual_iteration(s, tables, g);
    for (int i = 0; i < tables.n_samples; ++i) {
      REQUIRE(s.z_i(i).selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() > 0.0);
    }
    change = (s.b - before).norm();
  }
  const Eigen::MatrixXd fixed = s.b;
  manual_iteration(s, tables, g);
  CHECK((s.b - fixed).cwiseAbs().maxCoeff() < 1e-8);
  // Constraints are satisfied at the fixed point.
  CHECK((s.p - s.b * tables.a).cwiseAbs().maxCoeff() < 1e-6);
  // The fixed point minimizes the empirical objective: small perturbations
  // cannot decrease it.
  const double f0 = empirical_objective(fixed, g, tables).value;
  CHECK(f0 <= empirical_objective(basis.identity_coefficients(), g, tables).value + 1e-12);
  for (int k = 0; k < basis.size(); ++k) {
    for (double eps : {1e-4, -1e-4}) {
      Eigen::MatrixXd moved = fixed;
      moved(0, k) += eps;
      CHECK(empirical_objective(moved, g, tables).value >= f0 - 1e-10);
    }
  }
}
