#include "tlasso/transport_admm.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "tlasso/errors.hpp"
#include "tlasso/parallel.hpp"
#include "tlasso/random.hpp"

namespace tlasso {

namespace {

// Fixed work partitions. Results must not depend on the worker count, so
// these never adapt to it.
constexpr int kColumnBlock = 64;
constexpr int kSampleChunk = 16;

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd symmetric_part(const Eigen::Ref<const Eigen::MatrixXd>& w) {
  return 0.5 * (w + w.transpose());
}

// log|det| via LU, with the sign reported separately.
struct LogDet {
  double value;
  bool positive;
};

LogDet log_det(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  if (m.rows() == 1) {
    const double v = m(0, 0);
    return {v > 0.0 ? std::log(v) : -kInf, v > 0.0};
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const Eigen::MatrixXd& packed = lu.matrixLU();
  double logabs = 0.0;
  int sign = lu.permutationP().determinant();
  for (Eigen::Index k = 0; k < packed.rows(); ++k) {
    const double u = packed(k, k);
    if (u == 0.0) return {-kInf, false};
    if (u < 0.0) sign = -sign;
    logabs += std::log(std::abs(u));
  }
  return {logabs, sign > 0};
}

// Eigenvalue floor; used to seed Z from B J_i when B J_i is not SPD.
Eigen::MatrixXd spd_projection(const Eigen::Ref<const Eigen::MatrixXd>& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetric_part(w));
  if (eig.info() != Eigen::Success) {
    throw NumericalError("spd_projection: eigendecomposition failed");
  }
  Eigen::VectorXd vals = eig.eigenvalues();
  const double floor = 1e-6 * std::max(1.0, vals.cwiseAbs().maxCoeff());
  vals = vals.cwiseMax(floor);
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

// argmin_{Z > 0} -log det Z + (rho/2) ||Z - sym(w)||_F^2
Eigen::MatrixXd logdet_prox(const Eigen::Ref<const Eigen::MatrixXd>& w, double rho) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetric_part(w));
  if (eig.info() != Eigen::Success) {
    throw NumericalError("Z-update: eigendecomposition failed");
  }
  Eigen::VectorXd z = eig.eigenvalues();
  const double four_over_rho = 4.0 / rho;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    const double lam = z(k);
    const double root = std::sqrt(lam * lam + four_over_rho);
    // Positive root of rho z^2 - rho lam z - 1 = 0, cancellation-free.
    z(k) = lam >= 0.0 ? 0.5 * (lam + root) : 2.0 / (rho * (root - lam));
  }
  return eig.eigenvectors() * z.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

void AdmmConfig::validate() const {
  require(rho > 0.0 && std::isfinite(rho), "AdmmConfig: rho must be positive");
  require(max_iter >= 1, "AdmmConfig: max_iter must be >= 1");
  require(tol_b > 0.0, "AdmmConfig: tol_b must be positive");
  require(tol_res > 0.0, "AdmmConfig: tol_res must be positive");
  require(workers >= 1, "AdmmConfig: workers must be >= 1");
}

Eigen::VectorXd TransportMap::apply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  require(x.size() == dim(), "TransportMap::apply: dimension mismatch");
  return coeffs * basis.evaluate(x);
}

Eigen::MatrixXd TransportMap::jacobian(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  require(x.size() == dim(), "TransportMap::jacobian: dimension mismatch");
  return coeffs * basis.jacobian(x);
}

Eigen::MatrixXd TransportMap::apply_rows(const Eigen::Ref<const Eigen::MatrixXd>& xs,
                                         int workers) const {
  require(xs.cols() == dim(), "TransportMap::apply_rows: dimension mismatch");
  const int n = static_cast<int>(xs.rows());
  Eigen::MatrixXd out(n, dim());
  constexpr int kRowChunk = 256;
  parallel_for(workers, chunk_count(n, kRowChunk), [&](int c) {
    const int r0 = c * kRowChunk;
    const int r1 = std::min(n, r0 + kRowChunk);
    Eigen::VectorXd a(basis.size());
    Eigen::MatrixXd none(0, 0);
    for (int r = r0; r < r1; ++r) {
      basis.evaluate_with_jacobian(xs.row(r).transpose(), a, none);
      out.row(r) = (coeffs * a).transpose();
    }
  });
  return out;
}

Eigen::VectorXd apply_map(const TransportMap& map,
                          const Eigen::Ref<const Eigen::VectorXd>& x) {
  return map.apply(x);
}

TrainingTables TrainingTables::build(const PceBasis& basis, const SampleBatch& batch,
                                     int workers) {
  require(batch.dim() == basis.dim(), "TrainingTables: sample dimension mismatch");
  require(batch.size() >= 1, "TrainingTables: need at least one sample");
  TrainingTables t;
  t.n_samples = batch.size();
  t.dim = basis.dim();
  const int K = basis.size();
  t.a.resize(K, t.n_samples);
  t.j.resize(K, static_cast<Eigen::Index>(t.n_samples) * t.dim);
  parallel_for(workers, chunk_count(t.n_samples, kSampleChunk), [&](int c) {
    const int i0 = c * kSampleChunk;
    const int i1 = std::min(t.n_samples, i0 + kSampleChunk);
    Eigen::VectorXd a(K);
    Eigen::MatrixXd jac(K, t.dim);
    for (int i = i0; i < i1; ++i) {
      basis.evaluate_with_jacobian(batch.samples.row(i).transpose(), a, jac);
      t.a.col(i) = a;
      t.j.middleCols(static_cast<Eigen::Index>(i) * t.dim, t.dim) = jac;
    }
  });
  return t;
}

Eigen::MatrixXd precompute_M(const TrainingTables& tables, double rho) {
  require(rho > 0.0, "precompute_M: rho must be positive");
  require(tables.n_samples >= 1, "precompute_M: need at least one sample");
  const int K = tables.basis_size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(K, K);
  h.selfadjointView<Eigen::Lower>().rankUpdate(tables.a);
  h.selfadjointView<Eigen::Lower>().rankUpdate(tables.j);
  h.triangularView<Eigen::StrictlyUpper>() = h.transpose();
  h /= static_cast<double>(tables.n_samples);
  h.diagonal().array() += 1.0;
  h *= rho;
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("precompute_M: Cholesky factorization failed");
  }
  Eigen::MatrixXd m = llt.solve(Eigen::MatrixXd::Identity(K, K));
  return symmetric_part(m);
}

Eigen::MatrixXd update_B(const AdmmState& state, const TrainingTables& tables,
                         int workers) {
  const int n = state.n_samples();
  const int d = state.dim();
  const int K = static_cast<int>(state.b.cols());
  require(tables.n_samples == n && tables.basis_size() == K,
          "update_B: state and tables disagree");
  const double rho = state.rho;
  const Eigen::MatrixXd lin_a = rho * state.p + state.gamma;
  const Eigen::MatrixXd lin_j = rho * state.z + state.beta;

  const int blocks = chunk_count(K, kColumnBlock);
  Eigen::MatrixXd avg(d, K);
  parallel_for(workers, blocks, [&](int blk) {
    const int c0 = blk * kColumnBlock;
    const int w = std::min(kColumnBlock, K - c0);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, w);
    for (int i = 0; i < n; ++i) {
      acc += rho * state.f[i].middleCols(c0, w) + state.alpha[i].middleCols(c0, w);
    }
    acc.noalias() += lin_a * tables.a.middleRows(c0, w).transpose();
    acc.noalias() += lin_j * tables.j.middleRows(c0, w).transpose();
    avg.middleCols(c0, w) = acc / static_cast<double>(n);
  });

  Eigen::MatrixXd b(d, K);
  parallel_for(workers, blocks, [&](int blk) {
    const int c0 = blk * kColumnBlock;
    const int w = std::min(kColumnBlock, K - c0);
    b.middleCols(c0, w).noalias() = avg * state.m.middleCols(c0, w);
  });
  return b;
}

Eigen::MatrixXd update_F(const Eigen::Ref<const Eigen::MatrixXd>& alpha_i,
                         const Eigen::Ref<const Eigen::MatrixXd>& b_new, double rho) {
  return b_new - alpha_i / rho;
}

Eigen::MatrixXd update_Z(const Eigen::Ref<const Eigen::MatrixXd>& b_new,
                         const Eigen::Ref<const Eigen::MatrixXd>& j_i,
                         const Eigen::Ref<const Eigen::MatrixXd>& beta_i, double rho) {
  require(rho > 0.0, "update_Z: rho must be positive");
  return logdet_prox(b_new * j_i - beta_i / rho, rho);
}

DualBlock update_duals(const DualBlock& duals, const Eigen::Ref<const Eigen::VectorXd>& p_i,
                       const Eigen::Ref<const Eigen::MatrixXd>& z_i,
                       const Eigen::Ref<const Eigen::MatrixXd>& f_i,
                       const Eigen::Ref<const Eigen::MatrixXd>& b_new,
                       const Eigen::Ref<const Eigen::VectorXd>& a_i,
                       const Eigen::Ref<const Eigen::MatrixXd>& j_i, double rho) {
  DualBlock out;
  out.gamma = duals.gamma + rho * (p_i - b_new * a_i);
  out.beta = duals.beta + rho * (z_i - b_new * j_i);
  out.alpha = duals.alpha + rho * (f_i - b_new);
  return out;
}

ObjectiveValue empirical_objective(const Eigen::Ref<const Eigen::MatrixXd>& b,
                                   const LassoObjectiveG& g, const TrainingTables& tables,
                                   int workers) {
  const int n = tables.n_samples;
  const int d = tables.dim;
  require(b.rows() == d && b.cols() == tables.basis_size(),
          "empirical_objective: coefficient shape mismatch");
  Eigen::VectorXd terms(n);
  std::vector<char> ok(n, 1);
  parallel_for(workers, chunk_count(n, kSampleChunk), [&](int c) {
    const int i0 = c * kSampleChunk;
    const int w = std::min(kSampleChunk, n - i0);
    const Eigen::MatrixXd ba = b * tables.a.middleCols(i0, w);
    const Eigen::MatrixXd bj =
        b * tables.j.middleCols(static_cast<Eigen::Index>(i0) * d,
                                static_cast<Eigen::Index>(w) * d);
    for (int k = 0; k < w; ++k) {
      const LogDet ld = log_det(bj.middleCols(static_cast<Eigen::Index>(k) * d, d));
      ok[i0 + k] = ld.positive;
      terms(i0 + k) = ld.positive ? g.value(ba.col(k)) - ld.value : kInf;
    }
  });
  ObjectiveValue out;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!ok[i]) ++out.nonpositive_dets;
    sum += terms(i);
  }
  out.feasible = out.nonpositive_dets == 0;
  out.value = out.feasible ? sum / n : kInf;
  return out;
}

AdmmState initialize_state(const Eigen::Ref<const Eigen::MatrixXd>& b0,
                           const TrainingTables& tables, double rho) {
  const int n = tables.n_samples;
  const int d = tables.dim;
  require(b0.rows() == d && b0.cols() == tables.basis_size(),
          "initialize_state: coefficient shape mismatch");
  AdmmState s;
  s.rho = rho;
  s.b = b0;
  s.f.assign(n, b0);
  s.alpha.assign(n, Eigen::MatrixXd::Zero(d, b0.cols()));
  s.p = b0 * tables.a;
  s.gamma = Eigen::MatrixXd::Zero(d, n);
  s.z.resize(d, static_cast<Eigen::Index>(n) * d);
  s.beta = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(n) * d);
  for (int i = 0; i < n; ++i) s.z_i(i) = spd_projection(b0 * tables.j_i(i));
  s.m = precompute_M(tables, rho);
  return s;
}

namespace {

// One sweep over the per-sample blocks after B has been updated. Writes the
// per-sample primal residual into `residuals`.
void update_blocks(AdmmState& s, const TrainingTables& tables, const PUpdateFactor& factor,
                   LassoSolver solver, int workers, Eigen::VectorXd& residuals) {
  const int n = s.n_samples();
  const int d = s.dim();
  const double rho = s.rho;
  parallel_for(workers, chunk_count(n, kSampleChunk), [&](int c) {
    const int i0 = c * kSampleChunk;
    const int w = std::min(kSampleChunk, n - i0);
    const Eigen::MatrixXd ba = s.b * tables.a.middleCols(i0, w);
    const Eigen::MatrixXd bj =
        s.b * tables.j.middleCols(static_cast<Eigen::Index>(i0) * d,
                                  static_cast<Eigen::Index>(w) * d);
    for (int k = 0; k < w; ++k) {
      const int i = i0 + k;
      const auto bj_i = bj.middleCols(static_cast<Eigen::Index>(k) * d, d);

      s.f[i] = update_F(s.alpha[i], s.b, rho);

      s.z_i(i) = logdet_prox(bj_i - s.beta_i(i) / rho, rho);

      const PSubproblem sub = factor.build(ba.col(k), s.gamma.col(i));
      s.p.col(i) = solve_p_update(sub, solver, Eigen::VectorXd(s.p.col(i)));

      // Dual ascent (alpha uses F_i^{k+1} - B^{k+1}).
      s.gamma.col(i) += rho * (s.p.col(i) - ba.col(k));
      s.beta_i(i) += rho * (s.z_i(i) - bj_i);
      s.alpha[i] += rho * (s.f[i] - s.b);

      const double r_p = (ba.col(k) - s.p.col(i)).norm();
      const double r_z = (bj_i - s.z_i(i)).norm();
      const double r_f = (s.f[i] - s.b).norm();
      residuals(i) = std::max({r_p, r_z, r_f});
    }
  });
}


// Core iteration on a problem whose prior rate is 1. Returns the coefficients
// and fills `report`.
Eigen::MatrixXd admm_unit_rate(const LassoObjectiveG& g, const SampleBatch& train,
                               const PceBasis& basis, const AdmmConfig& cfg,
                               const Eigen::MatrixXd& b0, FitReport& report) {
  const TrainingTables tables = TrainingTables::build(basis, train, cfg.workers);
  AdmmState s = initialize_state(b0, tables, cfg.rho);
  auto factor = std::make_unique<PUpdateFactor>(g, s.rho);

  Eigen::VectorXd residuals(tables.n_samples);
  double best_residual = kInf;
  Eigen::MatrixXd best_b = b0;

  for (int it = 1; it <= cfg.max_iter; ++it) {
    const Eigen::MatrixXd b_old = s.b;
    s.b = update_B(s, tables, cfg.workers);
    if (!s.b.allFinite()) {
      throw NumericalError("run_admm: non-finite consensus iterate at iteration " +
                           std::to_string(it));
    }
    update_blocks(s, tables, *factor, cfg.p_solver, cfg.workers, residuals);
    s.iteration = it;

    const double primal = residuals.maxCoeff();
    if (!std::isfinite(primal)) {
      throw NumericalError("run_admm: non-finite residual at iteration " +
                           std::to_string(it));
    }
    const double b_norm = b_old.norm();
    const double b_change = (s.b - b_old).norm() / (b_norm > 0.0 ? b_norm : 1.0);

    IterationRecord rec;
    rec.iteration = it;
    rec.primal_residual = primal;
    rec.b_change = b_change;
    rec.rho = s.rho;
    rec.objective = cfg.track_objective
                        ? empirical_objective(s.b, g, tables, cfg.workers).value
                        : std::numeric_limits<double>::quiet_NaN();
    report.history.push_back(rec);
    if (cfg.on_iteration) cfg.on_iteration(rec);

    if (primal < best_residual) {
      best_residual = primal;
      best_b = s.b;
    }
    report.iterations = it;
    if (b_change < cfg.tol_b && primal < cfg.tol_res) {
      report.converged = true;
      break;
    }

    if (cfg.residual_balancing) {
      const double dual = s.rho * (s.b - b_old).norm();
      double next_rho = s.rho;
      if (primal > 10.0 * dual) next_rho = 2.0 * s.rho;
      else if (dual > 10.0 * primal) next_rho = 0.5 * s.rho;
      if (next_rho != s.rho) {
        s.m *= s.rho / next_rho;
        s.rho = next_rho;
        factor = std::make_unique<PUpdateFactor>(g, s.rho);
      }
    }
  }

  Eigen::MatrixXd out = report.converged ? s.b : best_b;
  const ObjectiveValue final_obj = empirical_objective(out, g, tables, cfg.workers);
  report.final_objective = final_obj.value;
  report.nonmonotone_samples = final_obj.nonpositive_dets;
  report.final_residual = report.converged ? residuals.maxCoeff() : best_residual;
  return out;
}

}  // namespace

// The iteration runs in prior-normalized coordinates u = rate * x, with the
// output scaled the same way. There B' = rate * B, J'(u) = J(x) / rate,
// Phi' = Phi / rate and tau' = 1, so B J and the objective are unchanged while
// the p- and Z-blocks see comparable curvature. rho and tol_res are therefore
// measured in prior-normalized units.
TransportMap run_admm(const LassoObjectiveG& g, const SampleBatch& train,
                      const PceBasis& basis, const AdmmConfig& cfg,
                      const std::optional<Eigen::MatrixXd>& warm_start) {
  cfg.validate();
  g.validate();
  const int d = basis.dim();
  require(g.dim() == d, "run_admm: objective and basis dimensions differ");
  require(train.dim() == d, "run_admm: sample and basis dimensions differ");
  require(train.size() >= 1, "run_admm: need at least one training sample");
  const double rate = basis.prior().rate;
  require(std::abs(rate - g.tau()) <= 1e-9 * rate,
          "run_admm: basis prior rate must equal the objective's tau = lambda/(2 sigma2)");
  require(std::abs(train.rate - rate) <= 1e-9 * rate,
          "run_admm: training samples were drawn at a different rate");

  Eigen::MatrixXd b0;
  if (warm_start) {
    require(warm_start->rows() == d && warm_start->cols() == basis.size(),
            "run_admm: warm start has wrong shape");
    require(warm_start->allFinite(), "run_admm: warm start has non-finite entries");
    b0 = *warm_start;
  } else if (cfg.init_mode == InitMode::kIdentity) {
    b0 = basis.identity_coefficients();
  } else {
    Rng rng(cfg.init_seed);
    std::normal_distribution<double> normal(0.0, 0.1 / rate);
    b0 = basis.order() >= 2 ? basis.identity_coefficients()
                            : Eigen::MatrixXd::Zero(d, basis.size());
    for (Eigen::Index k = 0; k < b0.size(); ++k) b0.data()[k] += normal(rng);
  }

  if (rate == 1.0) {
    TransportMap map{b0, basis, g.lambda, g.sigma2, {}};
    map.coeffs = admm_unit_rate(g, train, basis, cfg, b0, map.report);
    return map;
  }
  const LassoObjectiveG g_unit(g.phi / rate, g.y, 2.0 * g.sigma2, g.sigma2);
  const PceBasis basis_unit(LaplacianPrior(d, 1.0), basis.order(), basis.family(),
                            basis.indices());
  SampleBatch train_unit = train;
  train_unit.samples *= rate;
  train_unit.rate = 1.0;
  TransportMap map{b0, basis, g.lambda, g.sigma2, {}};
  map.coeffs =
      admm_unit_rate(g_unit, train_unit, basis_unit, cfg, rate * b0, map.report) / rate;
  return map;
}

JacobianResidual jacobian_equation_residual(const TransportMap& map,
                                            const LassoObjectiveG& g,
                                            const SampleBatch& xs) {
  require(xs.dim() == map.dim() && g.dim() == map.dim(),
          "jacobian_equation_residual: dimension mismatch");
  JacobianResidual out;
  out.r.resize(xs.size());
  out.valid.assign(xs.size(), true);
  const LaplacianPrior& prior = map.basis.prior();
  Eigen::VectorXd a(map.basis.size());
  Eigen::MatrixXd jac(map.basis.size(), map.dim());
  for (int i = 0; i < xs.size(); ++i) {
    const Eigen::VectorXd x = xs.samples.row(i).transpose();
    map.basis.evaluate_with_jacobian(x, a, jac);
    const LogDet ld = log_det(map.coeffs * jac);
    if (!ld.positive) {
      out.valid[i] = false;
      out.r(i) = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    out.r(i) = prior.log_density(x) + g.value(map.coeffs * a) - ld.value;
  }
  return out;
}

int count_nonmonotone(const TransportMap& map, const Eigen::Ref<const Eigen::MatrixXd>& xs) {
  require(xs.cols() == map.dim(), "count_nonmonotone: dimension mismatch");
  int bad = 0;
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    if (!log_det(map.jacobian(xs.row(i).transpose())).positive) ++bad;
  }
  return bad;
}

}  // namespace tlasso
