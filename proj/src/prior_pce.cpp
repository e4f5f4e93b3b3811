#include "tlasso/prior_pce.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tlasso/errors.hpp"
#include "tlasso/random.hpp"

namespace tlasso {

namespace {

double sign_of(double x) { return (x > 0.0) - (x < 0.0); }

// Fills values[n] = L_n(t) and derivs[n] = L_n'(t) for n = 0..max_degree.
void laguerre_table(int max_degree, double t, double* values, double* derivs) {
  values[0] = 1.0;
  derivs[0] = 0.0;
  if (max_degree >= 1) {
    values[1] = 1.0 - t;
    derivs[1] = -1.0;
  }
  for (int n = 1; n < max_degree; ++n) {
    values[n + 1] =
        ((2.0 * n + 1.0 - t) * values[n] - n * values[n - 1]) / (n + 1.0);
  }
  // L_n' = -sum_{k<n} L_k
  for (int n = 2; n <= max_degree; ++n) derivs[n] = derivs[n - 1] - values[n - 1];
}

}  // namespace

LaplacianPrior::LaplacianPrior(int dim_, double rate_) : dim(dim_), rate(rate_) {
  require(dim >= 1, "LaplacianPrior: dim must be >= 1");
  require(rate > 0.0 && std::isfinite(rate),
          "LaplacianPrior: rate must be positive and finite");
}

double LaplacianPrior::log_density(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  require(x.size() == dim, "LaplacianPrior::log_density: dimension mismatch");
  return dim * std::log(0.5 * rate) - rate * x.lpNorm<1>();
}

SampleBatch sample_laplacian(const LaplacianPrior& prior, int n,
                             std::uint64_t seed) {
  require(n >= 1, "sample_laplacian: n must be >= 1");
  SampleBatch batch;
  batch.seed = seed;
  batch.rate = prior.rate;
  batch.samples.resize(n, prior.dim);
  Rng rng(seed);
  // Row-major fill so that the first rows of a larger draw coincide with a
  // smaller draw under the same seed.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < prior.dim; ++j) {
      const double u = uniform_open01(rng) - 0.5;
      batch.samples(i, j) =
          -sign_of(u) * std::log1p(-2.0 * std::abs(u)) / prior.rate;
    }
  }
  return batch;
}

double laguerre_eval(int n, double t) {
  require(n >= 0, "laguerre_eval: degree must be >= 0");
  require(t >= 0.0, "laguerre_eval: t must be non-negative");
  double prev = 1.0;
  if (n == 0) return prev;
  double cur = 1.0 - t;
  for (int k = 1; k < n; ++k) {
    const double next = ((2.0 * k + 1.0 - t) * cur - k * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

double laguerre_deriv(int n, double t) {
  require(n >= 0, "laguerre_deriv: degree must be >= 0");
  require(t >= 0.0, "laguerre_deriv: t must be non-negative");
  std::vector<double> values(n + 1), derivs(n + 1);
  laguerre_table(n, t, values.data(), derivs.data());
  return derivs[n];
}

int MultiIndex::total_order() const {
  int total = 0;
  for (std::size_t j = 0; j < degrees.size(); ++j) total += degrees[j] + parities[j];
  return total;
}

bool MultiIndex::is_constant() const {
  return std::all_of(degrees.begin(), degrees.end(), [](int n) { return n == 0; }) &&
         std::all_of(parities.begin(), parities.end(),
                     [](std::uint8_t p) { return p == 0; });
}

namespace {

void enumerate_rec(int coord, int budget, BasisFamily family, MultiIndex& cur,
                   std::vector<MultiIndex>& out) {
  if (coord == cur.dim()) {
    out.push_back(cur);
    return;
  }
  for (int parity = 0; parity <= 1; ++parity) {
    for (int degree = 0; degree + parity <= budget; ++degree) {
      if (family == BasisFamily::kContinuousSignLaguerre && parity == 1 &&
          degree == 0) {
        continue;
      }
      cur.degrees[coord] = degree;
      cur.parities[coord] = static_cast<std::uint8_t>(parity);
      enumerate_rec(coord + 1, budget - degree - parity, family, cur, out);
    }
  }
  cur.degrees[coord] = 0;
  cur.parities[coord] = 0;
}

bool graded_less(const MultiIndex& a, const MultiIndex& b) {
  const int oa = a.total_order(), ob = b.total_order();
  if (oa != ob) return oa < ob;
  int da = 0, db = 0;
  for (int j = 0; j < a.dim(); ++j) {
    da += a.degrees[j];
    db += b.degrees[j];
  }
  if (da != db) return da < db;
  for (int j = 0; j < a.dim(); ++j) {
    const int ca = 2 * a.degrees[j] + a.parities[j];
    const int cb = 2 * b.degrees[j] + b.parities[j];
    if (ca != cb) return ca > cb;
  }
  return false;
}

}  // namespace

std::vector<MultiIndex> enumerate_multi_indices(int dim, int order,
                                                BasisFamily family) {
  require(dim >= 1, "enumerate_multi_indices: dim must be >= 1");
  require(order >= 1, "enumerate_multi_indices: order must be >= 1");
  MultiIndex cur{std::vector<int>(dim, 0), std::vector<std::uint8_t>(dim, 0)};
  std::vector<MultiIndex> out;
  enumerate_rec(0, order, family, cur, out);
  std::sort(out.begin(), out.end(), graded_less);
  return out;
}

PceBasis::PceBasis(LaplacianPrior prior, int order, BasisFamily family)
    : prior_(prior),
      order_(order),
      family_(family),
      indices_(enumerate_multi_indices(prior.dim, order, family)) {
  index_terms();
}

PceBasis::PceBasis(LaplacianPrior prior, int order, BasisFamily family,
                   std::vector<MultiIndex> indices)
    : prior_(prior), order_(order), family_(family), indices_(std::move(indices)) {
  require(order >= 1, "PceBasis: order must be >= 1");
  require(!indices_.empty() && indices_.front().dim() == prior.dim &&
              indices_.front().is_constant(),
          "PceBasis: first index must be the constant index");
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    const MultiIndex& idx = indices_[k];
    require(idx.dim() == prior.dim &&
                static_cast<int>(idx.parities.size()) == prior.dim,
            "PceBasis: index " + std::to_string(k) + " has wrong dimension");
    require(idx.total_order() <= order,
            "PceBasis: index " + std::to_string(k) + " exceeds the order bound");
    for (int j = 0; j < idx.dim(); ++j) {
      require(idx.degrees[j] >= 0 && idx.parities[j] <= 1,
              "PceBasis: malformed index " + std::to_string(k));
      require(!(family == BasisFamily::kContinuousSignLaguerre &&
                idx.parities[j] == 1 && idx.degrees[j] == 0),
              "PceBasis: odd degree-0 factor not allowed in continuous family");
    }
    for (std::size_t l = 0; l < k; ++l) {
      require(!(indices_[l] == idx), "PceBasis: duplicate index");
    }
  }
  index_terms();
}

void PceBasis::index_terms() {
  terms_.clear();
  terms_.reserve(indices_.size());
  for (const MultiIndex& idx : indices_) {
    std::vector<Term> terms;
    for (int j = 0; j < idx.dim(); ++j) {
      if (idx.degrees[j] != 0 || idx.parities[j] != 0) {
        terms.push_back({j, idx.degrees[j], idx.parities[j] != 0});
      }
    }
    terms_.push_back(std::move(terms));
  }
}

void PceBasis::check_dim(Eigen::Index n) const {
  if (n != prior_.dim) {
    throw InvalidArgument("PceBasis: expected a " + std::to_string(prior_.dim) +
                          "-vector, got length " + std::to_string(n));
  }
}

double PceBasis::factor(int degree, bool odd, double x) const {
  const double t = prior_.rate * std::abs(x);
  if (!odd) return laguerre_eval(degree, t);
  const double s = sign_of(x);
  if (family_ == BasisFamily::kSignLaguerre) return s * laguerre_eval(degree, t);
  double acc = 0.0;
  for (int k = 0; k < degree; ++k) acc += laguerre_eval(k, t);
  return s * (acc - degree * laguerre_eval(degree, t)) /
         std::sqrt(degree * (degree + 1.0));
}

double PceBasis::factor_deriv(int degree, bool odd, double x) const {
  const double t = prior_.rate * std::abs(x);
  const double s = sign_of(x);
  if (!odd) return prior_.rate * s * laguerre_deriv(degree, t);
  if (family_ == BasisFamily::kSignLaguerre) {
    return prior_.rate * s * s * laguerre_deriv(degree, t);
  }
  double acc = 0.0;
  for (int k = 0; k < degree; ++k) acc += laguerre_deriv(k, t);
  return prior_.rate * s * s * (acc - degree * laguerre_deriv(degree, t)) /
         std::sqrt(degree * (degree + 1.0));
}

void PceBasis::evaluate_with_jacobian(const Eigen::Ref<const Eigen::VectorXd>& x,
                                      Eigen::Ref<Eigen::VectorXd> a_out,
                                      Eigen::Ref<Eigen::MatrixXd> j_out) const {
  check_dim(x.size());
  const int d = dim();
  const int width = order_ + 1;
  // Per-coordinate tables, layout [coord][degree][parity].
  std::vector<double> val(static_cast<std::size_t>(d) * width * 2);
  std::vector<double> der(val.size());
  std::vector<double> lag(width), lagd(width);
  for (int j = 0; j < d; ++j) {
    const double xj = x(j);
    if (!std::isfinite(xj)) throw InvalidArgument("PceBasis: non-finite input");
    const double s = sign_of(xj);
    laguerre_table(order_, prior_.rate * std::abs(xj), lag.data(), lagd.data());
    double partial = 0.0, partial_d = 0.0;
    for (int n = 0; n < width; ++n) {
      double* v = &val[(static_cast<std::size_t>(j) * width + n) * 2];
      double* g = &der[(static_cast<std::size_t>(j) * width + n) * 2];
      v[0] = lag[n];
      g[0] = prior_.rate * s * lagd[n];
      if (family_ == BasisFamily::kSignLaguerre) {
        v[1] = s * lag[n];
        g[1] = prior_.rate * s * s * lagd[n];
      } else if (n == 0) {
        v[1] = 0.0;
        g[1] = 0.0;
      } else {
        const double norm = std::sqrt(n * (n + 1.0));
        v[1] = s * (partial - n * lag[n]) / norm;
        g[1] = prior_.rate * s * s * (partial_d - n * lagd[n]) / norm;
      }
      partial += lag[n];
      partial_d += lagd[n];
    }
  }

  const int K = size();
  if (j_out.size() > 0) j_out.setZero();
  for (int k = 0; k < K; ++k) {
    const auto& terms = terms_[k];
    double prod = 1.0;
    for (const Term& t : terms) {
      prod *= val[(static_cast<std::size_t>(t.coord) * width + t.degree) * 2 + t.odd];
    }
    a_out(k) = prod;
    if (j_out.size() == 0) continue;
    for (std::size_t a = 0; a < terms.size(); ++a) {
      const Term& ta = terms[a];
      double g = der[(static_cast<std::size_t>(ta.coord) * width + ta.degree) * 2 + ta.odd];
      for (std::size_t b = 0; b < terms.size(); ++b) {
        if (b == a) continue;
        const Term& tb = terms[b];
        g *= val[(static_cast<std::size_t>(tb.coord) * width + tb.degree) * 2 + tb.odd];
      }
      j_out(k, ta.coord) = g;
    }
  }
}

Eigen::VectorXd PceBasis::evaluate(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  check_dim(x.size());
  Eigen::VectorXd a(size());
  Eigen::MatrixXd none(0, 0);
  evaluate_with_jacobian(x, a, none);
  return a;
}

Eigen::MatrixXd PceBasis::jacobian(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  check_dim(x.size());
  Eigen::VectorXd a(size());
  Eigen::MatrixXd j(size(), dim());
  evaluate_with_jacobian(x, a, j);
  return j;
}

int PceBasis::find(const MultiIndex& index) const {
  for (int k = 0; k < size(); ++k) {
    if (indices_[k] == index) return k;
  }
  return -1;
}

Eigen::MatrixXd PceBasis::identity_coefficients() const {
  require(order_ >= 2, "identity_coefficients: identity needs order >= 2");
  const int d = dim();
  Eigen::MatrixXd coeffs = Eigen::MatrixXd::Zero(d, size());
  for (int j = 0; j < d; ++j) {
    MultiIndex odd0{std::vector<int>(d, 0), std::vector<std::uint8_t>(d, 0)};
    odd0.parities[j] = 1;
    MultiIndex odd1 = odd0;
    odd1.degrees[j] = 1;
    if (family_ == BasisFamily::kSignLaguerre) {
      // x = sign(x) |x| = sign(x) (L_0 - L_1(rate |x|)) / rate
      coeffs(j, find(odd0)) = 1.0 / prior_.rate;
      coeffs(j, find(odd1)) = -1.0 / prior_.rate;
    } else {
      // h_1 = sign(x) (L_0 - L_1) / sqrt(2) = rate x / sqrt(2)
      coeffs(j, find(odd1)) = std::numbers::sqrt2 / prior_.rate;
    }
  }
  return coeffs;
}

}  // namespace tlasso
