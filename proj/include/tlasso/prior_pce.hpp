#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace tlasso {

// i.i.d. Laplacian prior p(x) = prod_j (rate/2) exp(-rate |x_j|).
struct LaplacianPrior {
  int dim = 1;
  double rate = 1.0;

  LaplacianPrior(int dim, double rate);

  double log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

// Row-major N x d draws plus the parameters that produced them.
struct SampleBatch {
  Eigen::MatrixXd samples;
  std::uint64_t seed = 0;
  double rate = 1.0;

  int size() const { return static_cast<int>(samples.rows()); }
  int dim() const { return static_cast<int>(samples.cols()); }
};

// Inverse-CDF sampling: u ~ U(0,1), x = -sign(u - 1/2) log(1 - 2|u - 1/2|) / rate.
SampleBatch sample_laplacian(const LaplacianPrior& prior, int n,
                             std::uint64_t seed);

// Orthonormal (w.r.t. exp(-t) on [0, inf)) Laguerre polynomial L_n(t).
double laguerre_eval(int n, double t);

// dL_n/dt.
double laguerre_deriv(int n, double t);

// Univariate factor families.
//
// kSignLaguerre: even factors L_n(rate |x|), odd factors sign(x) L_n(rate |x|).
//
// kContinuousSignLaguerre: same even factors; odd factors replaced by the
// Helmert combinations
//     h_n(x) = sign(x) [sum_{k<n} L_k(rate |x|) - n L_n(rate |x|)] / sqrt(n(n+1)),
// n >= 1, which vanish at x = 0. Every map in this family is continuous across
// the coordinate hyperplanes, and the family is still orthonormal under the
// prior. An odd index of degree n costs n + 1 in both families.
enum class BasisFamily : std::uint8_t {
  kSignLaguerre = 0,
  kContinuousSignLaguerre = 1,
};

struct MultiIndex {
  std::vector<int> degrees;
  std::vector<std::uint8_t> parities;  // 0 = even factor, 1 = odd factor

  int dim() const { return static_cast<int>(degrees.size()); }
  // sum_j (degrees_j + parities_j)
  int total_order() const;
  bool is_constant() const;

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

// Graded ordering: total order, then sum of degrees, then the per-coordinate
// codes (2 * degree + parity) in descending lexicographic order.
std::vector<MultiIndex> enumerate_multi_indices(int dim, int order,
                                                BasisFamily family);

// Immutable multi-index set bound to a Laplacian prior. Safe to share across
// threads.
class PceBasis {
 public:
  PceBasis(LaplacianPrior prior, int order,
           BasisFamily family = BasisFamily::kSignLaguerre);

  // Rebuilds from an explicit index list (deserialization). Validates every
  // invariant the enumerating constructor guarantees.
  PceBasis(LaplacianPrior prior, int order, BasisFamily family,
           std::vector<MultiIndex> indices);

  const LaplacianPrior& prior() const { return prior_; }
  int dim() const { return prior_.dim; }
  int order() const { return order_; }
  BasisFamily family() const { return family_; }
  int size() const { return static_cast<int>(indices_.size()); }
  const std::vector<MultiIndex>& indices() const { return indices_; }

  // A(x), length K.
  Eigen::VectorXd evaluate(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  // J(x), K x d, entry (k, j) = d phi_k / d x_j.
  Eigen::MatrixXd jacobian(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  // Writes A(x) into a_out (length K) and J(x) into j_out (K x d).
  void evaluate_with_jacobian(const Eigen::Ref<const Eigen::VectorXd>& x,
                              Eigen::Ref<Eigen::VectorXd> a_out,
                              Eigen::Ref<Eigen::MatrixXd> j_out) const;

  // d x K coefficients with coeffs * A(x) = x. Requires order >= 2.
  Eigen::MatrixXd identity_coefficients() const;

  // Position of an index in the ordered set, or -1.
  int find(const MultiIndex& index) const;

  // Univariate factor and its derivative w.r.t. x.
  double factor(int degree, bool odd, double x) const;
  double factor_deriv(int degree, bool odd, double x) const;

 private:
  struct Term {
    int coord;
    int degree;
    bool odd;
  };

  void index_terms();
  void check_dim(Eigen::Index n) const;

  LaplacianPrior prior_;
  int order_;
  BasisFamily family_;
  std::vector<MultiIndex> indices_;
  // Non-constant factors of each index; at most `order` per index.
  std::vector<std::vector<Term>> terms_;
};

inline PceBasis build_multi_index_set(
    const LaplacianPrior& prior, int order,
    BasisFamily family = BasisFamily::kSignLaguerre) {
  return PceBasis(prior, order, family);
}

}  // namespace tlasso
