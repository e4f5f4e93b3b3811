#include "tlasso/objective.hpp"

#include <cmath>

#include "tlasso/errors.hpp"

namespace tlasso {

LassoObjectiveG::LassoObjectiveG(Eigen::MatrixXd phi_, Eigen::VectorXd y_,
                                 double lambda_, double sigma2_)
    : phi(std::move(phi_)), y(std::move(y_)), lambda(lambda_), sigma2(sigma2_) {
  validate();
}

void LassoObjectiveG::validate() const {
  require(phi.rows() == y.size(), "LassoObjectiveG: phi rows must match y length");
  require(phi.cols() >= 1, "LassoObjectiveG: need at least one column");
  require(lambda > 0.0 && std::isfinite(lambda),
          "LassoObjectiveG: lambda must be positive");
  require(sigma2 > 0.0 && std::isfinite(sigma2),
          "LassoObjectiveG: sigma2 must be positive");
  require(phi.allFinite() && y.allFinite(), "LassoObjectiveG: non-finite data");
}

double LassoObjectiveG::value(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  require(x.size() == dim(), "LassoObjectiveG::value: dimension mismatch");
  const double rss = phi.rows() > 0 ? (y - phi * x).squaredNorm() : 0.0;
  return rss / (2.0 * sigma2) + tau() * x.lpNorm<1>();
}

LassoObjectiveG LassoObjectiveG::with_lambda(double new_lambda) const {
  return LassoObjectiveG(phi, y, new_lambda, sigma2);
}

}  // namespace tlasso
