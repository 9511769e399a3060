#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace ergm {

/// Effective sample size of a stationary series by Geyer's initial monotone
/// positive sequence estimator of the integrated autocorrelation time.
inline double effective_sample_size(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::Index n = x.size();
  if (n < 4) return static_cast<double>(n);
  const Eigen::VectorXd c = x.array() - x.mean();
  const double var = c.squaredNorm() / static_cast<double>(n);
  if (!(var > 0)) return static_cast<double>(n);
  auto autocov = [&](Eigen::Index lag) {
    return c.head(n - lag).dot(c.tail(n - lag)) / static_cast<double>(n);
  };
  double tau = -1.0;  // sum over pairs Gamma_m = rho(2m) + rho(2m+1), tau = -1 + 2 sum
  double previous = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
    double gamma = (autocov(2 * m) + autocov(2 * m + 1)) / var;
    if (gamma <= 0) break;
    gamma = std::min(gamma, previous);
    previous = gamma;
    tau += 2.0 * gamma;
  }
  tau = std::max(tau, 1.0 / static_cast<double>(n));
  return std::min(static_cast<double>(n), static_cast<double>(n) / tau);
}

/// Sample covariance (divisor L - 1) of the rows of m.
inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd centered = m.rowwise() - m.colwise().mean();
  const double denom = std::max<double>(1.0, static_cast<double>(m.rows()) - 1.0);
  return centered.transpose() * centered / denom;
}

}  // namespace ergm
