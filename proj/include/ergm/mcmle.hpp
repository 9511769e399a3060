#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ergm/diagnostics.hpp"
#include "ergm/model.hpp"
#include "ergm/network.hpp"
#include "ergm/rng.hpp"
#include "ergm/sampler.hpp"

namespace ergm {

// ---------------------------------------------------------------------------
// Importance-sampling approximation of the log-likelihood ratio
// ---------------------------------------------------------------------------

namespace detail {

inline double log_mean_exp(const Eigen::VectorXd& a) {
  const double top = a.maxCoeff();
  return top + std::log((a.array() - top).exp().mean());
}

}  // namespace detail

/// Monte Carlo estimate of l(theta) - l(theta0) from draws at theta0:
///
///   (theta - theta0).t_obs - log( mean_i exp((theta - theta0).T(A_i)) )
///
/// evaluated as -log mean_i exp((theta - theta0).(T(A_i) - t_obs)), which is
/// the same quantity with the observed statistic folded into the exponent.
inline double approx_loglik_diff(const Theta& theta, const Theta& theta0,
                                 const StatVector& t_obs, const SampleBatch& batch) {
  const Eigen::VectorXd delta = theta - theta0;
  const Eigen::MatrixXd centered = batch.stats.rowwise() - t_obs.transpose();
  return -detail::log_mean_exp(centered * delta);
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct DegeneracyDiagnostics {
  bool flagged = false;
  double extreme_fraction = 0.0;   ///< draws with density < 0.01 or > 0.99
  bool singular_covariance = false;
  double covariance_condition = 0.0;
};

/// Flags a batch whose draws pile up at the empty/complete boundary (more
/// than 95% of draws with density < 0.01 or > 0.99) or whose statistic
/// covariance is numerically singular.
inline DegeneracyDiagnostics degeneracy_check(const SampleBatch& batch, std::size_t n) {
  DegeneracyDiagnostics out;
  const double dyads = static_cast<double>(dyad_count(n));
  std::size_t extreme = 0;
  for (auto e : batch.edge_counts) {
    const double dens = static_cast<double>(e) / dyads;
    if (dens < 0.01 || dens > 0.99) ++extreme;
  }
  out.extreme_fraction =
      batch.edge_counts.empty() ? 0.0
                                : static_cast<double>(extreme) / static_cast<double>(batch.edge_counts.size());
  const Eigen::MatrixXd cov = sample_covariance(batch.stats);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const double top = eig.eigenvalues().maxCoeff();
  const double bottom = eig.eigenvalues().minCoeff();
  out.covariance_condition = bottom > 0 ? top / bottom : std::numeric_limits<double>::infinity();
  out.singular_covariance = !(top > 0) || bottom <= 1e-10 * top;
  out.flagged = out.extreme_fraction > 0.95 || out.singular_covariance;
  return out;
}

/// Standardised moment gaps (mean T - t_obs) / SE per coordinate, SE from
/// the autocorrelation-adjusted effective sample size of each coordinate.
inline Eigen::VectorXd moment_z(const SampleBatch& batch, const StatVector& t_obs) {
  const Eigen::Index q = batch.stats.cols();
  Eigen::VectorXd z(q);
  const StatVector mean = batch.mean();
  for (Eigen::Index k = 0; k < q; ++k) {
    const Eigen::VectorXd col = batch.stats.col(k);
    const double gap = mean[k] - t_obs[k];
    const double sd = std::sqrt((col.array() - mean[k]).square().sum() /
                                std::max<double>(1.0, static_cast<double>(col.size()) - 1.0));
    if (!(sd > 0)) {
      z[k] = std::abs(gap) <= 1e-12 * std::max(1.0, std::abs(t_obs[k]))
                 ? 0.0
                 : std::copysign(std::numeric_limits<double>::infinity(), gap);
      continue;
    }
    z[k] = gap / (sd / std::sqrt(effective_sample_size(col)));
  }
  return z;
}

/// Draws a fresh batch at theta and returns its standardised moment gaps
/// against t_obs.
inline Eigen::VectorXd moment_check(const ModelSpec& spec, const Theta& theta,
                                    const StatVector& t_obs, const Network& start,
                                    const SamplerConfig& config) {
  return moment_z(sample(spec, theta, start, config), t_obs);
}

// ---------------------------------------------------------------------------
// MCMLE
// ---------------------------------------------------------------------------

struct McmleConfig {
  int max_outer_iterations = 20;
  SamplerConfig sampler;
  double step_bound = 0.5;             ///< max |theta_new - theta0| per coordinate
  double convergence_tolerance = 3.0;  ///< per-coordinate |z| bound
  double min_ess_fraction = 0.05;      ///< importance-weight ESS guard
  std::uint64_t seed = 0;
};

enum class McmleStatus { Converged, Degenerate, MaxIterations };

inline const char* to_string(McmleStatus s) {
  switch (s) {
    case McmleStatus::Converged: return "Converged";
    case McmleStatus::Degenerate: return "Degenerate";
    case McmleStatus::MaxIterations: return "MaxIterations";
  }
  return "?";
}

struct McmleIteration {
  Theta theta0;                 ///< parameter the batch was drawn at
  Eigen::VectorXd moment_gap;   ///< mean T - t_obs at theta0
  Eigen::VectorXd moment_z;
  Theta theta_next;
  double step_bound = 0.0;      ///< bound actually used after ESS shrinking
  double weight_ess = 0.0;
  double acceptance_rate = 0.0;
  bool degenerate = false;
};

struct McmleResult {
  Theta theta;
  McmleStatus status = McmleStatus::MaxIterations;
  int outer_iterations = 0;
  Eigen::VectorXd final_moment_z;
  std::vector<McmleIteration> trace;
  DegeneracyDiagnostics degeneracy;
};

struct InnerStep {
  Eigen::VectorXd delta;
  double weight_ess = 0.0;
  double max_abs_gradient = 0.0;
  bool on_boundary = false;
};

/// Maximises the importance-sampled log-likelihood ratio over
/// delta = theta - theta0 with |delta|_inf <= bound. Newton iterations run on
/// the concave objective; if they leave the box the last iterate is pulled
/// back radially onto the box boundary.
inline InnerStep maximize_loglik_ratio(const Eigen::MatrixXd& centered_stats, double bound) {
  const Eigen::Index q = centered_stats.cols();
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(q);
  auto objective = [&](const Eigen::VectorXd& d) {
    return -detail::log_mean_exp(centered_stats * d);
  };
  auto weights = [&](const Eigen::VectorXd& d) {
    Eigen::VectorXd a = centered_stats * d;
    a = (a.array() - a.maxCoeff()).exp();
    return Eigen::VectorXd(a / a.sum());
  };
  InnerStep out;
  double f = 0.0;
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd w = weights(delta);
    const Eigen::VectorXd wmean = centered_stats.transpose() * w;
    const Eigen::VectorXd grad = -wmean;
    out.max_abs_gradient = grad.lpNorm<Eigen::Infinity>();
    if (out.max_abs_gradient <= 1e-9) break;
    const Eigen::MatrixXd dev = centered_stats.rowwise() - wmean.transpose();
    const Eigen::MatrixXd info = dev.transpose() * w.asDiagonal() * dev;
    Eigen::VectorXd step = info.ldlt().solve(grad);
    if (!step.allFinite() || step.dot(grad) <= 0) step = grad;
    double alpha = 1.0;
    bool moved = false;
    for (int half = 0; half < 50; ++half, alpha *= 0.5) {
      const Eigen::VectorXd trial = delta + alpha * step;
      const double ft = objective(trial);
      if (ft >= f - 1e-14 * std::max(1.0, std::abs(f))) {
        delta = trial;
        f = ft;
        moved = true;
        break;
      }
    }
    if (!moved) break;
    if (delta.lpNorm<Eigen::Infinity>() > bound) {
      delta *= bound / delta.lpNorm<Eigen::Infinity>();
      out.on_boundary = true;
      break;
    }
  }
  const Eigen::VectorXd w = weights(delta);
  out.weight_ess = 1.0 / w.squaredNorm();
  out.delta = delta;
  if (out.on_boundary) out.max_abs_gradient = (centered_stats.transpose() * w).lpNorm<Eigen::Infinity>();
  return out;
}

/// Monte Carlo MLE from theta0. Each outer iteration samples at the current
/// theta0 (continuing the chain from the previous iteration's final network),
/// stops with Degenerate if the batch fails degeneracy_check, records the
/// standardised moment gaps, and moves theta0 to the trust-region maximiser of
/// the approximate log-likelihood ratio. When all |z| are within tolerance the
/// fit is Converged and the returned theta is that final maximiser.
inline McmleResult mcmle_fit(const ModelSpec& spec, const Network& net_obs,
                             const Theta& theta0, const McmleConfig& config) {
  if (!theta0.allFinite()) throw std::invalid_argument("mcmle_fit needs a finite theta0");
  if (theta0.size() != static_cast<Eigen::Index>(spec.size()))
    throw std::invalid_argument("theta0 dimension does not match model");
  const StatVector t_obs = stat_vector(spec, net_obs);
  McmleResult out;
  Theta theta = theta0;
  Network start = net_obs;
  for (int it = 0; it < config.max_outer_iterations; ++it) {
    SamplerConfig sc = config.sampler;
    sc.seed = derive_seed(config.seed, static_cast<std::uint64_t>(it));
    const SampleBatch batch = sample(spec, theta, start, sc);
    start = batch.final_network;

    McmleIteration rec;
    rec.theta0 = theta;
    rec.moment_gap = batch.mean() - t_obs;
    rec.moment_z = moment_z(batch, t_obs);
    rec.acceptance_rate = batch.acceptance_rate;
    out.outer_iterations = it + 1;
    out.final_moment_z = rec.moment_z;
    out.degeneracy = degeneracy_check(batch, net_obs.size());
    if (out.degeneracy.flagged) {
      rec.degenerate = true;
      rec.theta_next = theta;
      out.trace.push_back(rec);
      out.theta = theta;
      out.status = McmleStatus::Degenerate;
      return out;
    }

    const Eigen::MatrixXd centered = batch.stats.rowwise() - t_obs.transpose();
    double bound = config.step_bound;
    InnerStep step = maximize_loglik_ratio(centered, bound);
    for (int shrink = 0; shrink < 20 &&
                         step.weight_ess < config.min_ess_fraction * static_cast<double>(batch.size());
         ++shrink) {
      bound *= 0.5;
      step = maximize_loglik_ratio(centered, bound);
    }
    rec.step_bound = bound;
    rec.weight_ess = step.weight_ess;
    rec.theta_next = theta + step.delta;
    out.trace.push_back(rec);

    const bool moments_ok =
        (rec.moment_z.array().abs() <= config.convergence_tolerance).all();
    theta = rec.theta_next;
    if (moments_ok) {
      out.theta = theta;
      out.status = McmleStatus::Converged;
      return out;
    }
  }
  out.theta = theta;
  out.status = McmleStatus::MaxIterations;
  return out;
}

}  // namespace ergm
