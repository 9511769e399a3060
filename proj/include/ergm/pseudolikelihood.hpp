#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ergm/errors.hpp"
#include "ergm/model.hpp"
#include "ergm/network.hpp"

namespace ergm {

struct DesignRow {
  bool response = false;
  ChangeVector covariates;
};

/// One row per dyad {i, j}, i < j, in row-major order: the observed tie and
/// the change statistics with the rest of the network held fixed.
inline std::vector<DesignRow> design_rows(const ModelSpec& spec, const Network& net) {
  std::vector<DesignRow> rows;
  rows.reserve(net.dyads());
  const auto n = static_cast<std::uint32_t>(net.size());
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j)
      rows.push_back({net.has_tie(i, j), change_vector(spec, net, Dyad{i, j})});
  return rows;
}

/// Design rows collapsed by covariate pattern into binomial counts.
struct PseudolikelihoodData {
  Eigen::MatrixXd covariates;  ///< one row per distinct change-statistic vector
  Eigen::VectorXd ties;        ///< number of ties among dyads with that pattern
  Eigen::VectorXd dyads;       ///< number of dyads with that pattern
};

inline PseudolikelihoodData collapse(const ModelSpec& spec, const Network& net) {
  check_compatible(spec, net);
  std::map<std::vector<double>, std::pair<double, double>> groups;
  const auto n = static_cast<std::uint32_t>(net.size());
  std::vector<double> change(spec.size());
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = i + 1; j < n; ++j) {
      const Dyad d{i, j};
      change_stats(spec, net, d, change);
      auto& g = groups[change];
      g.first += net.has_tie(d) ? 1.0 : 0.0;
      g.second += 1.0;
    }
  }
  PseudolikelihoodData data{
      Eigen::MatrixXd(static_cast<Eigen::Index>(groups.size()), static_cast<Eigen::Index>(spec.size())),
      Eigen::VectorXd(static_cast<Eigen::Index>(groups.size())),
      Eigen::VectorXd(static_cast<Eigen::Index>(groups.size()))};
  Eigen::Index r = 0;
  for (const auto& [x, counts] : groups) {
    for (std::size_t k = 0; k < x.size(); ++k) data.covariates(r, static_cast<Eigen::Index>(k)) = x[k];
    data.ties[r] = counts.first;
    data.dyads[r] = counts.second;
    ++r;
  }
  return data;
}

struct MpleOptions {
  double score_tolerance = 1e-8;
  double max_abs_theta = 50.0;  ///< beyond this the fit is declared separated
  int max_halvings = 30;
  int max_iterations = 200;
};

struct MpleResult {
  Theta theta;
  /// Inverse pseudo-information. Not a valid covariance for the ERGM
  /// parameter under dyad dependence; reported for diagnostics only.
  Eigen::MatrixXd covariance;
  bool converged = false;
  int iterations = 0;
  double max_abs_score = 0.0;
};

namespace detail {

inline double log1p_exp(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double inv_logit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log_pseudolikelihood(const PseudolikelihoodData& data, const Theta& theta) {
  const Eigen::VectorXd eta = data.covariates * theta;
  double ll = 0.0;
  for (Eigen::Index r = 0; r < eta.size(); ++r)
    ll += data.ties[r] * eta[r] - data.dyads[r] * log1p_exp(eta[r]);
  return ll;
}

}  // namespace detail

/// Logistic log-pseudolikelihood sum over dyads of y*eta - log(1 + e^eta).
inline double log_pseudolikelihood(const ModelSpec& spec, const Network& net,
                                   const Theta& theta) {
  return detail::log_pseudolikelihood(collapse(spec, net), theta);
}

/// Maximum pseudolikelihood estimate by damped Newton (IRLS) from theta = 0.
///
/// Throws SeparationError when the responses are all equal, when any
/// coordinate exceeds max_abs_theta, or when step-halving cannot improve the
/// objective; throws SingularInformationError for collinear statistics.
inline MpleResult mple(const PseudolikelihoodData& data, const MpleOptions& options = {}) {
  const Eigen::Index q = data.covariates.cols();
  const double ties = data.ties.sum();
  const double total = data.dyads.sum();
  if (ties == 0.0 || ties == total)
    throw SeparationError("all dyads share one response; pseudolikelihood has no maximiser");

  Theta theta = Theta::Zero(q);
  MpleResult out;
  double ll = detail::log_pseudolikelihood(data, theta);
  for (int it = 0; it <= options.max_iterations; ++it) {
    const Eigen::VectorXd eta = data.covariates * theta;
    Eigen::VectorXd resid(eta.size()), weight(eta.size());
    for (Eigen::Index r = 0; r < eta.size(); ++r) {
      const double p = detail::inv_logit(eta[r]);
      resid[r] = data.ties[r] - data.dyads[r] * p;
      weight[r] = data.dyads[r] * p * (1.0 - p);
    }
    const Eigen::VectorXd score = data.covariates.transpose() * resid;
    const Eigen::MatrixXd info =
        data.covariates.transpose() * weight.asDiagonal() * data.covariates;
    out.iterations = it;
    out.max_abs_score = score.lpNorm<Eigen::Infinity>();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
    const double top = eig.eigenvalues().maxCoeff();
    if (!(top > 0) || eig.eigenvalues().minCoeff() <= 1e-12 * top) {
      if (it == 0)
        throw SingularInformationError("pseudo-information is singular; statistics are collinear");
      throw SeparationError("pseudo-information became singular; fitted probabilities saturate");
    }
    const Eigen::VectorXd step = info.ldlt().solve(score);
    // Under separation the score decays while Newton steps stay O(1).
    if (out.max_abs_score <= options.score_tolerance &&
        step.lpNorm<Eigen::Infinity>() <= 1e-6 * std::max(1.0, theta.lpNorm<Eigen::Infinity>())) {
      out.theta = theta + step;
      out.covariance = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                       eig.eigenvectors().transpose();
      out.converged = true;
      return out;
    }
    double alpha = 1.0;
    bool improved = false;
    for (int half = 0; half <= options.max_halvings; ++half, alpha *= 0.5) {
      const Theta trial = theta + alpha * step;
      const double tll = detail::log_pseudolikelihood(data, trial);
      if (tll >= ll - 1e-13 * std::abs(ll)) {
        theta = trial;
        ll = tll;
        improved = true;
        break;
      }
    }
    if (!improved) {
      throw SeparationError("step-halving failed to improve the pseudolikelihood");
    }
    if (theta.lpNorm<Eigen::Infinity>() > options.max_abs_theta)
      throw SeparationError("MPLE coordinate exceeded " + std::to_string(options.max_abs_theta) +
                            "; responses are separated");
  }
  out.theta = theta;
  out.converged = false;
  return out;
}

inline MpleResult mple(const ModelSpec& spec, const Network& net,
                       const MpleOptions& options = {}) {
  return mple(collapse(spec, net), options);
}

/// One entry of an MPLE cloud; a failed fit carries its error message.
struct MpleOutcome {
  std::optional<MpleResult> result;
  std::string error;

  bool ok() const noexcept { return result.has_value() && result->converged; }
};

/// Per-network MPLEs; failures are recorded, not thrown.
inline std::vector<MpleOutcome> mple_cloud(const ModelSpec& spec,
                                           std::span<const Network> nets,
                                           const MpleOptions& options = {},
                                           unsigned threads = 1) {
  if (!nets.empty()) {
    for (const auto& net : nets)
      if (net.size() != nets.front().size())
        throw std::invalid_argument("mple_cloud requires networks on the same node set");
  }
  std::vector<MpleOutcome> out(nets.size());
  auto fit = [&](std::size_t k) {
    try {
      out[k].result = mple(spec, nets[k], options);
      if (!out[k].result->converged) out[k].error = "iteration limit reached";
    } catch (const std::exception& e) {
      out[k].error = e.what();
    }
  };
  if (threads <= 1) {
    for (std::size_t k = 0; k < nets.size(); ++k) fit(k);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < nets.size(); k += threads) fit(k);
      });
    for (auto& t : pool) t.join();
  }
  return out;
}

}  // namespace ergm
