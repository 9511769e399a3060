#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "ergm/model.hpp"
#include "ergm/network.hpp"
#include "ergm/rng.hpp"

namespace ergm {

/// Exact multiplicity table: every distinct value of T over all networks on n
/// nodes, with the number of networks attaining it.
struct EnumerationTable {
  ModelSpec spec;
  std::size_t n = 0;
  Eigen::MatrixXd support;             ///< one row per distinct T value
  std::vector<std::uint64_t> counts;   ///< multiplicity of each row

  std::size_t entries() const noexcept { return counts.size(); }
  std::size_t dimension() const noexcept { return spec.size(); }

  /// Sum of multiplicities; equals 2^dyads for a complete table.
  uint128 total() const {
    uint128 s = 0;
    for (auto c : counts) s += c;
    return s;
  }
};

struct EnumerateOptions {
  std::size_t max_n = 9;
  unsigned threads = 0;     ///< 0 = hardware concurrency
  unsigned split_bits = 0;  ///< 0 = automatic; top dyads fixed per sub-sweep
};

class EnumerationLimitError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

/// Continuous statistics are keyed on a 1e-9 grid.
inline constexpr double kQuantum = 1e-9;

/// Adjacency for n <= 64 held in single words per row.
struct SmallGraph {
  std::uint64_t rows[64] = {};
  std::uint32_t deg[64] = {};

  bool tie(std::uint32_t i, std::uint32_t j) const noexcept {
    return (rows[i] >> j) & 1u;
  }
  template <bool kDegrees = true>
  void toggle(std::uint32_t i, std::uint32_t j) noexcept {
    rows[i] ^= std::uint64_t{1} << j;
    rows[j] ^= std::uint64_t{1} << i;
    if constexpr (kDegrees) {
      const bool now = tie(i, j);
      deg[i] += now ? 1 : -1;
      deg[j] += now ? 1 : -1;
    }
  }
};

enum class Kind : std::uint8_t { Edges, Triangles, KStar, Degree };

struct IntTerm {
  Kind kind;
  int param;
  std::int64_t upper;  ///< largest attainable value on n nodes
};

inline std::int64_t choose_int(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return 0;
  std::int64_t r = 1;
  for (std::int64_t m = 1; m <= k; ++m) r = r * (n - k + m) / m;
  return r;
}

inline std::vector<IntTerm> integer_terms(const ModelSpec& spec, std::size_t n) {
  std::vector<IntTerm> out;
  const auto nn = static_cast<std::int64_t>(n);
  for (const auto& t : spec.terms()) {
    if (std::holds_alternative<Edges>(t)) {
      out.push_back({Kind::Edges, 0, nn * (nn - 1) / 2});
    } else if (std::holds_alternative<Triangles>(t)) {
      out.push_back({Kind::Triangles, 0, choose_int(nn, 3)});
    } else if (const auto* k = std::get_if<KStar>(&t)) {
      out.push_back({Kind::KStar, k->k, nn * choose_int(nn - 1, k->k)});
    } else if (const auto* d = std::get_if<DegreeCount>(&t)) {
      out.push_back({Kind::Degree, d->degree, nn});
    }
  }
  return out;
}

/// Binomial lookup C(d, m) for d < 64.
struct BinomialTable {
  std::int64_t value[65][65] = {};
  BinomialTable() {
    for (int d = 0; d <= 64; ++d) {
      value[d][0] = 1;
      for (int m = 1; m <= d; ++m)
        value[d][m] = value[d - 1][m - 1] + (m <= d - 1 ? value[d - 1][m] : 0);
    }
  }
};

inline const BinomialTable& binomials() {
  static const BinomialTable table;
  return table;
}

/// Every integer term's change statistic splits into a constant, a multiple of
/// the shared-partner count of the dyad, and a per-endpoint function of the
/// endpoint's degree (excluding the dyad itself). Folding the terms' index
/// strides into that form gives a branch-free index update per toggle.
struct IndexStep {
  std::int64_t constant = 0;
  std::int64_t per_shared_partner = 0;
  std::int64_t per_degree[65] = {};
  bool uses_degrees = false;

  IndexStep(const std::vector<IntTerm>& terms, const std::vector<std::int64_t>& stride) {
    const auto& b = binomials().value;
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const IntTerm& t = terms[k];
      switch (t.kind) {
        case Kind::Edges:
          constant += stride[k];
          break;
        case Kind::Triangles:
          per_shared_partner += stride[k];
          break;
        case Kind::KStar:
          uses_degrees = true;
          for (int d = 0; d <= 64; ++d)
            if (t.param - 1 <= d) per_degree[d] += stride[k] * b[d][t.param - 1];
          break;
        case Kind::Degree:
          uses_degrees = true;
          for (int d = 0; d <= 64; ++d)
            per_degree[d] += stride[k] * ((d + 1 == t.param) - (d == t.param));
          break;
      }
    }
  }
};

/// Sweeps all 2^L states of the lowest L dyads in Gray-code order; `visit`
/// sees the initial state and then every state after each single toggle.
/// `before_toggle(i, j)` runs before the graph is modified.
template <bool kDegrees = true, class BeforeToggle, class Visit>
void gray_sweep(SmallGraph& g, const std::vector<Dyad>& low, BeforeToggle&& before_toggle,
                Visit&& visit) {
  visit();
  const std::uint64_t states = std::uint64_t{1} << low.size();
  const Dyad* dyads = low.data();
  for (std::uint64_t k = 1; k < states; ++k) {
    const Dyad d = dyads[std::countr_zero(k)];
    before_toggle(d.i, d.j);
    g.toggle<kDegrees>(d.i, d.j);
    visit();
  }
}

struct VectorKeyHash {
  std::size_t operator()(const std::vector<std::int64_t>& v) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (auto x : v) {
      h ^= static_cast<std::uint64_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

using KeyedCounts =
    std::unordered_map<std::vector<std::int64_t>, std::uint64_t, VectorKeyHash>;

inline SmallGraph prefix_graph(const std::vector<Dyad>& high, std::uint64_t prefix) {
  SmallGraph g;
  for (std::size_t b = 0; b < high.size(); ++b)
    if ((prefix >> b) & 1u) g.toggle(high[b].i, high[b].j);
  return g;
}

inline Network to_network(const SmallGraph& g, std::size_t n) {
  Network net(n);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j)
      if (g.tie(i, j)) net.toggle_unchecked({i, j});
  return net;
}

/// Runs `task(prefix)` for every prefix in [0, count) on `threads` workers.
template <class Task>
void for_each_prefix(std::uint64_t count, unsigned threads, Task&& task) {
  std::atomic<std::uint64_t> next{0};
  auto worker = [&](unsigned w) {
    for (std::uint64_t p = next.fetch_add(1); p < count; p = next.fetch_add(1)) task(w, p);
  };
  if (threads <= 1) {
    worker(0);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker, w);
  for (auto& t : pool) t.join();
}

inline EnumerationTable table_from_keys(const ModelSpec& spec, std::size_t n,
                                        const KeyedCounts& merged,
                                        const std::vector<double>& scale) {
  std::vector<std::pair<std::vector<std::int64_t>, std::uint64_t>> rows(merged.begin(),
                                                                      merged.end());
  std::sort(rows.begin(), rows.end());
  EnumerationTable table{spec, n, Eigen::MatrixXd(rows.size(), spec.size()), {}};
  table.counts.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < spec.size(); ++k)
      table.support(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
          static_cast<double>(rows[r].first[k]) * scale[k];
    table.counts.push_back(rows[r].second);
  }
  return table;
}

/// All-integer specs: the statistic vector maps to a mixed-radix index that is
/// itself updated incrementally, so each state costs one counter increment.
inline EnumerationTable enumerate_integer(const ModelSpec& spec, std::size_t n,
                                          unsigned threads, unsigned split_bits) {
  const auto terms = integer_terms(spec, n);
  const std::size_t q = terms.size();
  std::vector<std::int64_t> stride(q);
  long double cells = 1;
  for (std::size_t k = q; k-- > 0;) {
    stride[k] = static_cast<std::int64_t>(cells);
    cells *= static_cast<long double>(terms[k].upper + 1);
  }
  const bool dense = cells <= static_cast<long double>(1u << 22);
  const bool needs_degrees = std::any_of(terms.begin(), terms.end(), [](const IntTerm& t) {
    return t.kind == Kind::KStar || t.kind == Kind::Degree;
  });
  if (!dense && cells > static_cast<long double>(std::numeric_limits<std::int64_t>::max()))
    throw EnumerationLimitError("statistic range too large to index");

  const std::uint64_t dyads = dyad_count(n);
  std::vector<Dyad> low, high;
  for (std::uint64_t d = 0; d < dyads; ++d)
    (d < dyads - split_bits ? low : high).push_back(dyad_from_index(n, d));

  std::vector<std::vector<std::uint64_t>> dense_counts(
      threads, std::vector<std::uint64_t>(dense ? static_cast<std::size_t>(cells) : 0));
  std::vector<std::unordered_map<std::int64_t, std::uint64_t>> sparse_counts(threads);

  for_each_prefix(std::uint64_t{1} << high.size(), threads, [&](unsigned w, std::uint64_t p) {
    SmallGraph g = prefix_graph(high, p);
    const StatVector start = stat_vector(spec, to_network(g, n));
    std::int64_t index = 0;
    for (std::size_t k = 0; k < q; ++k)
      index += static_cast<std::int64_t>(std::llround(start[static_cast<Eigen::Index>(k)])) *
               stride[k];
    const IndexStep step(terms, stride);
    auto before = [&](std::uint32_t i, std::uint32_t j) {
      const bool tie = g.tie(i, j);
      std::int64_t delta =
          step.constant + step.per_shared_partner * std::popcount(g.rows[i] & g.rows[j]);
      if (step.uses_degrees)
        delta += step.per_degree[g.deg[i] - tie] + step.per_degree[g.deg[j] - tie];
      index += tie ? -delta : delta;
    };
    if (dense && !needs_degrees) {
      std::uint64_t* counts = dense_counts[w].data();
      gray_sweep<false>(g, low, before, [&] { ++counts[index]; });
    } else if (dense) {
      std::uint64_t* counts = dense_counts[w].data();
      gray_sweep(g, low, before, [&] { ++counts[index]; });
    } else {
      auto& counts = sparse_counts[w];
      gray_sweep(g, low, before, [&] { ++counts[index]; });
    }
  });

  KeyedCounts merged;
  auto add = [&](std::int64_t index, std::uint64_t c) {
    std::vector<std::int64_t> key(q);
    for (std::size_t k = 0; k < q; ++k) {
      key[k] = index / stride[k];
      index %= stride[k];
    }
    merged[key] += c;
  };
  for (unsigned w = 0; w < threads; ++w) {
    if (dense) {
      for (std::size_t idx = 0; idx < dense_counts[w].size(); ++idx)
        if (dense_counts[w][idx]) add(static_cast<std::int64_t>(idx), dense_counts[w][idx]);
    } else {
      for (const auto& [idx, c] : sparse_counts[w]) add(idx, c);
    }
  }
  return table_from_keys(spec, n, merged, std::vector<double>(q, 1.0));
}

/// Specs with continuous terms: T is carried in doubles via the generic
/// incremental change statistics, re-synchronised from scratch periodically,
/// and keyed on a fixed grid.
inline EnumerationTable enumerate_generic(const ModelSpec& spec, std::size_t n,
                                          unsigned threads, unsigned split_bits) {
  const std::size_t q = spec.size();
  std::vector<double> scale(q, 1.0);
  for (std::size_t k = 0; k < q; ++k)
    if (!is_integer_valued(spec.term(k))) scale[k] = kQuantum;

  const std::uint64_t dyads = dyad_count(n);
  std::vector<Dyad> low, high;
  for (std::uint64_t d = 0; d < dyads; ++d)
    (d < dyads - split_bits ? low : high).push_back(dyad_from_index(n, d));

  std::vector<KeyedCounts> local(threads);
  std::mutex unused;
  for_each_prefix(std::uint64_t{1} << high.size(), threads, [&](unsigned w, std::uint64_t p) {
    SmallGraph g = prefix_graph(high, p);
    Network net = to_network(g, n);
    StatVector t = stat_vector(spec, net);
    std::vector<double> change(q);
    std::vector<std::int64_t> key(q);
    std::uint64_t steps = 0;
    auto before = [&](std::uint32_t i, std::uint32_t j) {
      const Dyad d{i, j};
      change_stats(spec, net, d, change);
      const double sign = net.has_tie(d) ? -1.0 : 1.0;
      for (std::size_t k = 0; k < q; ++k) t[static_cast<Eigen::Index>(k)] += sign * change[k];
      net.toggle_unchecked(d);
      if (++steps % 4096 == 0) t = stat_vector(spec, net);
    };
    gray_sweep(g, low, before, [&] {
      for (std::size_t k = 0; k < q; ++k)
        key[k] = std::llround(t[static_cast<Eigen::Index>(k)] / scale[k]);
      ++local[w][key];
    });
  });
  KeyedCounts merged;
  for (auto& m : local)
    for (auto& [key, c] : m) merged[key] += c;
  return table_from_keys(spec, n, merged, scale);
}

}  // namespace detail

/// Visits every network on n nodes once, in Gray-code order over dyads, and
/// tabulates the multiplicity of each statistic value. The top `split_bits`
/// dyads are fixed per sub-sweep so sub-sweeps can run on separate threads.
inline EnumerationTable enumerate(const ModelSpec& spec, std::size_t n,
                                  const EnumerateOptions& options = {}) {
  if (n < 2) throw std::invalid_argument("enumeration needs n >= 2");
  if (n > options.max_n)
    throw EnumerationLimitError("n = " + std::to_string(n) + " exceeds enumeration guard " +
                                std::to_string(options.max_n));
  if (n > 11) throw EnumerationLimitError("enumeration supports n <= 11");
  for (const auto& t : spec.terms())
    if (const auto* c = std::get_if<NodeCovariateSum>(&t); c && c->covariate.size() != n)
      throw std::invalid_argument("nodecov size does not match n");

  const unsigned dyads = static_cast<unsigned>(dyad_count(n));
  unsigned threads = options.threads ? options.threads
                                     : std::max(1u, std::thread::hardware_concurrency());
  unsigned split = options.split_bits;
  if (split == 0) split = dyads > 20 ? 8 : 0;
  split = std::min(split, dyads);
  threads = std::max(1u, std::min<unsigned>(threads, 1u << split));
  return spec.integer_valued() ? detail::enumerate_integer(spec, n, threads, split)
                               : detail::enumerate_generic(spec, n, threads, split);
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

namespace detail {
inline constexpr char kCacheMagic[8] = {'E', 'R', 'G', 'M', 'T', 'A', 'B', '1'};
inline constexpr std::uint32_t kCacheVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated enumeration cache");
  return v;
}
}  // namespace detail

/// Binary layout (little-endian host order):
///   magic[8] "ERGMTAB1", u32 version, u32 q, u64 spec fingerprint, u64 n,
///   u64 entry count, then per entry: q x f64 statistic values, u64 count.
inline void save_table(const std::filesystem::path& path, const EnumerationTable& table) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write cache " + tmp.string());
    out.write(detail::kCacheMagic, sizeof detail::kCacheMagic);
    detail::put<std::uint32_t>(out, detail::kCacheVersion);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(table.dimension()));
    detail::put<std::uint64_t>(out, table.spec.fingerprint());
    detail::put<std::uint64_t>(out, table.n);
    detail::put<std::uint64_t>(out, table.entries());
    for (std::size_t r = 0; r < table.entries(); ++r) {
      for (std::size_t k = 0; k < table.dimension(); ++k)
        detail::put<double>(out, table.support(static_cast<Eigen::Index>(r),
                                               static_cast<Eigen::Index>(k)));
      detail::put<std::uint64_t>(out, table.counts[r]);
    }
    if (!out) throw IoError("failed writing cache " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Loads a cached table; returns nullopt if the file is absent or was built
/// for a different spec or n.
inline std::optional<EnumerationTable> load_table(const std::filesystem::path& path,
                                                  const ModelSpec& spec, std::size_t n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, detail::kCacheMagic, sizeof magic) != 0) return std::nullopt;
  if (detail::get<std::uint32_t>(in) != detail::kCacheVersion) return std::nullopt;
  const auto q = detail::get<std::uint32_t>(in);
  const auto fp = detail::get<std::uint64_t>(in);
  const auto cached_n = detail::get<std::uint64_t>(in);
  if (q != spec.size() || fp != spec.fingerprint() || cached_n != n) return std::nullopt;
  const auto entries = detail::get<std::uint64_t>(in);
  EnumerationTable table{spec, n, Eigen::MatrixXd(entries, q), {}};
  table.counts.resize(entries);
  for (std::uint64_t r = 0; r < entries; ++r) {
    for (std::uint32_t k = 0; k < q; ++k)
      table.support(static_cast<Eigen::Index>(r), k) = detail::get<double>(in);
    table.counts[r] = detail::get<std::uint64_t>(in);
  }
  return table;
}

inline std::filesystem::path cache_path(const std::filesystem::path& dir,
                                        const ModelSpec& spec, std::size_t n) {
  char name[64];
  std::snprintf(name, sizeof name, "enum-%016llx-n%zu.bin",
                static_cast<unsigned long long>(spec.fingerprint()), n);
  return dir / name;
}

/// Returns the cached table for (spec, n) under dir, enumerating and writing
/// it on a miss.
inline EnumerationTable load_or_enumerate(const std::filesystem::path& dir,
                                          const ModelSpec& spec, std::size_t n,
                                          const EnumerateOptions& options = {}) {
  const auto path = cache_path(dir, spec, n);
  if (auto cached = load_table(path, spec, n)) return std::move(*cached);
  EnumerationTable table = enumerate(spec, n, options);
  std::filesystem::create_directories(dir);
  save_table(path, table);
  return table;
}

// ---------------------------------------------------------------------------
// Exact likelihood quantities
// ---------------------------------------------------------------------------

namespace detail {

/// Normalised weights mult(t) e^{theta.t} / k(theta) and log k(theta).
inline double exact_weights(const EnumerationTable& table, const Theta& theta,
                            Eigen::VectorXd& weights) {
  const Eigen::Index rows = table.support.rows();
  Eigen::VectorXd logw = table.support * theta;
  for (Eigen::Index r = 0; r < rows; ++r)
    logw[r] += std::log(static_cast<double>(table.counts[static_cast<std::size_t>(r)]));
  const double top = logw.maxCoeff();
  weights = (logw.array() - top).exp();
  const double sum = weights.sum();
  weights /= sum;
  return top + std::log(sum);
}

}  // namespace detail

/// log k(theta) = log sum_t mult(t) exp(theta . t).
inline double log_normalizer(const EnumerationTable& table, const Theta& theta) {
  Eigen::VectorXd w;
  return detail::exact_weights(table, theta, w);
}

/// Mean-value map mu(theta) = E_theta[T] = grad log k(theta).
inline StatVector mean_value_exact(const EnumerationTable& table, const Theta& theta) {
  Eigen::VectorXd w;
  detail::exact_weights(table, theta, w);
  return table.support.transpose() * w;
}

/// Cov_theta[T], the Hessian of log k.
inline Eigen::MatrixXd covariance_exact(const EnumerationTable& table, const Theta& theta) {
  Eigen::VectorXd w;
  detail::exact_weights(table, theta, w);
  const StatVector mu = table.support.transpose() * w;
  const Eigen::MatrixXd centered = table.support.rowwise() - mu.transpose();
  return centered.transpose() * w.asDiagonal() * centered;
}

/// Exact log-likelihood theta . t_obs - log k(theta).
inline double exact_loglik(const EnumerationTable& table, const Theta& theta,
                           const StatVector& t_obs) {
  return theta.dot(t_obs) - log_normalizer(table, theta);
}

/// Probability of one specific network with statistic t.
inline double network_probability(const EnumerationTable& table, const Theta& theta,
                                  const StatVector& t) {
  return std::exp(theta.dot(t) - log_normalizer(table, theta));
}

struct HullTest {
  bool interior = false;
  Eigen::VectorXd recession;  ///< unit direction d with d.(t - t_obs) <= 0 on the support
};

namespace detail {

struct MinNormResult {
  bool separated = false;
  Eigen::VectorXd point;  ///< nearest point of the hull to the origin (when separated)
};

/// Wolfe's minimum-norm-point iteration over conv(points). Stops early as soon
/// as a support point certifies that the origin is strictly outside.
inline MinNormResult min_norm_point(const Eigen::MatrixXd& points, double tol) {
  std::vector<Eigen::Index> corral;
  Eigen::VectorXd lambda;
  Eigen::Index start = 0;
  points.rowwise().squaredNorm().minCoeff(&start);
  corral.push_back(start);
  lambda = Eigen::VectorXd::Ones(1);
  Eigen::VectorXd x = points.row(start).transpose();

  for (int major = 0; major < 10000; ++major) {
    if (x.norm() <= tol) return {false, x};
    Eigen::Index j = 0;
    const double best = (points * x).minCoeff(&j);
    if (best > tol * x.norm()) return {true, x};
    if (x.squaredNorm() - best <= tol * tol) return {x.norm() > tol, x};
    if (std::find(corral.begin(), corral.end(), j) != corral.end()) return {x.norm() > tol, x};
    corral.push_back(j);
    lambda.conservativeResize(static_cast<Eigen::Index>(corral.size()));
    lambda[lambda.size() - 1] = 0.0;

    for (int minor = 0; minor < 1000; ++minor) {
      const auto c = static_cast<Eigen::Index>(corral.size());
      Eigen::MatrixXd p(c, points.cols());
      for (Eigen::Index r = 0; r < c; ++r) p.row(r) = points.row(corral[static_cast<std::size_t>(r)]);
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(c + 1, c + 1);
      kkt.topLeftCorner(c, c) = p * p.transpose();
      kkt.block(0, c, c, 1).setOnes();
      kkt.block(c, 0, 1, c).setOnes();
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(c + 1);
      rhs[c] = 1.0;
      const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
      const Eigen::VectorXd mu = sol.head(c);
      if ((mu.array() > 1e-14).all()) {
        lambda = mu;
        x = p.transpose() * lambda;
        break;
      }
      double step = 1.0;
      for (Eigen::Index r = 0; r < c; ++r)
        if (mu[r] <= 1e-14 && lambda[r] - mu[r] > 0) step = std::min(step, lambda[r] / (lambda[r] - mu[r]));
      lambda = lambda + step * (mu - lambda);
      std::vector<Eigen::Index> kept;
      std::vector<double> kept_lambda;
      for (Eigen::Index r = 0; r < c; ++r) {
        if (lambda[r] > 1e-14) {
          kept.push_back(corral[static_cast<std::size_t>(r)]);
          kept_lambda.push_back(lambda[r]);
        }
      }
      corral = kept;
      lambda = Eigen::Map<Eigen::VectorXd>(kept_lambda.data(), static_cast<Eigen::Index>(kept_lambda.size()));
      lambda /= lambda.sum();
      Eigen::MatrixXd q(static_cast<Eigen::Index>(corral.size()), points.cols());
      for (std::size_t r = 0; r < corral.size(); ++r) q.row(static_cast<Eigen::Index>(r)) = points.row(corral[r]);
      x = q.transpose() * lambda;
    }
  }
  return {x.norm() > tol, x};
}

}  // namespace detail

/// Decides whether t_obs lies strictly inside the convex hull of the table's
/// support. t_obs is interior iff it and its 2q axis perturbations of size
/// delta (in range-normalised coordinates) are all inside the hull; any
/// perturbation that separates yields a recession direction.
inline HullTest hull_interior(const EnumerationTable& table, const StatVector& t_obs,
                              double delta = 1e-6) {
  const Eigen::Index q = static_cast<Eigen::Index>(table.dimension());
  Eigen::VectorXd scale(q);
  for (Eigen::Index k = 0; k < q; ++k) {
    const double range = table.support.col(k).maxCoeff() - table.support.col(k).minCoeff();
    scale[k] = std::max(1.0, range);
  }
  const Eigen::MatrixXd scaled = table.support * scale.cwiseInverse().asDiagonal();
  const Eigen::VectorXd target = t_obs.cwiseQuotient(scale);
  const double tol = 1e-3 * delta;

  auto separates = [&](const Eigen::VectorXd& p) -> std::optional<Eigen::VectorXd> {
    const Eigen::MatrixXd shifted = scaled.rowwise() - p.transpose();
    auto r = detail::min_norm_point(shifted, tol);
    if (!r.separated) return std::nullopt;
    Eigen::VectorXd dir = (-r.point).cwiseQuotient(scale);
    return dir / dir.norm();
  };

  HullTest out;
  if (auto d = separates(target)) {
    out.recession = *d;
    return out;
  }
  for (Eigen::Index k = 0; k < q; ++k) {
    for (double sign : {-1.0, 1.0}) {
      Eigen::VectorXd p = target;
      p[k] += sign * delta;
      if (auto d = separates(p)) {
        out.recession = *d;
        return out;
      }
    }
  }
  out.interior = true;
  return out;
}

struct ExactMleResult {
  Theta theta;
  double loglik = -std::numeric_limits<double>::infinity();
  StatVector mean_value;
  bool exists = false;
  Eigen::VectorXd recession;  ///< set when !exists
  int iterations = 0;
  double max_abs_gradient = std::numeric_limits<double>::infinity();
};

/// Exact MLE by Newton's method on the concave exact log-likelihood, i.e. the
/// solution of mu(theta) = t_obs.
inline ExactMleResult exact_mle(const EnumerationTable& table, const StatVector& t_obs,
                                double gradient_tol = 1e-10, int max_iterations = 500) {
  ExactMleResult out;
  const auto q = static_cast<Eigen::Index>(table.dimension());
  if (t_obs.size() != q) throw std::invalid_argument("t_obs dimension mismatch");
  const HullTest hull = hull_interior(table, t_obs);
  if (!hull.interior) {
    out.recession = hull.recession;
    out.theta = Theta::Constant(q, std::numeric_limits<double>::quiet_NaN());
    return out;
  }
  out.exists = true;
  Theta theta = Theta::Zero(q);
  Eigen::VectorXd w;
  double logk = detail::exact_weights(table, theta, w);
  double ll = theta.dot(t_obs) - logk;
  for (int it = 0; it < max_iterations; ++it) {
    const StatVector mu = table.support.transpose() * w;
    const Eigen::VectorXd grad = t_obs - mu;
    out.max_abs_gradient = grad.lpNorm<Eigen::Infinity>();
    out.iterations = it;
    if (out.max_abs_gradient <= gradient_tol) break;
    const Eigen::MatrixXd centered = table.support.rowwise() - mu.transpose();
    const Eigen::MatrixXd info = centered.transpose() * w.asDiagonal() * centered;
    Eigen::VectorXd step = info.ldlt().solve(grad);
    if (!step.allFinite()) step = grad;
    double alpha = 1.0;
    for (int half = 0; half < 60; ++half, alpha *= 0.5) {
      const Theta trial = theta + alpha * step;
      Eigen::VectorXd tw;
      const double tlogk = detail::exact_weights(table, trial, tw);
      const double tll = trial.dot(t_obs) - tlogk;
      if (tll >= ll - 1e-14 * std::abs(ll)) {
        theta = trial;
        w = std::move(tw);
        ll = tll;
        break;
      }
    }
  }
  out.theta = theta;
  out.loglik = ll;
  out.mean_value = table.support.transpose() * w;
  out.max_abs_gradient = (t_obs - out.mean_value).lpNorm<Eigen::Infinity>();
  return out;
}

}  // namespace ergm
