#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "ergm/errors.hpp"
#include "ergm/network.hpp"

namespace ergm {

using StatVector = Eigen::VectorXd;    ///< T(a), coordinate k matches term k.
using ChangeVector = Eigen::VectorXd;  ///< T(a with tie) - T(a without tie).
using Theta = Eigen::VectorXd;         ///< Natural parameter.

// ---------------------------------------------------------------------------
// Terms
// ---------------------------------------------------------------------------

struct Edges {};

struct Triangles {};

/// Sum over nodes of C(degree, k).
struct KStar {
  int k = 2;
};

/// Number of nodes with exactly `degree` ties.
struct DegreeCount {
  int degree = 0;
};

/// Geometrically weighted degree with fixed decay tau:
///
///   u(a) = e^tau * sum_{k>=1} [1 - (1 - e^-tau)^k] * D_k(a)
///
/// where D_k is the number of nodes of degree k. Adding a tie at a node of
/// current degree d changes that node's contribution by (1 - e^-tau)^d, which
/// gives the O(1) change statistic r^d_i + r^d_j with r = 1 - e^-tau.
class GwDegree {
 public:
  explicit GwDegree(double decay) : decay_(decay) {
    if (!(decay > 0.0) || !std::isfinite(decay))
      throw std::invalid_argument("gwdegree decay must be a positive real");
    ratio_ = -std::expm1(-decay);
    powers_.resize(kTable);
    double p = 1.0;
    for (auto& v : powers_) {
      v = p;
      p *= ratio_;
    }
  }

  double decay() const noexcept { return decay_; }
  double ratio() const noexcept { return ratio_; }

  /// (1 - e^-tau)^d
  double ratio_pow(std::uint32_t d) const noexcept {
    return d < kTable ? powers_[d] : std::pow(ratio_, static_cast<double>(d));
  }

  /// Contribution of a single node of degree d to u(a).
  double node_value(std::uint32_t d) const noexcept {
    return std::exp(decay_) * (1.0 - ratio_pow(d));
  }

 private:
  static constexpr std::uint32_t kTable = 4096;
  double decay_;
  double ratio_;
  std::vector<double> powers_;
};

/// Sum over ties {i,j} of covariate[i] + covariate[j].
struct NodeCovariateSum {
  std::vector<double> covariate;
  std::string label = "x";
};

using StatTerm =
    std::variant<Edges, Triangles, KStar, DegreeCount, GwDegree, NodeCovariateSum>;

inline bool is_integer_valued(const StatTerm& term) {
  return std::holds_alternative<Edges>(term) ||
         std::holds_alternative<Triangles>(term) ||
         std::holds_alternative<KStar>(term) ||
         std::holds_alternative<DegreeCount>(term);
}

inline std::string term_name(const StatTerm& term) {
  std::ostringstream os;
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, Edges>) os << "edges";
        else if constexpr (std::is_same_v<T, Triangles>) os << "triangle";
        else if constexpr (std::is_same_v<T, KStar>) os << "kstar" << t.k;
        else if constexpr (std::is_same_v<T, DegreeCount>) os << "degree" << t.degree;
        else if constexpr (std::is_same_v<T, GwDegree>) os << "gwdegree" << t.decay();
        else os << "nodecov." << t.label;
      },
      term);
  return os.str();
}

// ---------------------------------------------------------------------------
// ModelSpec
// ---------------------------------------------------------------------------

/// Ordered list of statistic terms; term k defines coordinate k of every
/// StatVector and Theta built against this spec.
class ModelSpec {
 public:
  ModelSpec() = default;

  explicit ModelSpec(std::vector<StatTerm> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw std::invalid_argument("model needs at least one term");
    for (const auto& t : terms_) {
      if (const auto* k = std::get_if<KStar>(&t); k && k->k < 2)
        throw std::invalid_argument("kstar requires k >= 2");
      if (const auto* d = std::get_if<DegreeCount>(&t); d && d->degree < 0)
        throw std::invalid_argument("degree requires d >= 0");
    }
  }

  std::size_t size() const noexcept { return terms_.size(); }
  const StatTerm& term(std::size_t k) const { return terms_.at(k); }
  const std::vector<StatTerm>& terms() const noexcept { return terms_; }

  bool integer_valued() const {
    for (const auto& t : terms_)
      if (!is_integer_valued(t)) return false;
    return true;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& t : terms_) out.push_back(term_name(t));
    return out;
  }

  /// Stable textual identity of the spec (covariate values included).
  std::string canonical() const {
    std::ostringstream os;
    os.precision(17);
    for (const auto& t : terms_) {
      os << term_name(t);
      if (const auto* c = std::get_if<NodeCovariateSum>(&t)) {
        os << '[';
        for (double v : c->covariate) os << v << ',';
        os << ']';
      }
      os << ';';
    }
    return os.str();
  }

  /// 64-bit FNV-1a digest of canonical().
  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical()) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  std::vector<StatTerm> terms_;
};

/// Reads one covariate value per node (whitespace separated).
inline std::vector<double> read_covariate_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open covariate file " + path.string());
  std::vector<double> out;
  double v;
  while (in >> v) out.push_back(v);
  if (!in.eof()) throw IoError("malformed covariate file " + path.string());
  return out;
}

/// Parses the declarative model format: one term per line,
///
///   edges | triangles | kstar <k>... | degree <d>... | gwdegree <decay> |
///   nodecov <file>
///
/// `#` starts a comment. Terms with several arguments expand to one
/// coordinate per argument (`degree 2 3 4 6` is four coordinates).
/// Relative covariate paths resolve against base_dir.
inline ModelSpec parse_model(std::istream& in,
                             const std::filesystem::path& base_dir = {}) {
  std::vector<StatTerm> terms;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) { throw ParseError(line_no, "model: " + what); };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string name;
    if (!(ls >> name)) continue;
    std::vector<std::string> args;
    for (std::string a; ls >> a;) args.push_back(a);
    auto int_args = [&]() {
      if (args.empty()) fail(name + " needs at least one argument");
      std::vector<int> out;
      for (const auto& a : args) {
        std::size_t used = 0;
        int v = 0;
        try {
          v = std::stoi(a, &used);
        } catch (const std::exception&) {
          fail("bad integer '" + a + "'");
        }
        if (used != a.size()) fail("bad integer '" + a + "'");
        out.push_back(v);
      }
      return out;
    };
    if (name == "edges") {
      if (!args.empty()) fail("edges takes no arguments");
      terms.emplace_back(Edges{});
    } else if (name == "triangles" || name == "triangle") {
      if (!args.empty()) fail("triangles takes no arguments");
      terms.emplace_back(Triangles{});
    } else if (name == "kstar") {
      for (int k : int_args()) {
        if (k < 2) fail("kstar requires k >= 2");
        terms.emplace_back(KStar{k});
      }
    } else if (name == "degree") {
      for (int d : int_args()) {
        if (d < 0) fail("degree requires d >= 0");
        terms.emplace_back(DegreeCount{d});
      }
    } else if (name == "gwdegree") {
      if (args.size() != 1) fail("gwdegree takes exactly one decay value");
      double decay = 0;
      try {
        decay = std::stod(args[0]);
      } catch (const std::exception&) {
        fail("bad decay '" + args[0] + "'");
      }
      try {
        terms.emplace_back(GwDegree(decay));
      } catch (const std::invalid_argument& e) {
        fail(e.what());
      }
    } else if (name == "nodecov") {
      if (args.size() != 1) fail("nodecov takes exactly one file");
      std::filesystem::path p = args[0];
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      terms.emplace_back(
          NodeCovariateSum{read_covariate_file(p), p.stem().string()});
    } else {
      fail("unknown term '" + name + "'");
    }
  }
  if (terms.empty()) throw ParseError(line_no, "model has no terms");
  return ModelSpec(std::move(terms));
}

inline ModelSpec parse_model(const std::string& text) {
  std::istringstream in(text);
  return parse_model(in);
}

inline ModelSpec load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file " + path.string());
  return parse_model(in, path.parent_path());
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

namespace detail {

inline double binomial(std::uint32_t n, int k) {
  if (k < 0 || static_cast<std::uint32_t>(k) > n) return 0.0;
  double r = 1.0;
  for (int m = 1; m <= k; ++m) r = r * static_cast<double>(n - k + m) / m;
  return std::round(r);
}

inline void check_covariate(const NodeCovariateSum& c, const Network& net) {
  if (c.covariate.size() != net.size())
    throw std::invalid_argument("nodecov '" + c.label + "' has " +
                                std::to_string(c.covariate.size()) +
                                " values for a network of " +
                                std::to_string(net.size()) + " nodes");
}

}  // namespace detail

/// T(net) computed from scratch.
inline StatVector stat_vector(const ModelSpec& spec, const Network& net) {
  StatVector out = StatVector::Zero(static_cast<Eigen::Index>(spec.size()));
  const std::size_t n = net.size();
  for (std::size_t k = 0; k < spec.size(); ++k) {
    double v = 0.0;
    std::visit(
        [&](const auto& t) {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, Edges>) {
            v = static_cast<double>(net.edge_count());
          } else if constexpr (std::is_same_v<T, Triangles>) {
            std::uint64_t closed = 0;
            for (const Dyad& d : net.ties()) closed += net.shared_partners(d.i, d.j);
            v = static_cast<double>(closed / 3);
          } else if constexpr (std::is_same_v<T, KStar>) {
            for (std::size_t i = 0; i < n; ++i) v += detail::binomial(net.degree(i), t.k);
          } else if constexpr (std::is_same_v<T, DegreeCount>) {
            for (std::size_t i = 0; i < n; ++i)
              v += net.degree(i) == static_cast<std::uint32_t>(t.degree) ? 1.0 : 0.0;
          } else if constexpr (std::is_same_v<T, GwDegree>) {
            for (std::size_t i = 0; i < n; ++i) v += t.node_value(net.degree(i));
          } else {
            detail::check_covariate(t, net);
            for (std::size_t i = 0; i < n; ++i) v += t.covariate[i] * net.degree(i);
          }
        },
        spec.term(k));
    out[static_cast<Eigen::Index>(k)] = v;
  }
  return out;
}

/// Throws if a term cannot be evaluated on net (covariate length mismatch).
/// change_stats skips this check; callers run it once per network.
inline void check_compatible(const ModelSpec& spec, const Network& net) {
  for (const auto& t : spec.terms())
    if (const auto* c = std::get_if<NodeCovariateSum>(&t)) detail::check_covariate(*c, net);
}

/// Writes T(net with d = 1) - T(net with d = 0) into out (length q) using the
/// per-term incremental rules. Cost is O(1) per term except triangles, which
/// is O(n / 64).
inline void change_stats(const ModelSpec& spec, const Network& net, Dyad d,
                         std::span<double> out) {
  const std::uint32_t tie = net.has_tie(d) ? 1u : 0u;
  const std::uint32_t di = net.degree(d.i) - tie;
  const std::uint32_t dj = net.degree(d.j) - tie;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    out[k] = std::visit(
        [&](const auto& t) -> double {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, Edges>) {
            return 1.0;
          } else if constexpr (std::is_same_v<T, Triangles>) {
            return net.shared_partners(d.i, d.j);
          } else if constexpr (std::is_same_v<T, KStar>) {
            return detail::binomial(di, t.k - 1) + detail::binomial(dj, t.k - 1);
          } else if constexpr (std::is_same_v<T, DegreeCount>) {
            const auto target = static_cast<std::uint32_t>(t.degree);
            return static_cast<double>((di + 1 == target) + (dj + 1 == target)) -
                   static_cast<double>((di == target) + (dj == target));
          } else if constexpr (std::is_same_v<T, GwDegree>) {
            return t.ratio_pow(di) + t.ratio_pow(dj);
          } else {
            return t.covariate[d.i] + t.covariate[d.j];
          }
        },
        spec.term(k));
  }
}

inline ChangeVector change_vector(const ModelSpec& spec, const Network& net, Dyad d) {
  check_compatible(spec, net);
  ChangeVector out(static_cast<Eigen::Index>(spec.size()));
  change_stats(spec, net, d, {out.data(), spec.size()});
  return out;
}

/// Signed increment of T when d is toggled: +change if d is currently empty,
/// -change if d is currently a tie.
inline StatVector stat_delta_on_toggle(const ModelSpec& spec, const Network& net,
                                       Dyad d) {
  StatVector out = change_vector(spec, net, d);
  if (net.has_tie(d)) out = -out;
  return out;
}

}  // namespace ergm
