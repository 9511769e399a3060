#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ergm {

/// Unordered node pair {i, j} with i < j.
struct Dyad {
  std::uint32_t i = 0;
  std::uint32_t j = 0;

  friend bool operator==(const Dyad&, const Dyad&) = default;
};

/// Number of unordered node pairs on n nodes.
constexpr std::uint64_t dyad_count(std::uint64_t n) noexcept {
  return n < 2 ? 0 : n * (n - 1) / 2;
}

/// Row-major linear index of dyad (i, j), i < j, over the upper triangle.
constexpr std::uint64_t dyad_index(std::uint64_t n, std::uint64_t i,
                                   std::uint64_t j) noexcept {
  return i * (2 * n - i - 1) / 2 + (j - i - 1);
}

/// Inverse of dyad_index.
inline Dyad dyad_from_index(std::uint64_t n, std::uint64_t index) {
  if (index >= dyad_count(n)) throw std::out_of_range("dyad index out of range");
  std::uint64_t i = 0;
  std::uint64_t row_len = n - 1;
  while (index >= row_len) {
    index -= row_len;
    ++i;
    --row_len;
  }
  return Dyad{static_cast<std::uint32_t>(i),
              static_cast<std::uint32_t>(i + 1 + index)};
}

/// Binary undirected network without self-loops.
///
/// Adjacency is stored as one bit row per node so that neighbourhood
/// intersections (shared partners, triangle change statistics) are word-level
/// popcounts. Degrees and the edge count are cached and kept consistent by
/// every mutation.
class Network {
 public:
  Network() = default;

  explicit Network(std::size_t n)
      : n_(n), words_((n + 63) / 64), bits_(n * words_, 0), degree_(n, 0) {}

  std::size_t size() const noexcept { return n_; }
  std::uint64_t edge_count() const noexcept { return edges_; }
  std::uint64_t dyads() const noexcept { return dyad_count(n_); }

  /// Throws std::out_of_range unless i != j and both are valid nodes.
  Dyad dyad(std::size_t i, std::size_t j) const {
    if (i >= n_ || j >= n_ || i == j) {
      throw std::out_of_range("invalid dyad (" + std::to_string(i) + ", " +
                              std::to_string(j) + ") for network of size " +
                              std::to_string(n_));
    }
    if (i > j) std::swap(i, j);
    return Dyad{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)};
  }

  bool has_tie(std::size_t i, std::size_t j) const noexcept {
    return (bits_[i * words_ + (j >> 6)] >> (j & 63)) & 1u;
  }
  bool has_tie(Dyad d) const noexcept { return has_tie(d.i, d.j); }

  std::uint32_t degree(std::size_t i) const noexcept { return degree_[i]; }
  std::span<const std::uint32_t> degrees() const noexcept { return degree_; }

  std::span<const std::uint64_t> row(std::size_t i) const noexcept {
    return {bits_.data() + i * words_, words_};
  }

  /// Number of nodes adjacent to both i and j.
  std::uint32_t shared_partners(std::size_t i, std::size_t j) const noexcept {
    const std::uint64_t* a = bits_.data() + i * words_;
    const std::uint64_t* b = bits_.data() + j * words_;
    std::uint32_t count = 0;
    for (std::size_t w = 0; w < words_; ++w) count += std::popcount(a[w] & b[w]);
    return count;
  }

  /// Flips the tie at d. Unchecked: d must be valid for this network.
  void toggle_unchecked(Dyad d) noexcept {
    const std::uint64_t mi = std::uint64_t{1} << (d.j & 63);
    const std::uint64_t mj = std::uint64_t{1} << (d.i & 63);
    std::uint64_t& wi = bits_[d.i * words_ + (d.j >> 6)];
    std::uint64_t& wj = bits_[d.j * words_ + (d.i >> 6)];
    wi ^= mi;
    wj ^= mj;
    if (wi & mi) {
      ++degree_[d.i];
      ++degree_[d.j];
      ++edges_;
    } else {
      --degree_[d.i];
      --degree_[d.j];
      --edges_;
    }
  }

  void toggle(std::size_t i, std::size_t j) { toggle_unchecked(dyad(i, j)); }
  void toggle(Dyad d) { toggle(d.i, d.j); }

  void set_tie(std::size_t i, std::size_t j, bool value) {
    const Dyad d = dyad(i, j);
    if (has_tie(d) != value) toggle_unchecked(d);
  }

  void clear() noexcept {
    std::fill(bits_.begin(), bits_.end(), 0);
    std::fill(degree_.begin(), degree_.end(), 0);
    edges_ = 0;
  }

  /// Ties as (i, j) pairs with i < j, in row-major order.
  std::vector<Dyad> ties() const {
    std::vector<Dyad> out;
    out.reserve(edges_);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t w = i >> 6; w < words_; ++w) {
        std::uint64_t word = bits_[i * words_ + w];
        while (word) {
          const std::size_t j = w * 64 + std::countr_zero(word);
          word &= word - 1;
          if (j > i) out.push_back({static_cast<std::uint32_t>(i),
                                    static_cast<std::uint32_t>(j)});
        }
      }
    }
    return out;
  }

  friend bool operator==(const Network& a, const Network& b) {
    return a.n_ == b.n_ && a.bits_ == b.bits_;
  }

 private:
  std::size_t n_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> bits_;
  std::vector<std::uint32_t> degree_;
  std::uint64_t edges_ = 0;
};

/// Value-level toggle: returns a copy of net with the tie at d flipped.
inline Network toggle(Network net, Dyad d) {
  net.toggle(d);
  return net;
}

/// Fraction of dyads that are ties. Requires at least two nodes.
inline double density(const Network& net) {
  if (net.size() < 2) throw std::invalid_argument("density requires n >= 2");
  return static_cast<double>(net.edge_count()) /
         static_cast<double>(net.dyads());
}

inline Network complete_network(std::size_t n) {
  Network net(n);
  const auto m = static_cast<std::uint32_t>(n);
  for (std::uint32_t i = 0; i < m; ++i)
    for (std::uint32_t j = i + 1; j < m; ++j) net.toggle_unchecked({i, j});
  return net;
}

/// Applies a node relabelling: node v of net becomes perm[v].
inline Network permute(const Network& net, std::span<const std::size_t> perm) {
  Network out(net.size());
  for (const Dyad& d : net.ties()) out.toggle(perm[d.i], perm[d.j]);
  return out;
}

}  // namespace ergm
