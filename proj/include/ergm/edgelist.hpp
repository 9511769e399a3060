#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ergm/errors.hpp"
#include "ergm/network.hpp"

namespace ergm {

enum class Preprocessing {
  AsIs,               ///< input already undirected; repeats are duplicates
  UndirectedNoLoops,  ///< directed input; reciprocal arcs merge, self-arcs drop
};

struct LoadReport {
  std::size_t lines = 0;          ///< edge lines read
  std::size_t duplicates = 0;     ///< repeated identical lines
  std::size_t self_loops = 0;     ///< i == j lines dropped
  std::size_t merged = 0;         ///< reverse arcs folded into an existing tie
};

struct LoadedNetwork {
  Network network;
  LoadReport report;
};

/// Reads the edge-list format:
///
///   n <node_count>
///   <i> <j>
///   ...
///
/// Nodes are 0-based. Blank lines and `#` comments are skipped.
inline LoadedNetwork read_edge_list(std::istream& in,
                                    Preprocessing mode = Preprocessing::AsIs) {
  std::string line;
  int line_no = 0;
  std::size_t n = 0;
  bool have_header = false;
  LoadedNetwork out;
  // Track which direction was seen first so reciprocal arcs can be told
  // apart from literal duplicates in directed input.
  std::vector<std::uint8_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (!have_header) {
      long long count = -1;
      if (first != "n" || !(ls >> count) || count < 1)
        throw ParseError(line_no, "expected header 'n <node_count>'");
      std::string extra;
      if (ls >> extra) throw ParseError(line_no, "trailing text after header");
      n = static_cast<std::size_t>(count);
      out.network = Network(n);
      seen.assign(n < 2 ? 0 : dyad_count(n), 0);
      have_header = true;
      continue;
    }
    long long i = -1, j = -1;
    std::istringstream es(line);
    std::string extra;
    if (!(es >> i >> j) || (es >> extra))
      throw ParseError(line_no, "expected '<i> <j>'");
    if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= n ||
        static_cast<std::size_t>(j) >= n)
      throw ParseError(line_no, "node index out of range [0, " + std::to_string(n) + ")");
    ++out.report.lines;
    if (i == j) {
      ++out.report.self_loops;
      continue;
    }
    const auto lo = static_cast<std::size_t>(std::min(i, j));
    const auto hi = static_cast<std::size_t>(std::max(i, j));
    const std::uint8_t dir = i < j ? 1 : 2;
    std::uint8_t& mark = seen[dyad_index(n, lo, hi)];
    if (mark == 0) {
      out.network.toggle(lo, hi);
    } else if (mode == Preprocessing::UndirectedNoLoops && !(mark & dir)) {
      ++out.report.merged;
    } else {
      ++out.report.duplicates;
    }
    mark |= dir;
  }
  if (!have_header) throw ParseError(line_no, "missing header 'n <node_count>'");
  return out;
}

inline LoadedNetwork load_network(const std::filesystem::path& path,
                                  Preprocessing mode = Preprocessing::AsIs) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open network file " + path.string());
  return read_edge_list(in, mode);
}

inline void write_edge_list(std::ostream& out, const Network& net) {
  out << "n " << net.size() << '\n';
  for (const Dyad& d : net.ties()) out << d.i << ' ' << d.j << '\n';
}

inline void save_network(const std::filesystem::path& path, const Network& net) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write network file " + path.string());
  write_edge_list(out, net);
}

inline Network parse_edge_list(const std::string& text) {
  std::istringstream in(text);
  return read_edge_list(in).network;
}

}  // namespace ergm
