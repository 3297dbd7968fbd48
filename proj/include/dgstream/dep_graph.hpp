#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "dgstream/dyn_graph.hpp"
#include "dgstream/window.hpp"

namespace dgstream {

/// Dependency test variants. Paper tests only (later read set) against
/// (earlier write set); Symmetric additionally guards the anti-dependence
/// direction, which the definition leaves open on directed graphs.
enum class DepMode { Paper, Symmetric };

/// The nodes an event writes: the event nodes for radius-0 models, the whole
/// captured affected set when a model propagates to 1-hop neighbors.
struct UpdateSet {
  std::size_t index = 0;  // window-relative event index
  std::vector<NodeId> nodes;  // sorted
};

inline bool sorted_intersects(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) ++i;
    else if (*j < *i) ++j;
    else return true;
  }
  return false;
}

/// Definition: a later event depends on an earlier one when the later event's
/// affected (read) set intersects the earlier event's update (write) set.
inline bool depends_on(const std::vector<NodeId>& later_affected,
                       const std::vector<NodeId>& later_update,
                       const std::vector<NodeId>& earlier_affected,
                       const std::vector<NodeId>& earlier_update, DepMode mode) {
  if (sorted_intersects(later_affected, earlier_update)) return true;
  if (mode == DepMode::Symmetric && sorted_intersects(later_update, earlier_affected)) return true;
  return false;
}

/// Events as nodes, direct dependencies as edges pointing to strictly earlier
/// events, plus an implicit super-root every event hangs off. Indices are
/// window-relative.
struct DepGraph {
  std::size_t count = 0;
  std::vector<std::vector<std::uint32_t>> deps;        // direct dependencies (earlier indices)
  std::vector<std::vector<std::uint32_t>> dependents;  // reverse edges
  std::vector<std::uint32_t> depth;                     // 1 + max depth over deps; root is 0
  std::size_t chain_count = 0;       // connected components of the dependency relation
  std::vector<std::uint32_t> chain;  // component label per event
  std::size_t critical_path = 0;     // max depth

  double parallelism() const {
    if (count == 0) return 1.0;
    return static_cast<double>(count) / static_cast<double>(std::max<std::size_t>(1, critical_path));
  }
};

/// Per-event analysis captured while walking a window in order.
struct EventAnalysis {
  EventSubgraph subgraph;
  std::vector<NodeId> update_set;  // sorted
};

struct WindowAnalysis {
  Window window;
  DepGraph graph;
  std::vector<EventAnalysis> events;  // window-relative
  std::size_t node_count = 0;         // graph size after the window was applied
};

inline std::vector<NodeId> update_set_for(const EventSubgraph& sub, int radius) {
  if (radius == 0) {
    std::vector<NodeId> s{sub.event.u, sub.event.v};
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
  }
  return sub.affected;  // diffusion models write the whole captured set
}

/// Walks the window in order: applies each event's structural update (unless
/// an earlier overlapping window already did), captures its subgraph on the
/// current topology, then scans all previous window events for direct
/// dependencies. The embedding-growth hook runs for every AddNode applied.
template <typename OnAddNode>
inline WindowAnalysis build_dep_graph(const GraphStream& stream, const Window& window, DynGraph& g,
                                      int k, int radius, DepMode mode, OnAddNode&& on_add_node) {
  WindowAnalysis wa;
  wa.window = window;
  std::size_t n = window.size();
  wa.events.reserve(n);
  wa.graph.count = n;
  wa.graph.deps.assign(n, {});
  wa.graph.dependents.assign(n, {});
  wa.graph.depth.assign(n, 1);

  for (std::size_t i = 0; i < n; ++i) {
    const Event& e = stream.events[window.begin + i];
    if (static_cast<std::int64_t>(e.seq) > g.watermark()) {
      g.apply_structural(e);
      if (e.kind == EventKind::AddNode) on_add_node(e.u);
    }
    EventAnalysis ea;
    ea.subgraph = g.get_subgraph(e, k);
    ea.update_set = update_set_for(ea.subgraph, radius);
    for (std::size_t j = i; j-- > 0;) {
      if (depends_on(ea.subgraph.affected, ea.update_set, wa.events[j].subgraph.affected,
                     wa.events[j].update_set, mode)) {
        wa.graph.deps[i].push_back(static_cast<std::uint32_t>(j));
        wa.graph.dependents[j].push_back(static_cast<std::uint32_t>(i));
        wa.graph.depth[i] = std::max(wa.graph.depth[i], wa.graph.depth[j] + 1);
      }
    }
    wa.events.push_back(std::move(ea));
  }
  wa.node_count = g.node_count();

  // Chains: connected components of the direct-dependency relation.
  std::vector<std::uint32_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint32_t j : wa.graph.deps[i]) {
      parent[find(static_cast<std::uint32_t>(i))] = find(j);
    }
  }
  wa.graph.chain.assign(n, 0);
  std::vector<std::int64_t> label(n, -1);
  std::size_t next_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t r = find(static_cast<std::uint32_t>(i));
    if (label[r] < 0) label[r] = static_cast<std::int64_t>(next_label++);
    wa.graph.chain[i] = static_cast<std::uint32_t>(label[r]);
  }
  wa.graph.chain_count = next_label;
  wa.graph.critical_path =
      n == 0 ? 0 : *std::max_element(wa.graph.depth.begin(), wa.graph.depth.end());
  return wa;
}

inline WindowAnalysis build_dep_graph(const GraphStream& stream, const Window& window, DynGraph& g,
                                      int k, int radius, DepMode mode) {
  return build_dep_graph(stream, window, g, k, radius, mode, [](NodeId) {});
}

/// Boolean reachability matrix of the direct-dependency relation,
/// closure[i][j] == true when event i (later) transitively depends on j.
/// Window must hold at most 64 events; this is a test/diagnostic oracle.
inline std::vector<std::uint64_t> transitive_closure(const DepGraph& g) {
  if (g.count > 64) raise(Errc::InvalidArgument, "closure oracle limited to 64 events");
  std::vector<std::uint64_t> reach(g.count, 0);
  for (std::size_t i = 0; i < g.count; ++i) {
    for (std::uint32_t j : g.deps[i]) {
      reach[i] |= (std::uint64_t(1) << j) | reach[j];
    }
  }
  return reach;
}

/// Same closure recomputed from the raw per-event sets by the naive pairwise
/// check, independent of how the graph was assembled.
inline std::vector<std::uint64_t> transitive_closure_oracle(
    const std::vector<EventAnalysis>& events, DepMode mode) {
  std::size_t n = events.size();
  if (n > 64) raise(Errc::InvalidArgument, "closure oracle limited to 64 events");
  std::vector<std::uint64_t> direct(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (depends_on(events[i].subgraph.affected, events[i].update_set,
                     events[j].subgraph.affected, events[j].update_set, mode)) {
        direct[i] |= std::uint64_t(1) << j;
      }
    }
  }
  std::vector<std::uint64_t> reach(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (direct[i] & (std::uint64_t(1) << j)) reach[i] |= (std::uint64_t(1) << j) | reach[j];
    }
  }
  return reach;
}

/// DOT rendering with window-relative 1-based labels; dependency-free events
/// hang off the super-root S.
inline void write_dot(const DepGraph& g, std::ostream& os) {
  os << "digraph {\n";
  for (std::size_t i = 0; i < g.count; ++i) {
    if (g.deps[i].empty()) {
      os << "  S -> e" << (i + 1) << ";\n";
    } else {
      for (std::uint32_t j : g.deps[i]) {
        os << "  e" << (j + 1) << " -> e" << (i + 1) << ";\n";
      }
    }
  }
  os << "}\n";
}

}  // namespace dgstream
