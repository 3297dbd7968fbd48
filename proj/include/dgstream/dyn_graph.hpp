#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <ostream>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dgstream/event.hpp"

namespace dgstream {

enum class Direction { In, Out, Both };

struct AdjEntry {
  NodeId nbr;
  double weight;
  double t;  // timestamp of the last update of this edge
};

/// Per-node adjacency: incoming and outgoing edges in growable arrays with a
/// nbr -> offset hash index per direction for O(1) average fine-grained access.
struct NodeAdjacency {
  std::vector<AdjEntry> in_edges;
  std::vector<AdjEntry> out_edges;
  std::unordered_map<NodeId, std::size_t> in_index;
  std::unordered_map<NodeId, std::size_t> out_index;
  double last_time = 0.0;  // timestamp of the node's previous event
};

/// Frozen per-event view: the k-hop affected node set and a deep copy of the
/// affected nodes' adjacency, so training never reads mutating topology.
struct EventSubgraph {
  Event event;
  int hops = 1;
  std::vector<NodeId> affected;  // sorted; includes u and v
  std::unordered_map<NodeId, std::vector<AdjEntry>> in_snapshot;
  std::unordered_map<NodeId, std::vector<AdjEntry>> out_snapshot;
  double delta_u = 0.0;  // time elapsed since u's previous event
  double delta_v = 0.0;

  bool contains(NodeId n) const {
    return std::binary_search(affected.begin(), affected.end(), n);
  }
  const std::vector<AdjEntry>& in_of(NodeId n) const {
    auto it = in_snapshot.find(n);
    if (it == in_snapshot.end()) raise(Errc::UnknownNode, "node not in snapshot");
    return it->second;
  }
  const std::vector<AdjEntry>& out_of(NodeId n) const {
    auto it = out_snapshot.find(n);
    if (it == out_snapshot.end()) raise(Errc::UnknownNode, "node not in snapshot");
    return it->second;
  }
};

/// Dynamic directed graph. Structural mutation is single-writer (the
/// dependency-analysis stage); snapshots and const queries may be read
/// concurrently once no writer is active.
class DynGraph {
 public:
  DynGraph() = default;
  explicit DynGraph(std::size_t node_count) : nodes_(node_count) {}

  static DynGraph from_initial(const InitialGraph& init) {
    DynGraph g(init.node_count);
    for (const auto& e : init.edges) g.add_edge(e.u, e.v, e.weight, e.t);
    return g;
  }

  std::size_t node_count() const { return nodes_.size(); }

  NodeId add_node() {
    nodes_.emplace_back();
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  /// Inserts or overwrites (upserts) the directed edge u -> v.
  void add_edge(NodeId u, NodeId v, double w, double t) {
    check_node(u);
    check_node(v);
    if (u == v) raise(Errc::SelfLoop, "edge (" + std::to_string(u) + "," + std::to_string(u) + ")");
    upsert(nodes_[u].out_edges, nodes_[u].out_index, v, w, t);
    upsert(nodes_[v].in_edges, nodes_[v].in_index, u, w, t);
  }

  /// Removes u -> v from both directions by swap-with-last; the moved entry's
  /// index slot is rewritten.
  void delete_edge(NodeId u, NodeId v) {
    check_node(u);
    check_node(v);
    if (!erase(nodes_[u].out_edges, nodes_[u].out_index, v) ||
        !erase(nodes_[v].in_edges, nodes_[v].in_index, u)) {
      raise(Errc::EdgeNotFound, "(" + std::to_string(u) + "," + std::to_string(v) + ")");
    }
  }

  bool has_edge(NodeId u, NodeId v) const {
    check_node(u);
    check_node(v);
    return nodes_[u].out_index.count(v) != 0;
  }

  const AdjEntry* find_edge(NodeId u, NodeId v) const {
    check_node(u);
    check_node(v);
    auto it = nodes_[u].out_index.find(v);
    if (it == nodes_[u].out_index.end()) return nullptr;
    return &nodes_[u].out_edges[it->second];
  }

  /// Contiguous copy in storage order; Both concatenates In then Out and keeps
  /// duplicates.
  std::vector<AdjEntry> neighbors(NodeId n, Direction dir) const {
    check_node(n);
    const NodeAdjacency& a = nodes_[n];
    std::vector<AdjEntry> out;
    if (dir == Direction::In || dir == Direction::Both) {
      out.insert(out.end(), a.in_edges.begin(), a.in_edges.end());
    }
    if (dir == Direction::Out || dir == Direction::Both) {
      out.insert(out.end(), a.out_edges.begin(), a.out_edges.end());
    }
    return out;
  }

  const NodeAdjacency& adjacency(NodeId n) const {
    check_node(n);
    return nodes_[n];
  }

  /// Latest interaction time of n; 0 until first touched.
  double query_time(NodeId n) const {
    check_node(n);
    return nodes_[n].last_time;
  }

  /// Monotone: a node's time never goes backwards, so recapturing an already
  /// seen event (overlapping windows) cannot produce negative intervals.
  void touch_time(NodeId n, double t) {
    check_node(n);
    nodes_[n].last_time = std::max(nodes_[n].last_time, t);
  }

  std::int64_t watermark() const { return watermark_; }

  /// Applies an event's structural effect exactly once. Events at or below
  /// the watermark were already applied by an earlier (overlapping) window.
  void apply_structural(const Event& e) {
    if (static_cast<std::int64_t>(e.seq) <= watermark_) {
      raise(Errc::StaleEvent, "seq " + std::to_string(e.seq) + " <= watermark " +
                                  std::to_string(watermark_));
    }
    switch (e.kind) {
      case EventKind::AddEdge:
        add_edge(e.u, e.v, e.weight, e.t);
        break;
      case EventKind::DeleteEdge:
        delete_edge(e.u, e.v);
        break;
      case EventKind::AddNode: {
        if (e.u != nodes_.size()) {
          raise(Errc::InvalidArgument, "add_node id " + std::to_string(e.u) +
                                           " != node count " + std::to_string(nodes_.size()));
        }
        add_node();
        break;
      }
      case EventKind::Interact:
      case EventKind::UpdateFeature: {
        // No structural change; an existing edge gets its timestamp refreshed.
        if (e.u != e.v && e.u < nodes_.size() && e.v < nodes_.size()) {
          auto it = nodes_[e.u].out_index.find(e.v);
          if (it != nodes_[e.u].out_index.end()) {
            nodes_[e.u].out_edges[it->second].t = e.t;
            nodes_[e.v].in_edges[nodes_[e.v].in_index.at(e.u)].t = e.t;
          }
        }
        break;
      }
    }
    watermark_ = static_cast<std::int64_t>(e.seq);
  }

  /// k-hop BFS from {u, v} over the union of in- and out-neighbors on the
  /// current (post-event) topology. Computes the event nodes' elapsed times,
  /// then advances their clocks to e.t.
  EventSubgraph get_subgraph(const Event& e, int k, bool touch = true) {
    EventSubgraph sub;
    sub.event = e;
    sub.hops = k;
    check_node(e.u);
    check_node(e.v);
    sub.delta_u = std::max(0.0, e.t - nodes_[e.u].last_time);
    sub.delta_v = std::max(0.0, e.t - nodes_[e.v].last_time);

    std::unordered_set<NodeId> seen{e.u, e.v};
    std::deque<std::pair<NodeId, int>> frontier;
    frontier.push_back({e.u, 0});
    if (e.v != e.u) frontier.push_back({e.v, 0});
    while (!frontier.empty()) {
      auto [n, depth] = frontier.front();
      frontier.pop_front();
      if (depth >= k) continue;
      const NodeAdjacency& a = nodes_[n];
      for (const auto& entry : a.in_edges) {
        if (seen.insert(entry.nbr).second) frontier.push_back({entry.nbr, depth + 1});
      }
      for (const auto& entry : a.out_edges) {
        if (seen.insert(entry.nbr).second) frontier.push_back({entry.nbr, depth + 1});
      }
    }
    sub.affected.assign(seen.begin(), seen.end());
    std::sort(sub.affected.begin(), sub.affected.end());
    for (NodeId n : sub.affected) {
      sub.in_snapshot.emplace(n, nodes_[n].in_edges);
      sub.out_snapshot.emplace(n, nodes_[n].out_edges);
    }
    if (touch) {
      touch_time(e.u, e.t);
      touch_time(e.v, e.t);
    }
    return sub;
  }

  /// Debug dump for diffing against reference implementations.
  void dump_json(std::ostream& os) const {
    os << "{\"nodes\":" << nodes_.size() << ",\"edges\":[";
    bool first = true;
    for (NodeId u = 0; u < nodes_.size(); ++u) {
      for (const auto& e : nodes_[u].out_edges) {
        if (!first) os << ",";
        first = false;
        os << "{\"u\":" << u << ",\"v\":" << e.nbr << ",\"w\":" << e.weight << ",\"t\":" << e.t
           << "}";
      }
    }
    os << "]}";
  }

 private:
  void check_node(NodeId n) const {
    if (n >= nodes_.size()) {
      raise(Errc::UnknownNode, std::to_string(n) + " (graph has " +
                                   std::to_string(nodes_.size()) + " nodes)");
    }
  }

  static void upsert(std::vector<AdjEntry>& edges, std::unordered_map<NodeId, std::size_t>& index,
                     NodeId nbr, double w, double t) {
    auto it = index.find(nbr);
    if (it != index.end()) {
      edges[it->second].weight = w;
      edges[it->second].t = t;
      return;
    }
    index.emplace(nbr, edges.size());
    edges.push_back({nbr, w, t});
  }

  static bool erase(std::vector<AdjEntry>& edges, std::unordered_map<NodeId, std::size_t>& index,
                    NodeId nbr) {
    auto it = index.find(nbr);
    if (it == index.end()) return false;
    std::size_t pos = it->second;
    index.erase(it);
    if (pos + 1 != edges.size()) {
      edges[pos] = edges.back();
      index[edges[pos].nbr] = pos;
    }
    edges.pop_back();
    return true;
  }

  std::vector<NodeAdjacency> nodes_;
  std::int64_t watermark_ = -1;
};

}  // namespace dgstream
