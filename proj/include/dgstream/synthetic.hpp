#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <unordered_set>
#include <vector>

#include "dgstream/event.hpp"

namespace dgstream {

struct SyntheticConfig {
  std::size_t num_nodes = 100;
  std::size_t num_events = 1000;
  std::size_t cluster_min = 10;   // events per cluster, inclusive
  std::size_t cluster_max = 30;
  std::size_t cluster_node_pool = 8;  // nodes available to one cluster
  double edge_fraction = 0.25;        // chance an event is add_edge instead of interact
  std::uint64_t seed = 1;
};

/// Generator output plus the planted-cluster log used by window-capture tests.
struct SyntheticStream {
  GraphStream stream;
  std::vector<std::size_t> cluster_starts;          // first seq of each cluster
  std::vector<std::vector<NodeId>> cluster_pools;   // node pool per cluster
};

/// Emits consecutive runs ("clusters") of events whose endpoints come from a
/// small per-run node pool, so that each event shares at least one node with
/// the events already emitted in its run. Consecutive runs draw their pools
/// from disjoint node sets whenever num_nodes >= 2 * cluster_node_pool.
/// Timestamps are strictly increasing integers; output is a pure function of
/// the config.
inline SyntheticStream generate_synthetic_stream(const SyntheticConfig& cfg) {
  if (cfg.cluster_node_pool < 2) raise(Errc::InvalidArgument, "cluster_node_pool must be >= 2");
  if (cfg.num_nodes < cfg.cluster_node_pool) {
    raise(Errc::InvalidArgument, "num_nodes must be >= cluster_node_pool");
  }
  if (cfg.cluster_min < 1 || cfg.cluster_min > cfg.cluster_max) {
    raise(Errc::InvalidArgument, "need 1 <= cluster_min <= cluster_max");
  }
  std::mt19937_64 rng(cfg.seed);
  SyntheticStream out;
  out.stream.initial.node_count = cfg.num_nodes;

  std::vector<NodeId> prev_pool;
  std::uint64_t next_t = 1;
  std::unordered_set<std::uint64_t> present_edges;
  auto edge_key = [](NodeId u, NodeId v) {
    return (static_cast<std::uint64_t>(u) << 32) | v;
  };

  while (out.stream.events.size() < cfg.num_events) {
    // Pool for this cluster, disjoint from the previous cluster's pool if possible.
    std::vector<NodeId> candidates;
    candidates.reserve(cfg.num_nodes);
    std::unordered_set<NodeId> banned(prev_pool.begin(), prev_pool.end());
    if (cfg.num_nodes - prev_pool.size() >= cfg.cluster_node_pool) {
      for (NodeId n = 0; n < cfg.num_nodes; ++n) {
        if (!banned.count(n)) candidates.push_back(n);
      }
    } else {
      for (NodeId n = 0; n < cfg.num_nodes; ++n) candidates.push_back(n);
    }
    std::vector<NodeId> pool;
    pool.reserve(cfg.cluster_node_pool);
    for (std::size_t i = 0; i < cfg.cluster_node_pool; ++i) {
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      std::size_t j = pick(rng);
      pool.push_back(candidates[j]);
      candidates[j] = candidates.back();
      candidates.pop_back();
    }

    std::uniform_int_distribution<std::size_t> size_dist(cfg.cluster_min, cfg.cluster_max);
    std::size_t cluster_size = size_dist(rng);
    cluster_size = std::min(cluster_size, cfg.num_events - out.stream.events.size());

    out.cluster_starts.push_back(out.stream.events.size());
    out.cluster_pools.push_back(pool);

    std::vector<NodeId> accumulated;  // nodes already used in this cluster
    for (std::size_t i = 0; i < cluster_size; ++i) {
      NodeId u, v;
      if (accumulated.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        std::size_t a = pick(rng);
        std::size_t b = pick(rng);
        while (b == a) b = pick(rng);
        u = pool[a];
        v = pool[b];
      } else {
        std::uniform_int_distribution<std::size_t> pick_acc(0, accumulated.size() - 1);
        u = accumulated[pick_acc(rng)];
        std::uniform_int_distribution<std::size_t> pick_pool(0, pool.size() - 1);
        v = pool[pick_pool(rng)];
        while (v == u) v = pool[pick_pool(rng)];
      }
      Event e;
      e.seq = out.stream.events.size();
      e.u = u;
      e.v = v;
      e.t = static_cast<double>(next_t++);
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      bool make_edge = coin(rng) < cfg.edge_fraction && !present_edges.count(edge_key(u, v));
      e.kind = make_edge ? EventKind::AddEdge : EventKind::Interact;
      if (make_edge) present_edges.insert(edge_key(u, v));
      out.stream.events.push_back(e);
      for (NodeId n : {u, v}) {
        if (std::find(accumulated.begin(), accumulated.end(), n) == accumulated.end()) {
          accumulated.push_back(n);
        }
      }
    }
    prev_pool = pool;
  }
  return out;
}

}  // namespace dgstream
