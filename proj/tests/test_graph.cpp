#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <chrono>
#include <random>
#include <set>

#include "dgstream/dyn_graph.hpp"
#include "oracles.hpp"

using namespace dgstream;

namespace {

// Every index lookup must agree with a linear scan of the arrays.
void check_index_consistency(const DynGraph& g) {
  for (NodeId n = 0; n < g.node_count(); ++n) {
    const NodeAdjacency& a = g.adjacency(n);
    REQUIRE(a.in_index.size() == a.in_edges.size());
    REQUIRE(a.out_index.size() == a.out_edges.size());
    for (std::size_t o = 0; o < a.in_edges.size(); ++o) {
      REQUIRE(a.in_index.at(a.in_edges[o].nbr) == o);
    }
    for (std::size_t o = 0; o < a.out_edges.size(); ++o) {
      REQUIRE(a.out_index.at(a.out_edges[o].nbr) == o);
    }
  }
}

// (u,v) in out(u) iff (u,v) in in(v), with equal weight and timestamp.
void check_mirror(const DynGraph& g) {
  for (NodeId u = 0; u < g.node_count(); ++u) {
    for (const AdjEntry& e : g.adjacency(u).out_edges) {
      const NodeAdjacency& peer = g.adjacency(e.nbr);
      auto it = peer.in_index.find(u);
      REQUIRE(it != peer.in_index.end());
      const AdjEntry& back = peer.in_edges[it->second];
      CHECK(back.weight == e.weight);
      CHECK(back.t == e.t);
    }
  }
}

}  // namespace

TEST_CASE("add_node returns dense ids") {
  DynGraph g;
  CHECK(g.add_node() == 0);
  DynGraph g5(5);
  CHECK(g5.add_node() == 5);
  CHECK(g5.add_node() == 6);
}

TEST_CASE("add_edge indexes both directions") {
  DynGraph g(4);
  g.add_edge(1, 2, 1.0, 5.0);
  CHECK(g.adjacency(1).out_index.at(2) == 0);
  CHECK(g.adjacency(2).in_index.at(1) == 0);
  CHECK(g.has_edge(1, 2));
  CHECK_FALSE(g.has_edge(2, 1));
}

TEST_CASE("duplicate add_edge upserts in place") {
  DynGraph g(4);
  g.add_edge(1, 2, 1.0, 5.0);
  g.add_edge(1, 2, 2.0, 9.0);
  REQUIRE(g.adjacency(1).out_edges.size() == 1);
  CHECK(g.find_edge(1, 2)->t == 9.0);
  CHECK(g.find_edge(1, 2)->weight == 2.0);

  oracles::RefGraph ref;
  ref.nodes = 4;
  ref.add_edge(1, 2, 1.0, 5.0);
  ref.add_edge(1, 2, 2.0, 9.0);
  CHECK(ref.out_of(1).at(2).t == g.find_edge(1, 2)->t);
}

TEST_CASE("self loops rejected") {
  DynGraph g(2);
  CHECK_THROWS_AS(g.add_edge(1, 1, 1.0, 1.0), Error);
}

TEST_CASE("delete_edge swap-removes and fixes the index") {
  DynGraph g(6);
  SECTION("only edge") {
    g.add_edge(0, 1, 1, 1);
    g.delete_edge(0, 1);
    CHECK(g.adjacency(0).out_edges.empty());
    CHECK(g.adjacency(0).out_index.empty());
    CHECK(g.adjacency(1).in_edges.empty());
  }
  SECTION("first of three out-edges") {
    g.add_edge(0, 1, 1, 1);
    g.add_edge(0, 2, 1, 2);
    g.add_edge(0, 3, 1, 3);
    g.delete_edge(0, 1);
    REQUIRE(g.adjacency(0).out_edges.size() == 2);
    check_index_consistency(g);
    check_mirror(g);
    CHECK(g.has_edge(0, 2));
    CHECK(g.has_edge(0, 3));
    CHECK_FALSE(g.has_edge(0, 1));
  }
  SECTION("absent edge") {
    auto code = [&] {
      try {
        g.delete_edge(0, 1);
      } catch (const Error& e) {
        return e.code();
      }
      return Errc::ValidationFailed;
    };
    CHECK(code() == Errc::EdgeNotFound);
  }
}

TEST_CASE("neighbors returns storage-order copies") {
  DynGraph g(5);
  CHECK(g.neighbors(0, Direction::Both).empty());
  g.add_edge(1, 2, 1, 1);
  g.add_edge(3, 1, 1, 2);
  auto out = g.neighbors(1, Direction::Out);
  REQUIRE(out.size() == 1);
  CHECK(out[0].nbr == 2);
  auto in = g.neighbors(1, Direction::In);
  REQUIRE(in.size() == 1);
  CHECK(in[0].nbr == 3);
  auto both = g.neighbors(1, Direction::Both);
  REQUIRE(both.size() == 2);
  CHECK(both[0].nbr == 3);  // In precedes Out
  CHECK(both[1].nbr == 2);
  CHECK_THROWS_AS(g.neighbors(9, Direction::In), Error);
}

TEST_CASE("query_time follows touch_time") {
  DynGraph g(3);
  CHECK(g.query_time(1) == 0.0);
  g.touch_time(1, 7.0);
  CHECK(g.query_time(1) == 7.0);
  g.touch_time(1, 9.0);
  CHECK(g.query_time(1) == 9.0);
  g.touch_time(1, 4.0);  // clocks never run backwards
  CHECK(g.query_time(1) == 9.0);
}

TEST_CASE("apply_structural honors the watermark") {
  DynGraph g(3);
  Event e;
  e.seq = 0;
  e.u = 1;
  e.v = 2;
  e.t = 1.0;
  e.kind = EventKind::Interact;
  g.apply_structural(e);
  CHECK(g.watermark() == 0);
  CHECK_FALSE(g.has_edge(1, 2));  // interact adds no topology
  CHECK_THROWS_AS(g.apply_structural(e), Error);

  Event add;
  add.seq = 1;
  add.u = 3;
  add.v = 3;
  add.t = 2.0;
  add.kind = EventKind::AddNode;
  g.apply_structural(add);
  CHECK(g.node_count() == 4);
}

TEST_CASE("interact refreshes the timestamp of an existing edge") {
  DynGraph g(3);
  Event add;
  add.seq = 0;
  add.u = 0;
  add.v = 1;
  add.t = 1.0;
  add.kind = EventKind::AddEdge;
  g.apply_structural(add);
  Event touch;
  touch.seq = 1;
  touch.u = 0;
  touch.v = 1;
  touch.t = 6.0;
  touch.kind = EventKind::Interact;
  g.apply_structural(touch);
  CHECK(g.find_edge(0, 1)->t == 6.0);
}

TEST_CASE("get_subgraph captures the k-hop union and elapsed times") {
  DynGraph g(6);
  g.add_edge(0, 1, 1, 1);
  g.add_edge(2, 1, 1, 1);
  g.add_edge(2, 3, 1, 1);
  g.add_edge(4, 5, 1, 1);
  g.touch_time(0, 2.0);

  Event e;
  e.seq = 0;
  e.u = 0;
  e.v = 1;
  e.t = 10.0;
  e.kind = EventKind::Interact;
  EventSubgraph sub = g.get_subgraph(e, 1);
  CHECK(sub.affected == std::vector<NodeId>{0, 1, 2});
  CHECK(sub.delta_u == 8.0);
  CHECK(sub.delta_v == 10.0);
  CHECK(g.query_time(0) == 10.0);
  CHECK(g.query_time(1) == 10.0);

  // 2 hops pulls in node 3 through 2.
  EventSubgraph sub2 = g.get_subgraph(e, 2);
  CHECK(sub2.affected == std::vector<NodeId>{0, 1, 2, 3});

  // The snapshot is a deep copy: later mutation leaves it untouched.
  g.delete_edge(2, 1);
  CHECK(sub.in_of(1).size() == 2);

  // Isolated pair: just the endpoints.
  Event iso;
  iso.seq = 1;
  iso.u = 4;
  iso.v = 5;
  iso.t = 11.0;
  iso.kind = EventKind::Interact;
  DynGraph g2(6);
  g2.add_edge(4, 5, 1, 1);
  EventSubgraph sub3 = g2.get_subgraph(iso, 1);
  CHECK(sub3.affected == std::vector<NodeId>{4, 5});
}

TEST_CASE("random ops match the map-of-maps reference") {
  std::mt19937_64 rng(2024);
  DynGraph g(30);
  oracles::RefGraph ref;
  ref.nodes = 30;
  std::vector<std::pair<NodeId, NodeId>> live;

  for (int i = 0; i < 10000; ++i) {
    int action = static_cast<int>(rng() % 100);
    NodeId u = static_cast<NodeId>(rng() % g.node_count());
    NodeId v = static_cast<NodeId>(rng() % g.node_count());
    if (action < 55 && u != v) {
      double w = static_cast<double>(rng() % 1000) / 10.0;
      double t = static_cast<double>(i);
      g.add_edge(u, v, w, t);
      ref.add_edge(u, v, w, t);
      live.push_back({u, v});
    } else if (action < 80 && !live.empty()) {
      auto [du, dv] = live[rng() % live.size()];
      if (ref.has_edge(du, dv)) {
        g.delete_edge(du, dv);
        ref.delete_edge(du, dv);
      }
    } else if (action < 85) {
      g.add_node();
      ref.add_node();
    }
  }
  REQUIRE(g.node_count() == ref.nodes);
  check_index_consistency(g);
  check_mirror(g);
  for (NodeId n = 0; n < g.node_count(); ++n) {
    auto ref_out = ref.out_of(n);
    auto got = g.neighbors(n, Direction::Out);
    REQUIRE(got.size() == ref_out.size());
    for (const AdjEntry& e : got) {
      REQUIRE(ref_out.count(e.nbr) == 1);
      CHECK(ref_out.at(e.nbr).w == e.weight);
      CHECK(ref_out.at(e.nbr).t == e.t);
    }
    auto ref_in = ref.in_of(n);
    auto got_in = g.neighbors(n, Direction::In);
    REQUIRE(got_in.size() == ref_in.size());
    for (const AdjEntry& e : got_in) REQUIRE(ref_in.count(e.nbr) == 1);
  }
}

TEST_CASE("has-edge lookups stay near O(1) as the graph grows") {
  auto probe = [](std::size_t edges) {
    std::mt19937_64 rng(5);
    DynGraph g(edges / 2 + 2);
    std::size_t added = 0;
    while (added < edges) {
      NodeId u = static_cast<NodeId>(rng() % g.node_count());
      NodeId v = static_cast<NodeId>(rng() % g.node_count());
      if (u == v) continue;
      g.add_edge(u, v, 1.0, 1.0);
      ++added;
    }
    volatile bool sink = false;
    auto begin = std::chrono::steady_clock::now();
    constexpr int kProbes = 200000;
    for (int i = 0; i < kProbes; ++i) {
      NodeId u = static_cast<NodeId>(rng() % g.node_count());
      NodeId v = static_cast<NodeId>(rng() % g.node_count());
      sink = sink ^ g.has_edge(u, v);
    }
    auto ns = std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - begin)
                  .count();
    return ns / kProbes;
  };
  double small = probe(1000);
  double large = probe(100000);
  INFO("per-lookup ns: small=" << small << " large=" << large);
  CHECK(large < 2.0 * small + 50.0);  // +50ns absolute slack for timer noise
}
