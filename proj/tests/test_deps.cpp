#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <chrono>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "dgstream/dep_graph.hpp"
#include "dgstream/scheduler.hpp"
#include "oracles.hpp"

using namespace dgstream;

namespace {

Event mk(std::size_t seq, NodeId u, NodeId v, double t, EventKind k) {
  Event e;
  e.seq = seq;
  e.u = u;
  e.v = v;
  e.t = t;
  e.kind = k;
  return e;
}

/// Ten-node fixture with two independent activity regions and five events,
/// radius 0, 1 hop. Region A: events on (1,2); region B: a chain through
/// (5,8), (7,8), (9,10).
GraphStream figure_four_stream() {
  GraphStream s;
  s.initial.node_count = 11;
  s.initial.edges = {{1, 3, 1.0, 0.0}, {2, 4, 1.0, 0.0}, {5, 7, 1.0, 0.0},
                     {8, 6, 1.0, 0.0}, {7, 9, 1.0, 0.0}};
  s.events = {mk(0, 1, 2, 1, EventKind::AddEdge), mk(1, 5, 8, 2, EventKind::AddEdge),
              mk(2, 1, 2, 3, EventKind::Interact), mk(3, 7, 8, 4, EventKind::AddEdge),
              mk(4, 9, 10, 5, EventKind::AddEdge)};
  return s;
}

/// Nine events over three node groups, forming exactly three dependency
/// chains: {e1,e4,e6}, {e2,e5,e7,e8}, {e3,e9}.
GraphStream figure_five_stream() {
  GraphStream s;
  s.initial.node_count = 11;
  s.events = {mk(0, 0, 1, 1, EventKind::AddEdge), mk(1, 4, 5, 2, EventKind::AddEdge),
              mk(2, 8, 9, 3, EventKind::AddEdge), mk(3, 1, 2, 4, EventKind::AddEdge),
              mk(4, 5, 6, 5, EventKind::AddEdge), mk(5, 2, 3, 6, EventKind::AddEdge),
              mk(6, 6, 7, 7, EventKind::AddEdge), mk(7, 7, 4, 8, EventKind::AddEdge),
              mk(8, 9, 10, 9, EventKind::AddEdge)};
  return s;
}

Window whole(const GraphStream& s) {
  Window w;
  w.begin = 0;
  w.end = s.size();
  return w;
}

bool has_dep(const DepGraph& g, std::size_t later, std::size_t earlier) {
  for (auto j : g.deps[later]) {
    if (j == earlier) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("affected sets on the two-region fixture") {
  GraphStream s = figure_four_stream();
  DynGraph g = DynGraph::from_initial(s.initial);
  auto wa = build_dep_graph(s, whole(s), g, 1, 0, DepMode::Paper);
  CHECK(wa.events[0].subgraph.affected == std::vector<NodeId>{1, 2, 3, 4});
  CHECK(wa.events[1].subgraph.affected == std::vector<NodeId>{5, 6, 7, 8});
  CHECK(wa.events[2].subgraph.affected == std::vector<NodeId>{1, 2, 3, 4});
  CHECK(wa.events[4].subgraph.affected == std::vector<NodeId>{7, 9, 10});
  CHECK(wa.events[0].update_set == std::vector<NodeId>{1, 2});
  CHECK(wa.events[1].update_set == std::vector<NodeId>{5, 8});
  CHECK(wa.events[3].update_set == std::vector<NodeId>{7, 8});
}

TEST_CASE("golden dependency structure of the five-event fixture") {
  GraphStream s = figure_four_stream();
  DynGraph g = DynGraph::from_initial(s.initial);
  auto wa = build_dep_graph(s, whole(s), g, 1, 0, DepMode::Paper);

  CHECK(has_dep(wa.graph, 2, 0));        // e3 => e1
  CHECK(has_dep(wa.graph, 3, 1));        // e4 => e2
  CHECK(has_dep(wa.graph, 4, 3));        // e5 => e4
  CHECK_FALSE(has_dep(wa.graph, 4, 1));  // no direct e5 => e2
  CHECK_FALSE(has_dep(wa.graph, 1, 0));
  CHECK_FALSE(has_dep(wa.graph, 3, 2));

  // Two chains: {e1,e3} and {e2,e4,e5}.
  CHECK(wa.graph.chain_count == 2);
  CHECK(wa.graph.chain[0] == wa.graph.chain[2]);
  CHECK(wa.graph.chain[1] == wa.graph.chain[3]);
  CHECK(wa.graph.chain[1] == wa.graph.chain[4]);
  CHECK(wa.graph.chain[0] != wa.graph.chain[1]);

  // Transitivity: the closure reaches e2 from e5 even with no direct edge.
  auto closure = transitive_closure(wa.graph);
  CHECK((closure[4] >> 1) & 1);  // e5 reaches e2
  CHECK((closure[4] >> 3) & 1);  // e5 reaches e4
  CHECK_FALSE((closure[4] >> 0) & 1);

  // depends_on itself: read/write overlap present and absent.
  CHECK(depends_on(wa.events[2].subgraph.affected, wa.events[2].update_set,
                   wa.events[0].subgraph.affected, wa.events[0].update_set, DepMode::Paper));
  CHECK_FALSE(depends_on(wa.events[4].subgraph.affected, wa.events[4].update_set,
                         wa.events[1].subgraph.affected, wa.events[1].update_set,
                         DepMode::Paper));
}

TEST_CASE("nine-event fixture forms exactly three chains") {
  GraphStream s = figure_five_stream();
  DynGraph g = DynGraph::from_initial(s.initial);
  auto wa = build_dep_graph(s, whole(s), g, 1, 0, DepMode::Paper);
  CHECK(wa.graph.chain_count == 3);
  std::set<std::uint32_t> a{wa.graph.chain[0], wa.graph.chain[3], wa.graph.chain[5]};
  std::set<std::uint32_t> b{wa.graph.chain[1], wa.graph.chain[4], wa.graph.chain[6],
                            wa.graph.chain[7]};
  std::set<std::uint32_t> c{wa.graph.chain[2], wa.graph.chain[8]};
  CHECK(a.size() == 1);
  CHECK(b.size() == 1);
  CHECK(c.size() == 1);
  CHECK(*a.begin() != *b.begin());
  CHECK(*b.begin() != *c.begin());
  CHECK(*a.begin() != *c.begin());
}

TEST_CASE("depends_on primitive") {
  std::vector<NodeId> v3{1, 2, 3, 4}, u1{1, 2};
  std::vector<NodeId> v5{7, 9, 10}, u2{5, 8};
  CHECK(depends_on(v3, u1, v3, u1, DepMode::Paper));
  CHECK_FALSE(depends_on(v5, {9, 10}, v3, u2, DepMode::Paper));
  CHECK_FALSE(depends_on({1}, {1}, {2}, {2}, DepMode::Paper));
  // Symmetric mode adds the anti-dependence guard.
  CHECK_FALSE(depends_on({5, 6}, {5, 6}, {6, 7}, {7}, DepMode::Paper));
  CHECK(depends_on({5, 6}, {5, 6}, {6, 7}, {7}, DepMode::Symmetric));
}

TEST_CASE("single-event window hangs off the root alone") {
  GraphStream s;
  s.initial.node_count = 2;
  s.events = {mk(0, 0, 1, 1, EventKind::AddEdge)};
  DynGraph g = DynGraph::from_initial(s.initial);
  auto wa = build_dep_graph(s, whole(s), g, 1, 0, DepMode::Paper);
  CHECK(wa.graph.deps[0].empty());
  CHECK(wa.graph.chain_count == 1);
  std::ostringstream dot;
  write_dot(wa.graph, dot);
  CHECK(dot.str() == "digraph {\n  S -> e1;\n}\n");
}

TEST_CASE("closure of the built graph matches the naive oracle") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 120; ++trial) {
    std::size_t nodes = 6 + rng() % 30;
    std::size_t events = 2 + rng() % 40;
    GraphStream s = oracles::random_stream(rng, nodes, events);
    for (int radius : {0, 1}) {
      for (DepMode mode : {DepMode::Paper, DepMode::Symmetric}) {
        DynGraph g = DynGraph::from_initial(s.initial);
        auto wa = build_dep_graph(s, whole(s), g, 1, radius, mode);
        CHECK(transitive_closure(wa.graph) == transitive_closure_oracle(wa.events, mode));
      }
    }
  }
}

TEST_CASE("acyclicity: edges always point backward") {
  std::mt19937_64 rng(5);
  GraphStream s = oracles::random_stream(rng, 20, 50);
  DynGraph g = DynGraph::from_initial(s.initial);
  auto wa = build_dep_graph(s, whole(s), g, 1, 1, DepMode::Symmetric);
  for (std::size_t i = 0; i < wa.graph.count; ++i) {
    for (auto j : wa.graph.deps[i]) CHECK(j < i);
  }
}

TEST_CASE("overlapping windows skip re-application but recompute sets") {
  GraphStream s = figure_five_stream();
  DynGraph g = DynGraph::from_initial(s.initial);
  Window w1;
  w1.begin = 0;
  w1.end = 6;
  build_dep_graph(s, w1, g, 1, 0, DepMode::Paper);
  CHECK(g.watermark() == 5);
  Window w2;
  w2.begin = 3;
  w2.end = 9;
  auto wa2 = build_dep_graph(s, w2, g, 1, 0, DepMode::Paper);
  CHECK(g.watermark() == 8);
  // Recaptured event (1,2): by now 0-1-2-3 is a path, so the 1-hop set of
  // (1,2) includes 0 and 3.
  CHECK(wa2.events[0].subgraph.affected == std::vector<NodeId>{0, 1, 2, 3});
}

TEST_CASE("run_schedule with one worker preserves stream order") {
  GraphStream s = figure_five_stream();
  DynGraph g = DynGraph::from_initial(s.initial);
  auto wa = build_dep_graph(s, whole(s), g, 1, 0, DepMode::Paper);
  std::vector<std::size_t> order;
  auto completion = run_schedule(wa.graph, [&](std::size_t i) { order.push_back(i); }, 1);
  CHECK(order == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(completion.size() == 9);
}

TEST_CASE("run_schedule never starts an event before its dependencies finish") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    GraphStream s = oracles::random_stream(rng, 12, 40);
    DynGraph g = DynGraph::from_initial(s.initial);
    auto wa = build_dep_graph(s, whole(s), g, 1, 0, DepMode::Paper);

    std::mutex mu;
    std::vector<int> started(wa.graph.count, 0), finished(wa.graph.count, 0);
    std::vector<std::pair<std::size_t, std::size_t>> start_stamp(wa.graph.count);
    std::atomic<std::size_t> clock{0};
    run_schedule(
        wa.graph,
        [&](std::size_t i) {
          {
            std::lock_guard lock(mu);
            for (auto j : wa.graph.deps[i]) REQUIRE(finished[j] == 1);
            started[i] = 1;
          }
          std::this_thread::sleep_for(std::chrono::microseconds(rng() % 50));
          std::lock_guard lock(mu);
          finished[i] = 1;
        },
        4);
    for (std::size_t i = 0; i < wa.graph.count; ++i) CHECK(finished[i] == 1);
  }
}

TEST_CASE("executor failure aborts the window with a diagnostic") {
  GraphStream s = figure_five_stream();
  DynGraph g = DynGraph::from_initial(s.initial);
  auto wa = build_dep_graph(s, whole(s), g, 1, 0, DepMode::Paper);
  auto boom = [&](std::size_t i) {
    if (i == 4) throw std::runtime_error("executor exploded");
  };
  CHECK_THROWS_AS(run_schedule(wa.graph, boom, 3), Error);
}

TEST_CASE("parallelism metric is events over critical path") {
  GraphStream s = figure_five_stream();
  DynGraph g = DynGraph::from_initial(s.initial);
  auto wa = build_dep_graph(s, whole(s), g, 1, 0, DepMode::Paper);
  CHECK(wa.graph.critical_path == 4);  // longest chain has four events
  CHECK(wa.graph.parallelism() == Catch::Approx(9.0 / 4.0));
}
