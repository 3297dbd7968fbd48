#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "dgstream/synthetic.hpp"
#include "dgstream/window.hpp"

using namespace dgstream;

namespace {
GraphStream chain_stream(std::size_t m) {
  // Event i touches nodes {i, i+1}: every event overlaps its successor.
  GraphStream s;
  s.initial.node_count = m + 1;
  for (std::size_t i = 0; i < m; ++i) {
    Event e;
    e.seq = i;
    e.u = static_cast<NodeId>(i);
    e.v = static_cast<NodeId>(i + 1);
    e.t = static_cast<double>(i + 1);
    e.kind = EventKind::Interact;
    s.events.push_back(e);
  }
  return s;
}

GraphStream disjoint_stream(std::size_t m) {
  // Event i touches nodes {2i, 2i+1}: no two events share a node.
  GraphStream s;
  s.initial.node_count = 2 * m;
  for (std::size_t i = 0; i < m; ++i) {
    Event e;
    e.seq = i;
    e.u = static_cast<NodeId>(2 * i);
    e.v = static_cast<NodeId>(2 * i + 1);
    e.t = static_cast<double>(i + 1);
    e.kind = EventKind::Interact;
    s.events.push_back(e);
  }
  return s;
}
}  // namespace

TEST_CASE("fixed windows slide by the stride") {
  GraphStream s = chain_stream(10);
  std::vector<std::size_t> starts;
  std::size_t pos = 0;
  for (;;) {
    auto [w, next] = next_fixed_window(s, pos, 4, 2);
    if (w.empty()) break;
    starts.push_back(w.begin);
    CHECK(w.size() == std::min<std::size_t>(4, 10 - w.begin));
    pos = next;
  }
  CHECK(starts == std::vector<std::size_t>{0, 2, 4, 6, 8});

  auto [tail, next] = next_fixed_window(s, 10, 4, 2);
  CHECK(tail.empty());
  CHECK_THROWS_AS(next_fixed_window(s, 0, 4, 0), Error);
  CHECK_THROWS_AS(next_fixed_window(s, 0, 4, 5), Error);
}

TEST_CASE("fixed-window coverage with d <= s") {
  GraphStream s = chain_stream(23);
  std::set<std::size_t> covered;
  std::size_t pos = 0;
  for (;;) {
    auto [w, next] = next_fixed_window(s, pos, 5, 3);
    if (w.empty()) break;
    for (std::size_t i = w.begin; i < w.end; ++i) covered.insert(i);
    pos = next;
  }
  CHECK(covered.size() == 23);
}

TEST_CASE("adaptive window grows while events share nodes") {
  SECTION("locality run then a disjoint event") {
    GraphStream s;
    s.initial.node_count = 20;
    auto ev = [&](NodeId u, NodeId v) {
      Event e;
      e.seq = s.events.size();
      e.u = u;
      e.v = v;
      e.t = static_cast<double>(s.events.size() + 1);
      e.kind = EventKind::Interact;
      s.events.push_back(e);
    };
    // Events 0..4 all share node 7; event 5 is disjoint.
    ev(7, 1);
    ev(7, 2);
    ev(3, 7);
    ev(7, 4);
    ev(5, 7);
    ev(10, 11);
    Window w = next_adaptive_window(s, 0, 2, 10);
    CHECK(w.begin == 0);
    CHECK(w.size() == 5);  // the rejected boundary event is not included
    std::set<NodeId> nodes(w.node_set.begin(), w.node_set.end());
    CHECK(nodes == std::set<NodeId>{1, 2, 3, 4, 5, 7});
  }
  SECTION("pairwise-disjoint events floor at L") {
    GraphStream s = disjoint_stream(20);
    Window w = next_adaptive_window(s, 0, 3, 10);
    CHECK(w.size() == 3);
  }
  SECTION("fully chained stream caps at H") {
    GraphStream s = chain_stream(50);
    Window w = next_adaptive_window(s, 0, 2, 10);
    CHECK(w.size() == 10);
  }
  SECTION("acceptance after L requires overlap with the accumulated set") {
    GraphStream s = chain_stream(50);
    std::size_t pos = 0;
    while (pos < s.size()) {
      Window w = next_adaptive_window(s, pos, 4, 12);
      if (w.empty()) break;
      std::set<NodeId> acc;
      for (std::size_t i = w.begin; i < w.end; ++i) {
        const Event& e = s.events[i];
        if (i - w.begin >= 4) {
          CHECK((acc.count(e.u) || acc.count(e.v)));
        }
        acc.insert(e.u);
        acc.insert(e.v);
      }
      pos = w.begin + adaptive_stride(w.size(), 0.5);
    }
  }
}

TEST_CASE("adaptive stride") {
  CHECK(adaptive_stride(200, 0.2) == 40);
  CHECK(adaptive_stride(3, 0.2) == 1);
  CHECK(adaptive_stride(10, 1.0) == 10);
  CHECK_THROWS_AS(adaptive_stride(10, 0.0), Error);
  CHECK_THROWS_AS(adaptive_stride(10, 1.5), Error);
}

TEST_CASE("planted clusters are captured exactly at full stride") {
  SyntheticConfig cfg;
  cfg.num_nodes = 80;
  cfg.num_events = 400;
  cfg.cluster_min = 8;
  cfg.cluster_max = 20;
  cfg.cluster_node_pool = 6;
  cfg.seed = 12;
  auto syn = generate_synthetic_stream(cfg);
  std::set<std::size_t> cluster_starts(syn.cluster_starts.begin(), syn.cluster_starts.end());
  cluster_starts.insert(syn.stream.size());

  std::size_t pos = 0;
  while (pos < syn.stream.size()) {
    Window w = next_adaptive_window(syn.stream, pos, cfg.cluster_min, cfg.cluster_max);
    if (w.empty()) break;
    CHECK(cluster_starts.count(w.begin) == 1);
    CHECK(cluster_starts.count(w.end) == 1);
    pos = w.end;  // stride fraction 1.0
  }
}
