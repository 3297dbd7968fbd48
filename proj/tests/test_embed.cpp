#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <random>

#include "dgstream/embedding_store.hpp"
#include "oracles.hpp"

using namespace dgstream;

namespace {
std::vector<float> filled(std::size_t dim, float x) { return std::vector<float>(dim, x); }
}

TEST_CASE("init_store seeds Gaussian rows deterministically") {
  EmbeddingStore a(3, 4, 11);
  EmbeddingStore b(3, 4, 11);
  CHECK(a.node_count() == 3);
  CHECK(a.dim() == 4);
  for (NodeId n = 0; n < 3; ++n) {
    CHECK(a.latest_version(n) == 0);
    CHECK(a.base_value(n) == b.base_value(n));
    CHECK(a.base_value(n).size() == 4);
  }
  EmbeddingStore empty(0, 4, 1);
  CHECK(empty.node_count() == 0);
}

TEST_CASE("latest follows updates") {
  EmbeddingStore s(2, 3, 1);
  auto z0 = s.base_value(0);
  CHECK(s.latest(0).value == z0);
  CHECK(s.update(0, filled(3, 1.f)) == 1);
  CHECK(s.latest(0).value == filled(3, 1.f));
  CHECK(s.update(0, filled(3, 2.f)) == 2);
  CHECK(s.latest(0).value == filled(3, 2.f));
}

TEST_CASE("get_version addresses history") {
  EmbeddingStore s(2, 3, 1);
  s.update(1, filled(3, 1.f));
  s.update(1, filled(3, 2.f));
  CHECK(s.get_version(1, 0) == s.base_value(1));
  CHECK(s.get_version(1, 1) == filled(3, 1.f));
  CHECK(s.get_version(1, 2) == filled(3, 2.f));
  auto code = [&] {
    try {
      s.get_version(1, 3);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::ValidationFailed;
  };
  CHECK(code() == Errc::VersionNotFound);
}

TEST_CASE("first updates of different nodes share layer 1") {
  EmbeddingStore s(3, 2, 1);
  CHECK(s.update(0, filled(2, 1.f)) == 1);
  CHECK(s.update(2, filled(2, 2.f)) == 1);
  // Both landed in version-1 storage; count: 3 initial + 2 updates.
  CHECK(s.stored_vector_count() == 5);
}

TEST_CASE("update rejects bad vectors") {
  EmbeddingStore s(1, 3, 1);
  CHECK_THROWS_AS(s.update(0, filled(2, 1.f)), Error);
  auto bad = filled(3, 1.f);
  bad[1] = std::nanf("");
  CHECK_THROWS_AS(s.update(0, bad), Error);
  CHECK_THROWS_AS(s.update(5, filled(3, 1.f)), Error);
}

TEST_CASE("checkpoint and restore roll back updates") {
  EmbeddingStore s(2, 2, 1);
  s.update(0, filled(2, 1.f));
  auto ck = s.checkpoint();
  SECTION("restore discards later updates") {
    s.update(0, filled(2, 9.f));
    s.update(1, filled(2, 9.f));
    s.restore(ck);
    CHECK(s.latest(0).value == filled(2, 1.f));
    CHECK(s.latest_version(1) == 0);
  }
  SECTION("immediate restore is a no-op") {
    s.restore(ck);
    CHECK(s.latest(0).value == filled(2, 1.f));
  }
  SECTION("token goes stale after commit") {
    s.commit();
    CHECK_THROWS_AS(s.restore(ck), Error);
  }
}

TEST_CASE("commit folds versions into the base array") {
  EmbeddingStore s(2, 2, 1);
  s.update(0, filled(2, 3.f));
  s.commit();
  CHECK(s.latest(0).value == filled(2, 3.f));
  CHECK(s.latest_version(0) == 0);
  CHECK(s.stored_vector_count() == 2);
  s.commit();  // idempotent
  CHECK(s.latest(0).value == filled(2, 3.f));
}

TEST_CASE("add_node appends deterministically") {
  EmbeddingStore a(2, 3, 5);
  EmbeddingStore b(2, 3, 5);
  CHECK(a.add_node() == 2);
  CHECK(b.add_node() == 2);
  CHECK(a.base_value(2) == b.base_value(2));
  CHECK(a.latest_version(2) == 0);
}

TEST_CASE("version monotonicity and full-history equivalence") {
  std::mt19937_64 rng(42);
  const std::size_t nodes = 12, dim = 4;
  EmbeddingStore s(nodes, dim, 7);
  std::vector<std::vector<float>> z0;
  for (NodeId n = 0; n < nodes; ++n) z0.push_back(s.base_value(n));
  oracles::RefEmbStore ref(z0);

  std::vector<std::uint32_t> expected_version(nodes, 0);
  const std::size_t updates = 600;
  for (std::size_t i = 0; i < updates; ++i) {
    NodeId n = static_cast<NodeId>(rng() % nodes);
    std::vector<float> x(dim);
    for (auto& f : x) f = static_cast<float>(rng() % 1000) / 100.f;
    std::uint32_t v = s.update(n, x);
    CHECK(v == ++expected_version[n]);  // versions count 1,2,3,... per node
    ref.update(n, x);
  }
  for (NodeId n = 0; n < nodes; ++n) {
    REQUIRE(s.latest_version(n) == ref.latest(n));
    for (std::uint32_t v = 0; v <= s.latest_version(n); ++v) {
      REQUIRE(s.get_version(n, v) == ref.get(n, v));
    }
  }
  // Bounded memory: exactly one vector per node plus one per update.
  CHECK(s.stored_vector_count() == nodes + updates);
}

TEST_CASE("get_version cost does not grow with history depth") {
  auto probe = [](std::size_t versions) {
    EmbeddingStore s(4, 8, 1);
    for (std::size_t i = 0; i < versions; ++i) s.update(1, std::vector<float>(8, 1.f));
    std::mt19937_64 rng(3);
    auto begin = std::chrono::steady_clock::now();
    constexpr int kProbes = 20000;
    volatile float sink = 0;
    for (int i = 0; i < kProbes; ++i) {
      std::uint32_t v = static_cast<std::uint32_t>(rng() % (versions + 1));
      sink = sink + s.get_version(1, v)[0];
    }
    return std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - begin)
               .count() /
           kProbes;
  };
  double shallow = probe(100);
  double deep = probe(10000);
  INFO("per-get ns: shallow=" << shallow << " deep=" << deep);
  CHECK(deep < 2.0 * shallow + 200.0);
}
