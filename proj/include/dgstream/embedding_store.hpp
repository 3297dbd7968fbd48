#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "dgstream/errors.hpp"
#include "dgstream/event.hpp"

namespace dgstream {

/// Identifies the tape node that produced a stored embedding version, so a
/// later event's read can be stitched to it when per-event tape segments are
/// merged for the window-level backward pass. event < 0 means the value is a
/// constant (version 0 or a committed value).
struct ProducerRef {
  std::int64_t event = -1;
  std::uint32_t local_id = 0;

  bool is_constant() const { return event < 0; }
};

struct EmbeddingRead {
  std::vector<float> value;
  ProducerRef producer;
};

/// Multi-version node embedding storage: an initial array (version 0),
/// per-version update layers keyed by node id, and a per-node latest-version
/// array. Historical versions stay addressable for the backward pass; memory
/// is num_nodes + number-of-updates vectors, never full snapshots.
///
/// Concurrency: reads take a shared lock, updates an exclusive one. The
/// scheduler guarantees no two in-flight events write the same node.
class EmbeddingStore {
 public:
  EmbeddingStore(std::size_t num_nodes, std::size_t dim, std::uint64_t seed)
      : dim_(dim), rng_(seed) {
    if (dim == 0) raise(Errc::InvalidArgument, "dim must be >= 1");
    z0_.reserve(num_nodes);
    for (std::size_t i = 0; i < num_nodes; ++i) z0_.push_back(random_vector());
    latest_.assign(num_nodes, 0);
  }

  std::size_t dim() const { return dim_; }
  std::size_t node_count() const {
    std::shared_lock lock(mu_);
    return z0_.size();
  }

  /// Appends a freshly initialized node embedding; returns its id.
  NodeId add_node() {
    std::unique_lock lock(mu_);
    z0_.push_back(random_vector());
    latest_.push_back(0);
    return static_cast<NodeId>(z0_.size() - 1);
  }

  std::uint32_t latest_version(NodeId n) const {
    std::shared_lock lock(mu_);
    check_node(n);
    return latest_[n];
  }

  EmbeddingRead latest(NodeId n) const {
    std::shared_lock lock(mu_);
    check_node(n);
    std::uint32_t v = latest_[n];
    if (v == 0) return {z0_[n], ProducerRef{}};
    const Slot& slot = layers_[v - 1].at(n);
    return {slot.value, slot.producer};
  }

  std::vector<float> get_version(NodeId n, std::uint32_t version) const {
    std::shared_lock lock(mu_);
    check_node(n);
    if (version > latest_[n]) {
      raise(Errc::VersionNotFound, "node " + std::to_string(n) + " version " +
                                       std::to_string(version) + " > latest " +
                                       std::to_string(latest_[n]));
    }
    if (version == 0) return z0_[n];
    return layers_[version - 1].at(n).value;
  }

  /// The committed (window-start) value, ignoring in-window updates.
  std::vector<float> base_value(NodeId n) const {
    std::shared_lock lock(mu_);
    check_node(n);
    return z0_[n];
  }

  /// Stores x as node n's next version; returns the new version number.
  std::uint32_t update(NodeId n, std::vector<float> x, ProducerRef producer = {}) {
    if (x.size() != dim_) {
      raise(Errc::DimensionMismatch,
            "vector size " + std::to_string(x.size()) + " != dim " + std::to_string(dim_));
    }
    for (float f : x) {
      if (!std::isfinite(f)) raise(Errc::NonFinite, "embedding update for node " + std::to_string(n));
    }
    std::unique_lock lock(mu_);
    check_node(n);
    std::uint32_t v = ++latest_[n];
    if (layers_.size() < v) layers_.resize(v);
    layers_[v - 1][n] = Slot{std::move(x), producer};
    return v;
  }

  struct Checkpoint {
    std::uint64_t generation;
    std::vector<std::uint32_t> latest;
  };

  Checkpoint checkpoint() const {
    std::shared_lock lock(mu_);
    return {generation_, latest_};
  }

  /// Discards every update made after the checkpoint. Nodes added since keep
  /// their initial embedding and go back to version 0.
  void restore(const Checkpoint& ck) {
    std::unique_lock lock(mu_);
    if (ck.generation != generation_) {
      raise(Errc::StaleToken, "checkpoint predates a commit");
    }
    for (NodeId n = 0; n < latest_.size(); ++n) {
      std::uint32_t keep = n < ck.latest.size() ? ck.latest[n] : 0;
      for (std::uint32_t v = keep + 1; v <= latest_[n]; ++v) layers_[v - 1].erase(n);
      latest_[n] = keep;
    }
    while (!layers_.empty() && layers_.back().empty()) layers_.pop_back();
  }

  /// Folds every node's latest value into the version-0 array and clears the
  /// update layers, so the next window starts from the trained state.
  void commit() {
    std::unique_lock lock(mu_);
    for (NodeId n = 0; n < z0_.size(); ++n) {
      if (latest_[n] > 0) z0_[n] = layers_[latest_[n] - 1].at(n).value;
      latest_[n] = 0;
    }
    layers_.clear();
    ++generation_;
  }

  /// Total vectors held: the version-0 array plus one per update.
  std::size_t stored_vector_count() const {
    std::shared_lock lock(mu_);
    std::size_t count = z0_.size();
    for (const auto& layer : layers_) count += layer.size();
    return count;
  }

  /// Raw little-endian f32 rows of the version-0 array, for warm restarts.
  void dump_z0(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::IoFailure, "cannot open " + path);
    std::shared_lock lock(mu_);
    for (const auto& row : z0_) {
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
  }

  void load_z0(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::IoFailure, "cannot open " + path);
    std::unique_lock lock(mu_);
    for (auto& row : z0_) {
      in.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
      if (!in) raise(Errc::IoFailure, "short read from " + path);
    }
  }

 private:
  struct Slot {
    std::vector<float> value;
    ProducerRef producer;
  };

  void check_node(NodeId n) const {
    if (n >= z0_.size()) {
      raise(Errc::UnknownNode,
            std::to_string(n) + " (store has " + std::to_string(z0_.size()) + " nodes)");
    }
  }

  std::vector<float> random_vector() {
    std::normal_distribution<float> dist(0.0f, 0.1f);
    std::vector<float> v(dim_);
    for (auto& x : v) x = dist(rng_);
    return v;
  }

  std::size_t dim_;
  std::vector<std::vector<float>> z0_;
  std::vector<std::unordered_map<NodeId, Slot>> layers_;  // layers_[v-1] holds version v
  std::vector<std::uint32_t> latest_;
  std::uint64_t generation_ = 0;
  std::mt19937_64 rng_;
  mutable std::shared_mutex mu_;
};

}  // namespace dgstream
