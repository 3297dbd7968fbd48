#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dgstream/dyn_graph.hpp"
#include "dgstream/embedding_store.hpp"
#include "dgstream/tensor.hpp"
#include "json.hpp"

namespace dgstream {

template <typename R>
struct EventOutcome {
  bool has_logit = false;
  typename Tape<R>::Id logit = 0;
  typename Tape<R>::Id z_u = 0;  // post-update embedding values on the fragment
  typename Tape<R>::Id z_v = 0;
  std::vector<NodeId> touched;  // realized write set, ascending
};

/// The per-event programming model: update_graph / aggregate / update_emb /
/// prop_update / predict. A model's update_radius declares how far writes
/// reach: 0 keeps them on the event nodes, 1 adds the captured 1-hop
/// neighbors (diffusion models).
template <typename R>
class DynModel {
 public:
  using Id = typename Tape<R>::Id;

  /// Tape leaf ids for the model parameters, in named_params() order.
  struct Bound {
    std::vector<Id> ids;
  };

  virtual ~DynModel() = default;
  virtual std::string name() const = 0;
  virtual int update_radius() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::vector<std::pair<std::string, Tensor<R>*>> named_params() = 0;

  static void update_graph(DynGraph& g, const Event& e) { g.apply_structural(e); }

  Bound bind(Tape<R>& tape, bool requires_grad) {
    Bound b;
    for (auto& [name, t] : named_params()) b.ids.push_back(tape.leaf(*t, requires_grad));
    return b;
  }

  std::vector<Tensor<R>*> param_tensors() {
    std::vector<Tensor<R>*> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
  }

  /// Executes the whole per-event body against a tape fragment: aggregate
  /// both event nodes, update both embeddings from the pre-event values,
  /// propagate if the model diffuses, and score the event pair. `ref_event`
  /// tags store writes so later events' reads can be stitched to this
  /// fragment when tapes merge.
  virtual EventOutcome<R> process_event(Tape<R>& frag, const Bound& p, const EventSubgraph& sub,
                                        EmbeddingStore& emb, std::int64_t ref_event) = 0;

  /// Link score for an arbitrary embedding pair (used for negative samples).
  virtual Id predict_pair(Tape<R>& frag, const Bound& p, Id z_a, Id z_b) = 0;

  virtual void save(const std::string& path) = 0;
  virtual void load(const std::string& path) = 0;
};

/// Point-process-flavored reference model. Each event node's new embedding
/// combines aggregated in-neighbor state, its own previous state, and an
/// elapsed-time drive:
///   h_n  = tanh(W_agg . mean_{w in N_in(n)} z_w),  0 when n has no in-neighbors
///   z_n' = tanh(W_peer . h_peer + W_self . z_n + w_time . log(1+dt) + b)
/// The link score is affine over the concatenated pair.
template <typename R>
class DyRepLite : public DynModel<R> {
 public:
  using Id = typename Tape<R>::Id;
  using Bound = typename DynModel<R>::Bound;
  enum Slot : std::size_t { kAgg = 0, kSelf, kPeer, kTime, kBias, kPred, kPredBias, kSlotCount };

  DyRepLite(std::size_t dim, std::uint64_t seed, bool zero_init = false) : dim_(dim) {
    agg_ = Tensor<R>(dim, dim);
    self_ = Tensor<R>(dim, dim);
    peer_ = Tensor<R>(dim, dim);
    time_ = Tensor<R>(dim, 1);
    bias_ = Tensor<R>(dim, 1);
    pred_ = Tensor<R>(2 * dim, 1);
    pred_bias_ = Tensor<R>(1, 1);
    if (!zero_init) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> dist(0.0, 0.1);
      for (Tensor<R>* t : {&agg_, &self_, &peer_, &time_, &pred_}) {
        for (auto& x : t->data) x = static_cast<R>(dist(rng));
      }
    }
  }

  std::string name() const override { return "dyrep-lite"; }
  int update_radius() const override { return 0; }
  std::size_t dim() const override { return dim_; }

  std::vector<std::pair<std::string, Tensor<R>*>> named_params() override {
    return {{"agg_weight", &agg_},   {"self_weight", &self_}, {"peer_weight", &peer_},
            {"time_weight", &time_}, {"bias", &bias_},        {"pred_weight", &pred_},
            {"pred_bias", &pred_bias_}};
  }

  /// h_n over the snapshot's in-neighbors; exact zero when there are none.
  Id aggregate(Tape<R>& frag, const Bound& p, const EventSubgraph& sub, EmbeddingStore& emb,
               NodeId n) {
    if (n != sub.event.u && n != sub.event.v) raise(Errc::InvalidArgument, "not an event node");
    const auto& in_edges = sub.in_of(n);
    if (in_edges.empty()) return frag.constant(Tensor<R>(dim_, 1));
    std::vector<Id> nbrs;
    nbrs.reserve(in_edges.size());
    for (const AdjEntry& e : in_edges) {
      EmbeddingRead read = emb.latest(e.nbr);
      nbrs.push_back(frag.external(read.value, read.producer));
    }
    return frag.tanh_(frag.matvec(p.ids[kAgg], frag.mean_vectors(nbrs)));
  }

  /// z' = tanh(W_peer h_peer + W_self z_old + w_time log1p(dt) + b).
  Id update_emb(Tape<R>& frag, const Bound& p, Id z_old, Id h_self, Id h_peer, double dt) {
    (void)h_self;  // self aggregation enters through z_old; kept for the API shape
    if (dt < 0) raise(Errc::InvalidArgument, "negative elapsed time");
    Id acc = frag.add(frag.matvec(p.ids[kPeer], h_peer), frag.matvec(p.ids[kSelf], z_old));
    Id drive = frag.scale(p.ids[kTime], static_cast<R>(std::log1p(dt)));
    return frag.tanh_(frag.add(frag.add(acc, drive), p.ids[kBias]));
  }

  Id predict(Tape<R>& frag, const Bound& p, Id z_u, Id z_v) {
    return frag.add(frag.dot(p.ids[kPred], frag.concat(z_u, z_v)), p.ids[kPredBias]);
  }

  Id predict_pair(Tape<R>& frag, const Bound& p, Id z_a, Id z_b) override {
    return predict(frag, p, z_a, z_b);
  }

  EventOutcome<R> process_event(Tape<R>& frag, const Bound& p, const EventSubgraph& sub,
                                EmbeddingStore& emb, std::int64_t ref_event) override {
    const Event& ev = sub.event;
    EventOutcome<R> out;
    if (ev.single_node()) {
      EmbeddingRead old_u = emb.latest(ev.u);
      Id z_old = frag.external(old_u.value, old_u.producer);
      Id h = aggregate(frag, p, sub, emb, ev.u);
      Id z_new = update_emb(frag, p, z_old, h, h, sub.delta_u);
      write(frag, emb, ev.u, z_new, ref_event);
      out.z_u = out.z_v = z_new;
      out.touched = {ev.u};
      return out;
    }
    // Both aggregations and both old values are read before either write.
    EmbeddingRead old_u = emb.latest(ev.u);
    EmbeddingRead old_v = emb.latest(ev.v);
    Id z_u_old = frag.external(old_u.value, old_u.producer);
    Id z_v_old = frag.external(old_v.value, old_v.producer);
    Id h_u = aggregate(frag, p, sub, emb, ev.u);
    Id h_v = aggregate(frag, p, sub, emb, ev.v);
    Id z_u_new = update_emb(frag, p, z_u_old, h_u, h_v, sub.delta_u);
    Id z_v_new = update_emb(frag, p, z_v_old, h_v, h_u, sub.delta_v);
    write(frag, emb, ev.u, z_u_new, ref_event);
    write(frag, emb, ev.v, z_v_new, ref_event);
    out.touched = {std::min(ev.u, ev.v), std::max(ev.u, ev.v)};
    propagate(frag, p, sub, emb, ev.u, z_u_old, z_u_new, sub.delta_u, ref_event, out.touched);
    propagate(frag, p, sub, emb, ev.v, z_v_old, z_v_new, sub.delta_v, ref_event, out.touched);
    out.logit = predict(frag, p, z_u_new, z_v_new);
    out.has_logit = true;
    out.z_u = z_u_new;
    out.z_v = z_v_new;
    return out;
  }

  void save(const std::string& path) override { save_params(path, this); }
  void load(const std::string& path) override { load_params(path, this); }

 protected:
  virtual void propagate(Tape<R>&, const Bound&, const EventSubgraph&, EmbeddingStore&, NodeId,
                         Id, Id, double, std::int64_t, std::vector<NodeId>&) {
    // Radius-0 models leave neighbors untouched.
  }

  void write(Tape<R>& frag, EmbeddingStore& emb, NodeId n, Id value_id, std::int64_t ref_event) {
    const Tensor<R>& t = frag.value(value_id);
    std::vector<float> v(t.data.begin(), t.data.end());
    emb.update(n, std::move(v), ProducerRef{ref_event, value_id});
  }

  template <typename M>
  static void save_params(const std::string& path, M* model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::IoFailure, "cannot open " + path);
    nlohmann::json header;
    header["model"] = model->name();
    header["dim"] = model->dim();
    header["dtype"] = "f32";
    auto params = model->named_params();
    for (auto& [name, t] : params) {
      header["params"].push_back({{"name", name}, {"rows", t->rows}, {"cols", t->cols}});
    }
    model->extend_header(header);
    out << header.dump() << "\n";
    for (auto& [name, t] : params) {
      std::vector<float> row(t->data.begin(), t->data.end());
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
  }

  template <typename M>
  static void load_params(const std::string& path, M* model) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::IoFailure, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) raise(Errc::IoFailure, "missing header in " + path);
    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded()) raise(Errc::IoFailure, "bad header in " + path);
    if (header.value("model", "") != model->name()) {
      raise(Errc::InvalidArgument, "params file is for model " + header.value("model", "?"));
    }
    auto params = model->named_params();
    if (!header.contains("params") || header["params"].size() != params.size()) {
      raise(Errc::InvalidArgument, "parameter list mismatch in " + path);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& meta = header["params"][i];
      Tensor<R>* t = params[i].second;
      if (meta.value("name", "") != params[i].first || meta.value("rows", std::size_t(0)) != t->rows ||
          meta.value("cols", std::size_t(0)) != t->cols) {
        raise(Errc::InvalidArgument, "parameter shape mismatch for " + params[i].first);
      }
      std::vector<float> row(t->size());
      in.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
      if (!in) raise(Errc::IoFailure, "short read in " + path);
      for (std::size_t j = 0; j < row.size(); ++j) t->data[j] = static_cast<R>(row[j]);
    }
    model->read_header(header);
  }

  virtual void extend_header(nlohmann::json&) {}
  virtual void read_header(const nlohmann::json&) {}

  std::size_t dim_;
  Tensor<R> agg_, self_, peer_, time_, bias_, pred_, pred_bias_;

  template <typename>
  friend class DiffusionLite;
};

/// Diffusion-flavored reference model: after an event node's update, the
/// change is pushed to the captured 1-hop neighbors with exponential time
/// decay:  z_w += exp(-lambda dt_n) . tanh(W_prop (z_n' - z_n)).
template <typename R>
class DiffusionLite : public DyRepLite<R> {
 public:
  using Id = typename Tape<R>::Id;
  using Bound = typename DynModel<R>::Bound;
  using Base = DyRepLite<R>;
  static constexpr std::size_t kProp = Base::kSlotCount;

  DiffusionLite(std::size_t dim, std::uint64_t seed, bool zero_init = false, double decay = 0.1)
      : Base(dim, seed, zero_init), decay_(decay) {
    if (!(decay > 0)) raise(Errc::InvalidArgument, "decay rate must be > 0");
    prop_ = Tensor<R>(dim, dim);
    if (!zero_init) {
      std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
      std::normal_distribution<double> dist(0.0, 0.1);
      for (auto& x : prop_.data) x = static_cast<R>(dist(rng));
    }
  }

  std::string name() const override { return "diffusion-lite"; }
  int update_radius() const override { return 1; }
  double decay() const { return decay_; }

  std::vector<std::pair<std::string, Tensor<R>*>> named_params() override {
    auto v = Base::named_params();
    v.push_back({"prop_weight", &prop_});
    return v;
  }

  /// The additive term shared by every neighbor of event node n.
  Id prop_shift(Tape<R>& frag, const Bound& p, Id z_old, Id z_new, double dt) {
    Id delta = frag.add(z_new, frag.scale(z_old, R(-1)));
    R factor = static_cast<R>(std::exp(-decay_ * dt));
    return frag.scale(frag.tanh_(frag.matvec(p.ids[kProp], delta)), factor);
  }

 protected:
  void propagate(Tape<R>& frag, const Bound& p, const EventSubgraph& sub, EmbeddingStore& emb,
                 NodeId n, Id z_old, Id z_new, double dt, std::int64_t ref_event,
                 std::vector<NodeId>& touched) override {
    Id shift = prop_shift(frag, p, z_old, z_new, dt);
    for (NodeId w : sub.affected) {
      if (w == sub.event.u || w == sub.event.v) continue;
      EmbeddingRead read = emb.latest(w);
      Id z_w = frag.external(read.value, read.producer);
      Id z_w_new = frag.add(z_w, shift);
      this->write(frag, emb, w, z_w_new, ref_event);
      if (!std::binary_search(touched.begin(), touched.end(), w)) {
        touched.insert(std::upper_bound(touched.begin(), touched.end(), w), w);
      }
    }
  }

  void extend_header(nlohmann::json& h) override { h["decay"] = decay_; }
  void read_header(const nlohmann::json& h) override { decay_ = h.value("decay", decay_); }

 private:
  Tensor<R> prop_;
  double decay_;
};

template <typename R>
inline std::unique_ptr<DynModel<R>> make_model(const std::string& name, std::size_t dim,
                                               std::uint64_t seed, bool zero_init = false) {
  if (name == "dyrep-lite") return std::make_unique<DyRepLite<R>>(dim, seed, zero_init);
  if (name == "diffusion-lite") return std::make_unique<DiffusionLite<R>>(dim, seed, zero_init);
  raise(Errc::InvalidArgument, "unknown model: " + name);
}

}  // namespace dgstream
