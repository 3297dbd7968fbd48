#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "dgstream/auc.hpp"
#include "dgstream/dep_graph.hpp"
#include "dgstream/metrics.hpp"
#include "dgstream/model.hpp"
#include "dgstream/pipeline.hpp"
#include "dgstream/scheduler.hpp"
#include "dgstream/stream_io.hpp"
#include "dgstream/window.hpp"

namespace dgstream {

enum class TrainMode { Batch, Slide, AdaSlide };

inline const char* mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::Batch: return "batch";
    case TrainMode::Slide: return "slide";
    case TrainMode::AdaSlide: return "adaslide";
  }
  return "?";
}

inline TrainMode parse_mode(const std::string& s) {
  if (s == "batch") return TrainMode::Batch;
  if (s == "slide") return TrainMode::Slide;
  if (s == "adaslide") return TrainMode::AdaSlide;
  raise(Errc::InvalidArgument, "unknown mode: " + s);
}

struct TrainConfig {
  TrainMode mode = TrainMode::Slide;
  std::size_t window = 200;  // fixed window / batch size
  std::size_t stride = 40;
  std::size_t min_window = 100;  // adaptive bounds [L, H]
  std::size_t max_window = 300;
  double stride_frac = 0.2;
  std::size_t epochs = 20;
  std::size_t negatives = 5;
  double lr = 0.05;
  OptMethod optimizer = OptMethod::SGD;
  std::size_t dim = 64;
  int hops = 1;
  DepMode dep_mode = DepMode::Paper;
  std::size_t workers = 1;
  bool pipeline = false;
  bool pipe_wd = true, pipe_da = true, pipe_es = true;  // pipeline ablation switches
  bool deterministic = true;
  bool evaluate = true;
  double pipeline_timeout_s = 300.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 1) raise(Errc::InvalidArgument, "epochs must be >= 1");
    if (lr <= 0) raise(Errc::InvalidArgument, "lr must be > 0");
    if (workers < 1) raise(Errc::InvalidArgument, "workers must be >= 1");
    if (hops < 1) raise(Errc::InvalidArgument, "hops must be >= 1");
    if (mode == TrainMode::AdaSlide) {
      if (min_window < 1 || min_window > max_window) {
        raise(Errc::InvalidArgument, "need 1 <= L <= H");
      }
      if (!(stride_frac > 0.0) || stride_frac > 1.0) {
        raise(Errc::InvalidArgument, "stride fraction must be in (0,1]");
      }
    } else {
      if (window < 1) raise(Errc::InvalidArgument, "window size must be >= 1");
      std::size_t d = mode == TrainMode::Batch ? window : stride;
      if (d < 1 || d > window) raise(Errc::InvalidArgument, "stride must satisfy 1 <= d <= window");
    }
  }

  std::size_t fixed_stride() const { return mode == TrainMode::Batch ? window : stride; }
  bool windows_overlap() const {
    return mode == TrainMode::AdaSlide ? stride_frac < 1.0 : fixed_stride() < window;
  }
};

/// Deterministic seed derivation for per-event RNG streams.
inline std::uint64_t mix_seed(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

/// Uniform negative partners for (e.u, *): nodes excluding u, v, and u's
/// out-neighbors as captured in the event's snapshot. Falls back to excluding
/// only {u, v} when too few candidates remain (degraded mode).
inline std::vector<NodeId> sample_negatives(const EventSubgraph& sub, std::size_t node_count,
                                            std::size_t count, std::mt19937_64& rng,
                                            bool* degraded = nullptr) {
  if (count == 0 || node_count < 3) return {};
  NodeId u = sub.event.u;
  NodeId v = sub.event.v;
  const auto& out_edges = sub.out_of(u);
  std::unordered_set<NodeId> excluded{u, v};
  for (const AdjEntry& e : out_edges) excluded.insert(e.nbr);
  std::size_t eligible = node_count - std::min(node_count, excluded.size());
  if (eligible < count) {
    if (degraded) *degraded = true;
    excluded = {u, v};
    eligible = node_count - 2;
    if (eligible == 0) return {};
  }
  std::vector<NodeId> out;
  out.reserve(count);
  if (eligible < 4 * count || node_count < 256) {
    std::vector<NodeId> pool;
    pool.reserve(eligible);
    for (NodeId n = 0; n < node_count; ++n) {
      if (!excluded.count(n)) pool.push_back(n);
    }
    if (pool.empty()) return {};
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t i = 0; i < count; ++i) out.push_back(pool[pick(rng)]);
  } else {
    std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(node_count - 1));
    for (std::size_t i = 0; i < count; ++i) {
      NodeId w = pick(rng);
      while (excluded.count(w)) w = pick(rng);
      out.push_back(w);
    }
  }
  return out;
}

/// Orchestrates the whole training loop: window determination, dependency
/// analysis, event scheduling, and parallel training, optionally pipelined
/// across windows with bounded hand-off queues.
template <typename R = float>
class Trainer {
 public:
  Trainer(const GraphStream& stream, DynModel<R>& model, TrainConfig cfg, MetricsSink& sink)
      : stream_(stream),
        model_(model),
        cfg_(cfg),
        sink_(sink),
        g_(DynGraph::from_initial(stream.initial)),
        emb_(stream.initial.node_count, model.dim(), mix_seed(cfg.seed, 0xe5bull)),
        opt_(cfg.optimizer, static_cast<R>(cfg.lr)),
        t0_(std::chrono::steady_clock::now()) {
    cfg_.validate();
  }

  /// Algorithm: slide a window over the stream; per window run dependency
  /// analysis, scheduling, and multi-epoch training; graph and embeddings
  /// persist across windows.
  void run() {
    if (cfg_.pipeline) {
      run_staged(cfg_.pipe_wd, cfg_.pipe_da, cfg_.pipe_es);
    } else {
      run_staged(false, false, false);
    }
  }

  DynGraph& graph() { return g_; }
  EmbeddingStore& embeddings() { return emb_; }
  std::size_t degraded_negative_samples() const { return degraded_.load(); }

  /// Forward-only scoring of stream events [begin, end) on the current
  /// state: structural updates are applied (once), embeddings evolve during
  /// the pass and are restored afterward, parameters stay untouched. Returns
  /// rank AUC over positive pairs and sampled negatives.
  double evaluate_slice(std::size_t begin, std::size_t end, std::size_t window_index,
                        std::size_t epoch) {
    end = std::min(end, stream_.size());
    if (begin >= end) raise(Errc::DegenerateInput, "empty evaluation slice");
    auto ck = emb_.checkpoint();
    Tape<R> tape(nullptr, /*grad_enabled=*/false);
    auto bound = model_.bind(tape, false);
    std::vector<ScoredSample> scored;
    for (std::size_t seq = begin; seq < end; ++seq) {
      const Event& e = stream_.events[seq];
      if (static_cast<std::int64_t>(e.seq) > g_.watermark()) {
        g_.apply_structural(e);
        if (e.kind == EventKind::AddNode) emb_.add_node();
      }
      EventSubgraph sub = g_.get_subgraph(e, cfg_.hops, /*touch=*/false);
      auto outcome = model_.process_event(tape, bound, sub, emb_, -1);
      if (!outcome.has_logit) continue;
      scored.push_back({static_cast<double>(tape.value(outcome.logit).scalar()), 1});
      std::mt19937_64 rng(eval_rng_seed(window_index, epoch, seq));
      bool degraded = false;
      for (NodeId w : sample_negatives(sub, g_.node_count(), cfg_.negatives, rng, &degraded)) {
        auto zw = tape.external(emb_.base_value(w), ProducerRef{});
        auto lg = model_.predict_pair(tape, bound, outcome.z_u, zw);
        scored.push_back({static_cast<double>(tape.value(lg).scalar()), 0});
      }
      if (degraded) ++degraded_;
    }
    emb_.restore(ck);
    bool has_pos = false, has_neg = false;
    for (const auto& s : scored) (s.label ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) return std::nan("");
    return compute_auc(scored);
  }

 private:
  struct Sample {
    typename Tape<R>::Id bce;  // fragment-provisional id
    double logit;
    int label;
  };

  struct WindowJob {
    std::size_t index = 0;
    Window window;
    WindowAnalysis analysis;
    std::vector<std::vector<std::vector<NodeId>>> negatives;  // [epoch][event]
    double wd_ms = 0, da_ms = 0, es_ms = 0;
  };

  double now_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_)
        .count();
  }

  std::uint64_t train_rng_seed(std::size_t window_index, std::size_t epoch, std::size_t seq) const {
    std::uint64_t h = mix_seed(cfg_.seed, 0x7261696eull);  // train stream
    h = mix_seed(h, window_index);
    h = mix_seed(h, epoch);
    return mix_seed(h, seq);
  }

  std::uint64_t eval_rng_seed(std::size_t window_index, std::size_t epoch, std::size_t seq) const {
    std::uint64_t h = mix_seed(cfg_.seed, 0x6576616cull);  // eval stream
    h = mix_seed(h, window_index);
    h = mix_seed(h, epoch);
    return mix_seed(h, seq);
  }

  /// WD: the next window at `pos`, or an empty window at stream end.
  Window determine_window(std::size_t pos, std::size_t& next_pos) {
    if (cfg_.mode == TrainMode::AdaSlide) {
      Window w = next_adaptive_window(stream_, pos, cfg_.min_window, cfg_.max_window);
      next_pos = w.empty() ? pos : pos + adaptive_stride(w.size(), cfg_.stride_frac);
      return w;
    }
    auto [w, np] = next_fixed_window(stream_, pos, cfg_.window, cfg_.fixed_stride());
    next_pos = np;
    return w;
  }

  /// DA: apply structural updates, capture per-event subgraphs, build the
  /// dependency graph. Mutates graph topology; runs in at most one thread.
  void analyze(WindowJob& job) {
    double begin = now_ms();
    int radius = model_.update_radius();
    job.analysis =
        build_dep_graph(stream_, job.window, g_, cfg_.hops, radius, cfg_.dep_mode,
                        [this](NodeId) { emb_.add_node(); });
    job.da_ms = now_ms() - begin;
    sink_.interval("da", begin, now_ms());
  }

  /// ES: turn the dependency graph into an execution plan; negative partners
  /// for every (epoch, event) are drawn here so the training stage only
  /// touches frozen data.
  void plan(WindowJob& job) {
    double begin = now_ms();
    std::size_t n = job.window.size();
    job.negatives.assign(cfg_.epochs, std::vector<std::vector<NodeId>>(n));
    for (std::size_t epoch = 1; epoch <= cfg_.epochs; ++epoch) {
      for (std::size_t i = 0; i < n; ++i) {
        const EventAnalysis& ea = job.analysis.events[i];
        if (ea.subgraph.event.single_node()) continue;
        std::mt19937_64 rng(train_rng_seed(job.index, epoch, ea.subgraph.event.seq));
        bool degraded = false;
        job.negatives[epoch - 1][i] = sample_negatives(ea.subgraph, job.analysis.node_count,
                                                       cfg_.negatives, rng, &degraded);
        if (degraded) ++degraded_;
      }
    }
    job.es_ms = now_ms() - begin;
    sink_.interval("es", begin, now_ms());
  }

  /// PT: per epoch, restore embeddings to the window start, execute the
  /// window under the dependency schedule collecting positive and negative
  /// logits, take mean BCE over all samples, backprop through the merged
  /// tape, and step the optimizer. Embeddings commit after the last epoch.
  void train_window(WindowJob& job) {
    double pt_begin = now_ms();
    const std::size_t n = job.window.size();
    const auto& analysis = job.analysis;
    auto ck = emb_.checkpoint();

    for (std::size_t epoch = 1; epoch <= cfg_.epochs; ++epoch) {
      emb_.restore(ck);
      Tape<R> base;
      auto bound = model_.bind(base, /*requires_grad=*/true);
      const typename Tape<R>::Id frag_base = base.end_id();

      std::vector<std::optional<Tape<R>>> frags(n);
      std::vector<std::vector<Sample>> samples(n);
      auto executor = [&](std::size_t i) {
        Tape<R>& frag = frags[i].emplace(&base, true);
        const EventAnalysis& ea = analysis.events[i];
        auto outcome =
            model_.process_event(frag, bound, ea.subgraph, emb_, static_cast<std::int64_t>(i));
        if (!outcome.has_logit) return;
        samples[i].push_back({frag.bce_with_logits(outcome.logit, R(1)),
                              static_cast<double>(frag.value(outcome.logit).scalar()), 1});
        for (NodeId w : job.negatives[epoch - 1][i]) {
          auto zw = frag.external(emb_.base_value(w), ProducerRef{});
          auto lg = model_.predict_pair(frag, bound, outcome.z_u, zw);
          samples[i].push_back({frag.bce_with_logits(lg, R(0)),
                                static_cast<double>(frag.value(lg).scalar()), 0});
        }
      };
      auto completion = run_schedule(analysis.graph, executor, cfg_.workers);

      // Merge fragments: event order in deterministic mode (bit-equal to a
      // sequential run), completion order otherwise.
      std::vector<std::uint32_t> order;
      if (cfg_.deterministic) {
        order.resize(n);
        std::iota(order.begin(), order.end(), 0);
      } else {
        order = completion;
      }
      std::vector<typename Tape<R>::Id> offset(n, 0);
      auto resolve = [&](const ProducerRef& ref) {
        return offset[static_cast<std::size_t>(ref.event)] + (ref.local_id - frag_base);
      };
      for (std::uint32_t idx : order) {
        offset[idx] = base.absorb(std::move(*frags[idx]), resolve);
        frags[idx].reset();
      }

      std::vector<typename Tape<R>::Id> losses;
      for (std::size_t i = 0; i < n; ++i) {
        for (const Sample& s : samples[i]) losses.push_back(offset[i] + (s.bce - frag_base));
      }

      double loss_value = std::nan("");
      if (!losses.empty()) {
        auto loss = base.mean_vectors(losses);
        loss_value = static_cast<double>(base.value(loss).scalar());
        if (!std::isfinite(loss_value)) {
          raise(Errc::NonFinite, "loss diverged in window " + std::to_string(job.index) +
                                     " epoch " + std::to_string(epoch));
        }
        base.backward(loss);
        std::vector<Tensor<R>*> grads;
        grads.reserve(bound.ids.size());
        for (auto id : bound.ids) grads.push_back(base.mutable_grad(id));
        opt_.step(model_.param_tensors(), grads);
      }

      MetricsRecord rec;
      rec.window = job.index;
      rec.window_begin = job.window.begin;
      rec.window_size = n;
      rec.epoch = epoch;
      rec.loss = loss_value;
      rec.chains = analysis.graph.chain_count;
      rec.parallelism = analysis.graph.parallelism();
      rec.wd_ms = job.wd_ms;
      rec.da_ms = job.da_ms;
      rec.es_ms = job.es_ms;
      if (cfg_.evaluate) rec.auc = epoch_auc(job, epoch, samples);
      rec.pt_ms = now_ms() - pt_begin;
      sink_.record(rec);
    }
    emb_.commit();
    sink_.interval("pt", pt_begin, now_ms());
    {
      std::lock_guard lock(fence_mu_);
      last_pt_done_ = static_cast<std::int64_t>(job.index);
    }
    fence_cv_.notify_all();
  }

  /// Per-epoch AUC. The adaptive mode scores its own last 20% from the
  /// training pass (prequential: each logit was computed before that event's
  /// loss contributed to any update). The fixed modes score the adjacent
  /// slice with a forward-only pass.
  double epoch_auc(const WindowJob& job, std::size_t epoch,
                   const std::vector<std::vector<Sample>>& samples) {
    std::size_t n = job.window.size();
    if (cfg_.mode == TrainMode::AdaSlide) {
      std::size_t tail = n / 5;
      if (tail == 0) return std::nan("");
      std::vector<ScoredSample> scored;
      bool has_pos = false, has_neg = false;
      for (std::size_t i = n - tail; i < n; ++i) {
        for (const Sample& s : samples[i]) {
          scored.push_back({s.logit, s.label});
          (s.label ? has_pos : has_neg) = true;
        }
      }
      if (!has_pos || !has_neg) return std::nan("");
      return compute_auc(scored);
    }
    std::size_t slice = cfg_.mode == TrainMode::Batch ? cfg_.window : cfg_.stride;
    if (job.window.end >= stream_.size()) return std::nan("");  // nothing adjacent
    return evaluate_slice(job.window.end, job.window.end + slice, job.index, epoch);
  }

  /// One engine for both execution modes: stages WD -> DA -> ES -> PT with a
  /// thread boundary after each stage whose flag is set (none set == plain
  /// sequential loop). Bounded queues (capacity 1) hand windows across
  /// boundaries. DA stalls until the previous window committed whenever
  /// windows overlap or the evaluation pass walks the live graph, since both
  /// break the single-writer guarantee otherwise.
  void run_staged(bool wd_threaded, bool da_threaded, bool es_threaded) {
    last_pt_done_ = -1;
    bool fence = cfg_.windows_overlap() || (cfg_.evaluate && cfg_.mode != TrainMode::AdaSlide);

    // Stage bodies. WD is the generator.
    std::size_t pos = 0;
    std::size_t index = 0;
    auto wd_next = [&]() -> std::optional<WindowJob> {
      double begin = now_ms();
      WindowJob job;
      job.index = index;
      std::size_t next_pos = pos;
      job.window = determine_window(pos, next_pos);
      if (job.window.empty()) return std::nullopt;
      pos = next_pos;
      ++index;
      job.wd_ms = now_ms() - begin;
      sink_.interval("wd", begin, now_ms());
      return job;
    };
    auto da_stage = [&](WindowJob& job) {
      if (fence && job.index > 0) {
        std::unique_lock lock(fence_mu_);
        if (!fence_cv_.wait_for(lock, std::chrono::duration<double>(cfg_.pipeline_timeout_s), [&] {
              return last_pt_done_ >= static_cast<std::int64_t>(job.index) - 1;
            })) {
          raise(Errc::PipelineStalled, "dependency analysis fenced past heartbeat timeout");
        }
      }
      analyze(job);
    };
    auto es_stage = [&](WindowJob& job) { plan(job); };
    auto pt_stage = [&](WindowJob& job) { train_window(job); };

    // Segment the chain at each threaded boundary.
    using StageFn = std::function<void(WindowJob&)>;
    std::vector<std::vector<StageFn>> segments;
    std::vector<StageFn> current;
    auto cut = [&](bool threaded) {
      if (threaded) {
        segments.push_back(std::move(current));
        current.clear();
      }
    };
    cut(wd_threaded);  // WD itself is the generator; a cut here detaches it
    current.push_back(da_stage);
    cut(da_threaded);
    current.push_back(es_stage);
    cut(es_threaded);
    current.push_back(pt_stage);
    segments.push_back(std::move(current));

    if (segments.size() == 1) {
      // Fully sequential: no threads, no queues.
      while (auto job = wd_next()) {
        for (auto& fn : segments[0]) fn(*job);
      }
      return;
    }

    std::vector<std::unique_ptr<BoundedQueue<WindowJob>>> queues;
    for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
      queues.push_back(std::make_unique<BoundedQueue<WindowJob>>(1, cfg_.pipeline_timeout_s));
    }
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto fail = [&](std::exception_ptr e) {
      std::lock_guard lock(err_mu);
      if (!first_error) first_error = e;
      for (auto& q : queues) q->close();
    };
    auto run_segment = [&](std::size_t k) {
      try {
        for (;;) {
          std::optional<WindowJob> job = k == 0 ? wd_next() : queues[k - 1]->pop();
          if (!job) break;
          for (auto& fn : segments[k]) fn(*job);
          if (k < queues.size()) queues[k]->push(std::move(*job));
        }
        if (k < queues.size()) queues[k]->close();
      } catch (...) {
        fail(std::current_exception());
      }
    };

    std::vector<std::thread> threads;
    for (std::size_t k = 0; k + 1 < segments.size(); ++k) {
      threads.emplace_back(run_segment, k);
    }
    run_segment(segments.size() - 1);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  const GraphStream& stream_;
  DynModel<R>& model_;
  TrainConfig cfg_;
  MetricsSink& sink_;
  DynGraph g_;
  EmbeddingStore emb_;
  Optimizer<R> opt_;
  std::chrono::steady_clock::time_point t0_;
  std::atomic<std::size_t> degraded_{0};
  std::mutex fence_mu_;
  std::condition_variable fence_cv_;
  std::int64_t last_pt_done_ = -1;
};

/// Algorithm-2 style non-pipelined training over the whole stream.
template <typename R = float>
inline void train_stream(const GraphStream& stream, DynModel<R>& model, TrainConfig cfg,
                         MetricsSink& sink) {
  cfg.pipeline = false;
  Trainer<R>(stream, model, cfg, sink).run();
}

/// Four-stage pipelined run; identical metrics-relevant output in
/// deterministic mode.
template <typename R = float>
inline void run_pipeline(const GraphStream& stream, DynModel<R>& model, TrainConfig cfg,
                         MetricsSink& sink) {
  cfg.pipeline = true;
  Trainer<R>(stream, model, cfg, sink).run();
}

}  // namespace dgstream
