#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dgstream/embedding_store.hpp"
#include "dgstream/errors.hpp"

namespace dgstream {

/// Dense rank-1/rank-2 value. Vectors are column vectors (cols == 1);
/// matrices are row-major.
template <typename R>
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 1;
  std::vector<R> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, R(0)) {}

  static Tensor vec(std::vector<R> v) {
    Tensor t;
    t.rows = v.size();
    t.cols = 1;
    t.data = std::move(v);
    return t;
  }
  static Tensor scalar_of(R x) { return vec({x}); }
  static Tensor matrix(std::size_t r, std::size_t c, std::vector<R> v) {
    if (v.size() != r * c) raise(Errc::DimensionMismatch, "matrix data size");
    Tensor t;
    t.rows = r;
    t.cols = c;
    t.data = std::move(v);
    return t;
  }
  static Tensor identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t.data[i * n + i] = R(1);
    return t;
  }

  std::size_t size() const { return data.size(); }
  bool is_vector() const { return cols == 1; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  R scalar() const { return data[0]; }
  R& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  R at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  bool finite() const {
    for (R x : data) {
      if (!std::isfinite(static_cast<double>(x))) return false;
    }
    return true;
  }
  void fill(R x) { std::fill(data.begin(), data.end(), x); }
};

enum class Op : std::uint8_t {
  Leaf,
  External,  // value read from the embedding store; rewired to its producer on merge
  MatVec,
  Add,
  Scale,
  Concat,
  Dot,
  MeanVectors,
  Tanh,
  Sigmoid,
  Relu,
  BceWithLogits,
};

/// Reverse-mode tape. A tape is either standalone, or a fragment chained to a
/// base tape (the window-epoch tape holding the parameter leaves). Fragments
/// are built eagerly by worker threads, one per event, and absorbed into the
/// base in event order; External nodes are rewired to their producers at that
/// point, which is what lets one backward pass span every event of a window.
template <typename R>
class Tape {
 public:
  using Id = std::uint32_t;

  struct Node {
    Op op = Op::Leaf;
    std::vector<Id> inputs;
    Tensor<R> data;
    Tensor<R> grad;  // empty until backward touches it
    R scalar = R(0);  // Scale factor or BCE label
    bool requires_grad = false;
    ProducerRef ext;  // External only
  };

  Tape() = default;
  /// Fragment constructor. `grad_enabled=false` makes every node inert, which
  /// is how evaluation-only forward passes run on the same code path.
  explicit Tape(const Tape* base, bool grad_enabled = true)
      : base_(base), base_size_(base ? base->end_id() : 0), grad_enabled_(grad_enabled) {}

  std::size_t base_size() const { return base_size_; }
  /// First id past this tape's nodes (global addressing spans the base).
  Id end_id() const { return static_cast<Id>(base_size_ + nodes_.size()); }
  std::size_t node_count() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }

  Id leaf(Tensor<R> t, bool requires_grad) {
    Node n;
    n.op = Op::Leaf;
    n.data = std::move(t);
    n.requires_grad = requires_grad && grad_enabled_;
    return push(std::move(n));
  }

  Id constant(Tensor<R> t) { return leaf(std::move(t), false); }

  /// Records a value read from the embedding store. If the value was produced
  /// by an earlier event this epoch, the node is rewired to that producer when
  /// fragments merge; otherwise it is a plain constant.
  Id external(const std::vector<float>& value, ProducerRef ref) {
    Node n;
    n.op = Op::External;
    n.data = Tensor<R>::vec(std::vector<R>(value.begin(), value.end()));
    n.ext = ref;
    n.requires_grad = grad_enabled_ && !ref.is_constant();
    return push(std::move(n));
  }

  Id matvec(Id m, Id x) {
    const Tensor<R>& tm = value(m);
    const Tensor<R>& tx = value(x);
    if (!tx.is_vector() || tm.cols != tx.rows) {
      raise(Errc::DimensionMismatch, "matvec " + shape_str(tm) + " * " + shape_str(tx));
    }
    Tensor<R> out(tm.rows, 1);
    for (std::size_t i = 0; i < tm.rows; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < tm.cols; ++j) {
        acc += static_cast<double>(tm.data[i * tm.cols + j]) * static_cast<double>(tx.data[j]);
      }
      out.data[i] = static_cast<R>(acc);
    }
    return push_op(Op::MatVec, {m, x}, std::move(out));
  }

  Id add(Id a, Id b) {
    const Tensor<R>& ta = value(a);
    const Tensor<R>& tb = value(b);
    if (!ta.same_shape(tb)) {
      raise(Errc::DimensionMismatch, "add " + shape_str(ta) + " + " + shape_str(tb));
    }
    Tensor<R> out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += tb.data[i];
    return push_op(Op::Add, {a, b}, std::move(out));
  }

  Id scale(Id a, R c) {
    Tensor<R> out = value(a);
    for (auto& x : out.data) x *= c;
    Id id = push_op(Op::Scale, {a}, std::move(out));
    node_at(id).scalar = c;
    return id;
  }

  Id concat(Id a, Id b) {
    const Tensor<R>& ta = value(a);
    const Tensor<R>& tb = value(b);
    if (!ta.is_vector() || !tb.is_vector()) raise(Errc::DimensionMismatch, "concat of non-vectors");
    Tensor<R> out(ta.rows + tb.rows, 1);
    std::copy(ta.data.begin(), ta.data.end(), out.data.begin());
    std::copy(tb.data.begin(), tb.data.end(), out.data.begin() + ta.rows);
    return push_op(Op::Concat, {a, b}, std::move(out));
  }

  Id dot(Id a, Id b) {
    const Tensor<R>& ta = value(a);
    const Tensor<R>& tb = value(b);
    if (!ta.is_vector() || !tb.is_vector() || ta.rows != tb.rows) {
      raise(Errc::DimensionMismatch, "dot " + shape_str(ta) + " . " + shape_str(tb));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < ta.rows; ++i) {
      acc += static_cast<double>(ta.data[i]) * static_cast<double>(tb.data[i]);
    }
    return push_op(Op::Dot, {a, b}, Tensor<R>::scalar_of(static_cast<R>(acc)));
  }

  Id mean_vectors(const std::vector<Id>& ids) {
    if (ids.empty()) raise(Errc::InvalidArgument, "mean_vectors of nothing");
    const Tensor<R>& first = value(ids[0]);
    Tensor<R> out(first.rows, first.cols);
    std::vector<double> acc(first.size(), 0.0);
    for (Id id : ids) {
      const Tensor<R>& t = value(id);
      if (!t.same_shape(first)) raise(Errc::DimensionMismatch, "mean_vectors shape mismatch");
      for (std::size_t i = 0; i < t.size(); ++i) acc[i] += static_cast<double>(t.data[i]);
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.data[i] = static_cast<R>(acc[i] / static_cast<double>(ids.size()));
    }
    return push_op(Op::MeanVectors, ids, std::move(out));
  }

  Id tanh_(Id a) {
    Tensor<R> out = value(a);
    for (auto& x : out.data) x = std::tanh(x);
    return push_op(Op::Tanh, {a}, std::move(out));
  }

  Id sigmoid_(Id a) {
    Tensor<R> out = value(a);
    for (auto& x : out.data) x = sigmoid_scalar(x);
    return push_op(Op::Sigmoid, {a}, std::move(out));
  }

  Id relu_(Id a) {
    Tensor<R> out = value(a);
    for (auto& x : out.data) x = x > R(0) ? x : R(0);
    return push_op(Op::Relu, {a}, std::move(out));
  }

  /// Numerically stable -[y log s(x) + (1-y) log(1-s(x))].
  Id bce_with_logits(Id logit, R label) {
    const Tensor<R>& tl = value(logit);
    if (!tl.is_scalar()) raise(Errc::DimensionMismatch, "bce_with_logits wants a scalar logit");
    double x = static_cast<double>(tl.scalar());
    if (!std::isfinite(x)) raise(Errc::NonFinite, "bce logit");
    double y = static_cast<double>(label);
    double loss = std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    Id id = push_op(Op::BceWithLogits, {logit}, Tensor<R>::scalar_of(static_cast<R>(loss)));
    node_at(id).scalar = label;
    return id;
  }

  const Tensor<R>& value(Id id) const {
    if (id < base_size_) return base_->value(id);
    return nodes_[id - base_size_].data;
  }

  const Tensor<R>& grad(Id id) const {
    const Node& n = node_at(id);
    if (n.grad.size() == 0) {
      static const Tensor<R> empty;
      return empty;
    }
    return n.grad;
  }

  Tensor<R>* mutable_grad(Id id) { return &node_at(id).grad; }
  bool requires_grad(Id id) const { return node_at(id).requires_grad; }

  /// Moves a fragment's nodes onto this tape, remapping fragment-local input
  /// ids and resolving External references through `resolve`, which must map a
  /// non-constant ProducerRef to a global id already on this tape.
  template <typename Resolver>
  Id absorb(Tape&& frag, Resolver&& resolve) {
    Id offset = end_id();
    Id frag_base = static_cast<Id>(frag.base_size_);
    for (auto& n : frag.nodes_) {
      if (n.op == Op::External) {
        if (n.ext.is_constant()) {
          n.op = Op::Leaf;
          n.requires_grad = false;
        } else {
          Id target = resolve(n.ext);
          n.inputs = {target};
          n.requires_grad = node_at(target).requires_grad;
        }
      } else {
        for (Id& in : n.inputs) {
          if (in >= frag_base) in = in - frag_base + offset;
        }
      }
      nodes_.push_back(std::move(n));
    }
    frag.nodes_.clear();
    return offset;
  }

  /// Reverse sweep from a scalar root; every requires_grad value receives
  /// d(root)/d(value). Contributions accumulate in fixed tape order, so
  /// results are reproducible bit for bit for identical tapes.
  void backward(Id root) {
    if (base_ != nullptr) raise(Errc::InvalidArgument, "backward must run on the base tape");
    const Tensor<R>& rv = value(root);
    if (!rv.is_scalar()) raise(Errc::DimensionMismatch, "backward root must be scalar");
    Node& rn = node_at(root);
    if (!rn.requires_grad) return;
    grad_buf(root).data[0] = R(1);
    for (Id id = root + 1; id-- > 0;) {
      Node& n = node_at(id);
      if (!n.requires_grad || n.grad.size() == 0) continue;
      propagate(id, n);
    }
  }

  void zero_all_grads() {
    for (auto& n : nodes_) n.grad = Tensor<R>();
  }

 private:
  Node& node_at(Id id) {
    if (id < base_size_) raise(Errc::InvalidArgument, "node belongs to the base tape");
    return nodes_[id - base_size_];
  }
  const Node& node_at(Id id) const {
    if (id < base_size_) return base_->node_at(id);
    return nodes_[id - base_size_];
  }

  static std::string shape_str(const Tensor<R>& t) {
    return "[" + std::to_string(t.rows) + "x" + std::to_string(t.cols) + "]";
  }

  static R sigmoid_scalar(R x) {
    if (x >= R(0)) return R(1) / (R(1) + std::exp(-x));
    R e = std::exp(x);
    return e / (R(1) + e);
  }

  Id push(Node&& n) {
    nodes_.push_back(std::move(n));
    return static_cast<Id>(base_size_ + nodes_.size() - 1);
  }

  Id push_op(Op op, std::vector<Id> inputs, Tensor<R>&& out) {
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.data = std::move(out);
    if (grad_enabled_) {
      for (Id in : n.inputs) {
        if (node_requires_grad(in)) {
          n.requires_grad = true;
          break;
        }
      }
    }
    return push(std::move(n));
  }

  bool node_requires_grad(Id id) const {
    if (id < base_size_) return base_->node_requires_grad(id);
    return nodes_[id - base_size_].requires_grad;
  }

  Tensor<R>& grad_buf(Id id) {
    Node& n = node_at(id);
    if (n.grad.size() == 0) {
      const Tensor<R>& v = n.op == Op::External && !n.inputs.empty() ? value(n.inputs[0]) : n.data;
      n.grad = Tensor<R>(v.rows, v.cols);
    }
    return n.grad;
  }

  void accumulate(Id target, const Tensor<R>& contribution) {
    if (!node_requires_grad(target)) return;
    Tensor<R>& g = grad_buf(target);
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += contribution.data[i];
  }

  void propagate(Id id, Node& n) {
    const Tensor<R>& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::External:
        if (!n.inputs.empty()) accumulate(n.inputs[0], g);
        break;
      case Op::MatVec: {
        const Tensor<R>& m = value(n.inputs[0]);
        const Tensor<R>& x = value(n.inputs[1]);
        if (node_requires_grad(n.inputs[0])) {
          Tensor<R>& gm = grad_buf(n.inputs[0]);
          for (std::size_t i = 0; i < m.rows; ++i) {
            for (std::size_t j = 0; j < m.cols; ++j) {
              gm.data[i * m.cols + j] += g.data[i] * x.data[j];
            }
          }
        }
        if (node_requires_grad(n.inputs[1])) {
          Tensor<R>& gx = grad_buf(n.inputs[1]);
          for (std::size_t j = 0; j < m.cols; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m.rows; ++i) {
              acc += static_cast<double>(m.data[i * m.cols + j]) * static_cast<double>(g.data[i]);
            }
            gx.data[j] += static_cast<R>(acc);
          }
        }
        break;
      }
      case Op::Add:
        accumulate(n.inputs[0], g);
        accumulate(n.inputs[1], g);
        break;
      case Op::Scale: {
        if (node_requires_grad(n.inputs[0])) {
          Tensor<R>& gx = grad_buf(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += n.scalar * g.data[i];
        }
        break;
      }
      case Op::Concat: {
        const Tensor<R>& a = value(n.inputs[0]);
        if (node_requires_grad(n.inputs[0])) {
          Tensor<R>& ga = grad_buf(n.inputs[0]);
          for (std::size_t i = 0; i < a.rows; ++i) ga.data[i] += g.data[i];
        }
        if (node_requires_grad(n.inputs[1])) {
          Tensor<R>& gb = grad_buf(n.inputs[1]);
          for (std::size_t i = a.rows; i < g.rows; ++i) gb.data[i - a.rows] += g.data[i];
        }
        break;
      }
      case Op::Dot: {
        const Tensor<R>& a = value(n.inputs[0]);
        const Tensor<R>& b = value(n.inputs[1]);
        R gs = g.scalar();
        if (node_requires_grad(n.inputs[0])) {
          Tensor<R>& ga = grad_buf(n.inputs[0]);
          for (std::size_t i = 0; i < a.rows; ++i) ga.data[i] += gs * b.data[i];
        }
        if (node_requires_grad(n.inputs[1])) {
          Tensor<R>& gb = grad_buf(n.inputs[1]);
          for (std::size_t i = 0; i < b.rows; ++i) gb.data[i] += gs * a.data[i];
        }
        break;
      }
      case Op::MeanVectors: {
        R inv = R(1) / static_cast<R>(n.inputs.size());
        for (Id in : n.inputs) {
          if (!node_requires_grad(in)) continue;
          Tensor<R>& gi = grad_buf(in);
          for (std::size_t i = 0; i < g.size(); ++i) gi.data[i] += inv * g.data[i];
        }
        break;
      }
      case Op::Tanh: {
        if (node_requires_grad(n.inputs[0])) {
          Tensor<R>& gx = grad_buf(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) {
            R y = n.data.data[i];
            gx.data[i] += g.data[i] * (R(1) - y * y);
          }
        }
        break;
      }
      case Op::Sigmoid: {
        if (node_requires_grad(n.inputs[0])) {
          Tensor<R>& gx = grad_buf(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) {
            R y = n.data.data[i];
            gx.data[i] += g.data[i] * y * (R(1) - y);
          }
        }
        break;
      }
      case Op::Relu: {
        if (node_requires_grad(n.inputs[0])) {
          const Tensor<R>& x = value(n.inputs[0]);
          Tensor<R>& gx = grad_buf(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) {
            if (x.data[i] > R(0)) gx.data[i] += g.data[i];
          }
        }
        break;
      }
      case Op::BceWithLogits: {
        if (node_requires_grad(n.inputs[0])) {
          const Tensor<R>& x = value(n.inputs[0]);
          Tensor<R>& gx = grad_buf(n.inputs[0]);
          R s = sigmoid_scalar(x.scalar());
          gx.data[0] += g.scalar() * (s - n.scalar);
        }
        break;
      }
    }
  }

  const Tape* base_ = nullptr;
  std::size_t base_size_ = 0;
  bool grad_enabled_ = true;
  std::vector<Node> nodes_;
};

enum class OptMethod { SGD, Adam };

inline const char* opt_name(OptMethod m) { return m == OptMethod::SGD ? "sgd" : "adam"; }

/// SGD or bias-corrected Adam over a fixed list of parameter tensors. Moment
/// state is keyed by position, so the same parameter list must be passed every
/// step.
template <typename R>
class Optimizer {
 public:
  Optimizer(OptMethod method, R lr, R beta1 = R(0.9), R beta2 = R(0.999), R eps = R(1e-8))
      : method_(method), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (!(lr > R(0))) raise(Errc::InvalidArgument, "learning rate must be > 0");
  }

  /// Applies one update; grads are zeroed afterward. A null/empty grad means
  /// the parameter did not participate this step and is treated as zero.
  void step(const std::vector<Tensor<R>*>& params, const std::vector<Tensor<R>*>& grads) {
    if (params.size() != grads.size()) raise(Errc::InvalidArgument, "params/grads size mismatch");
    if (method_ == OptMethod::Adam && m_.empty()) {
      for (auto* p : params) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
      }
    }
    ++t_;
    for (std::size_t k = 0; k < params.size(); ++k) {
      Tensor<R>& p = *params[k];
      bool has_grad = grads[k] != nullptr && grads[k]->size() == p.size();
      for (std::size_t i = 0; i < p.size(); ++i) {
        double g = has_grad ? static_cast<double>(grads[k]->data[i]) : 0.0;
        if (method_ == OptMethod::SGD) {
          p.data[i] -= static_cast<R>(static_cast<double>(lr_) * g);
        } else {
          double& m = m_[k][i];
          double& v = v_[k][i];
          m = beta1_ * m + (1.0 - beta1_) * g;
          v = beta2_ * v + (1.0 - beta2_) * g * g;
          double mhat = m / (1.0 - std::pow(static_cast<double>(beta1_), static_cast<double>(t_)));
          double vhat = v / (1.0 - std::pow(static_cast<double>(beta2_), static_cast<double>(t_)));
          p.data[i] -= static_cast<R>(static_cast<double>(lr_) * mhat /
                                      (std::sqrt(vhat) + static_cast<double>(eps_)));
        }
      }
      if (has_grad) grads[k]->fill(R(0));
    }
  }

 private:
  OptMethod method_;
  R lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace dgstream
