#pragma once

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <vector>

#include "dgstream/event.hpp"

namespace dgstream {

enum class WindowPolicy { Fixed, Adaptive };

/// A contiguous, chronological slice [begin, end) of the event stream.
struct Window {
  std::size_t begin = 0;
  std::size_t end = 0;
  WindowPolicy policy = WindowPolicy::Fixed;
  std::vector<NodeId> node_set;  // adaptive only: accumulated event nodes (diagnostic)

  std::size_t size() const { return end - begin; }
  bool empty() const { return begin >= end; }
};

/// Fixed sliding window: events [pos, min(pos+s, m)), next start at pos + d.
/// An empty window signals the end of the stream.
inline std::pair<Window, std::size_t> next_fixed_window(const GraphStream& stream, std::size_t pos,
                                                        std::size_t s, std::size_t d) {
  if (s < 1) raise(Errc::InvalidArgument, "window size must be >= 1");
  if (d < 1 || d > s) raise(Errc::InvalidArgument, "stride must satisfy 1 <= d <= s");
  Window w;
  w.policy = WindowPolicy::Fixed;
  w.begin = std::min(pos, stream.size());
  w.end = std::min(pos + s, stream.size());
  return {w, pos + d};
}

/// Adaptive window: the first L events are accepted unconditionally; after
/// that an event is accepted only if it shares a node with the window's
/// accumulated node set. Growth stops at the first rejected event (which is
/// not included) or at H events. Returns the accumulated node set alongside.
inline Window next_adaptive_window(const GraphStream& stream, std::size_t pos, std::size_t L,
                                   std::size_t H) {
  if (L < 1 || L > H) raise(Errc::InvalidArgument, "need 1 <= L <= H");
  Window w;
  w.policy = WindowPolicy::Adaptive;
  w.begin = std::min(pos, stream.size());
  w.end = w.begin;
  std::unordered_set<NodeId> nodes;
  while (w.end < stream.size() && w.size() < H) {
    const Event& e = stream.events[w.end];
    bool accept;
    if (w.size() < L) {
      accept = true;
    } else {
      accept = nodes.count(e.u) != 0 || nodes.count(e.v) != 0;
    }
    if (!accept) break;
    nodes.insert(e.u);
    nodes.insert(e.v);
    ++w.end;
  }
  w.node_set.assign(nodes.begin(), nodes.end());
  std::sort(w.node_set.begin(), w.node_set.end());
  return w;
}

/// Stride as a fraction of the window just trained, at least 1.
inline std::size_t adaptive_stride(std::size_t window_size, double frac) {
  if (!(frac > 0.0) || frac > 1.0) raise(Errc::InvalidArgument, "stride fraction must be in (0,1]");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(frac * static_cast<double>(window_size))));
}

}  // namespace dgstream
