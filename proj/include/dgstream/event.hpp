#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "dgstream/errors.hpp"

namespace dgstream {

using NodeId = std::uint32_t;

enum class EventKind : std::uint8_t {
  AddEdge,
  DeleteEdge,
  AddNode,
  Interact,
  UpdateFeature,
};

inline const char* kind_name(EventKind k) {
  switch (k) {
    case EventKind::AddEdge: return "add_edge";
    case EventKind::DeleteEdge: return "del_edge";
    case EventKind::AddNode: return "add_node";
    case EventKind::Interact: return "interact";
    case EventKind::UpdateFeature: return "feat";
  }
  return "?";
}

/// One timestamped graph update. Single-node events (AddNode) carry u == v.
struct Event {
  std::size_t seq = 0;  // 0-based position in the stream
  NodeId u = 0;
  NodeId v = 0;
  double t = 0.0;   // seconds, non-decreasing along the stream
  EventKind kind = EventKind::Interact;
  double weight = 1.0;

  bool structural() const {
    return kind == EventKind::AddEdge || kind == EventKind::DeleteEdge ||
           kind == EventKind::AddNode;
  }
  bool single_node() const { return u == v; }
};

/// Initial graph description: `node_count` isolated nodes plus optional seed edges.
struct InitialGraph {
  std::size_t node_count = 0;
  struct Edge {
    NodeId u, v;
    double weight;
    double t;
  };
  std::vector<Edge> edges;
};

/// A finite graph stream: initial state plus chronologically ordered events.
struct GraphStream {
  InitialGraph initial;
  std::vector<Event> events;

  std::size_t size() const { return events.size(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline bool parse_u32(std::string_view s, NodeId& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

inline bool parse_f64(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  // from_chars for double is unreliable pre-gcc11 for all formats; strtod is fine here.
  std::string tmp(s);
  char* end = nullptr;
  out = std::strtod(tmp.c_str(), &end);
  return end == tmp.c_str() + tmp.size();
}

}  // namespace detail

inline bool parse_kind(std::string_view s, EventKind& out) {
  s = detail::trim(s);
  if (s == "add_edge") out = EventKind::AddEdge;
  else if (s == "del_edge") out = EventKind::DeleteEdge;
  else if (s == "add_node") out = EventKind::AddNode;
  else if (s == "interact") out = EventKind::Interact;
  else if (s == "feat") out = EventKind::UpdateFeature;
  else return false;
  return true;
}

/// Parses one `u,v,t,kind[,weight]` line. The seq field is left at 0; callers
/// assign stream positions.
inline Event parse_event_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t begin = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      fields.push_back(line.substr(begin, i - begin));
      begin = i + 1;
    }
  }
  if (fields.size() != 4 && fields.size() != 5) {
    raise(Errc::MalformedLine, "expected u,v,t,kind[,weight], got: " + std::string(line));
  }
  Event e;
  if (!detail::parse_u32(fields[0], e.u)) {
    raise(Errc::MalformedLine, "bad node id: " + std::string(fields[0]));
  }
  if (!detail::parse_u32(fields[1], e.v)) {
    raise(Errc::MalformedLine, "bad node id: " + std::string(fields[1]));
  }
  if (!detail::parse_f64(fields[2], e.t) || std::isnan(e.t)) {
    raise(Errc::MalformedLine, "bad timestamp: " + std::string(fields[2]));
  }
  if (e.t < 0.0) {
    raise(Errc::NegativeTimestamp, "timestamp " + std::string(fields[2]) + " < 0");
  }
  if (!parse_kind(fields[3], e.kind)) {
    raise(Errc::UnknownKind, std::string(fields[3]));
  }
  if (fields.size() == 5) {
    if (!detail::parse_f64(fields[4], e.weight) || !std::isfinite(e.weight)) {
      raise(Errc::MalformedLine, "bad weight: " + std::string(fields[4]));
    }
  }
  if (e.kind == EventKind::AddNode && e.u != e.v) {
    raise(Errc::MalformedLine, "add_node requires u == v");
  }
  return e;
}

/// Timestamps are written with 6 decimal places; weight round-trips exactly.
inline std::string format_event_line(const Event& e) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%u,%u,%.6f,%s,%.17g", e.u, e.v, e.t, kind_name(e.kind),
                e.weight);
  return buf;
}

struct ValidationIssue {
  std::size_t seq;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
};

/// Replays the stream against a shadow topology and reports, in stream order,
/// timestamp regressions, references to never-added nodes, and deletions of
/// absent edges.
inline ValidationReport validate_stream(const GraphStream& stream) {
  ValidationReport report;
  std::size_t node_count = stream.initial.node_count;
  std::unordered_set<std::uint64_t> edges;
  auto key = [](NodeId u, NodeId v) {
    return (static_cast<std::uint64_t>(u) << 32) | v;
  };
  for (const auto& e : stream.initial.edges) edges.insert(key(e.u, e.v));

  double prev_t = 0.0;
  bool first = true;
  for (const Event& e : stream.events) {
    if (!first && e.t < prev_t) {
      report.issues.push_back({e.seq, "timestamp decreases"});
    }
    first = false;
    prev_t = std::max(prev_t, e.t);

    if (e.kind == EventKind::AddNode) {
      if (e.u != node_count) {
        report.issues.push_back({e.seq, "add_node id " + std::to_string(e.u) +
                                            " != node count " + std::to_string(node_count)});
      } else {
        ++node_count;
      }
      continue;
    }
    bool nodes_ok = true;
    for (NodeId n : {e.u, e.v}) {
      if (n >= node_count) {
        report.issues.push_back({e.seq, "node " + std::to_string(n) + " never added"});
        nodes_ok = false;
      }
    }
    if (!nodes_ok) continue;
    switch (e.kind) {
      case EventKind::AddEdge:
        edges.insert(key(e.u, e.v));
        break;
      case EventKind::DeleteEdge:
        if (edges.erase(key(e.u, e.v)) == 0) {
          report.issues.push_back({e.seq, "delete of absent edge"});
        }
        break;
      default:
        break;
    }
  }
  return report;
}

}  // namespace dgstream
