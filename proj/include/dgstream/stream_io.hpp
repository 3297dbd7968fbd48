#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

#include "dgstream/event.hpp"

namespace dgstream {

/// Reads a `u,v,t,kind[,weight]` event file. Lines starting with `#` are
/// comments; a `#nodes=N` header pins the node count, otherwise it is
/// inferred as max id + 1. The stream is validated on load; violations are
/// fatal unless `lenient`.
inline GraphStream read_stream(const std::string& path, bool lenient = false,
                               std::string* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) raise(Errc::IoFailure, "cannot open " + path);
  GraphStream stream;
  bool have_header = false;
  std::string line;
  std::size_t lineno = 0;
  NodeId max_id = 0;
  bool any_event = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto sv = detail::trim(std::string_view(line));
    if (sv.empty()) continue;
    if (sv.front() == '#') {
      auto body = detail::trim(sv.substr(1));
      if (body.rfind("nodes=", 0) == 0) {
        NodeId n = 0;
        if (!detail::parse_u32(body.substr(6), n)) {
          raise(Errc::MalformedLine, path + ":" + std::to_string(lineno) + ": bad #nodes header");
        }
        stream.initial.node_count = n;
        have_header = true;
      }
      continue;
    }
    Event e;
    try {
      e = parse_event_line(sv);
    } catch (const Error& err) {
      raise(err.code(), path + ":" + std::to_string(lineno) + ": " + err.what());
    }
    e.seq = stream.events.size();
    max_id = std::max(max_id, std::max(e.u, e.v));
    any_event = true;
    stream.events.push_back(e);
  }
  if (!have_header) {
    std::size_t inferred = any_event ? static_cast<std::size_t>(max_id) + 1 : 0;
    // add_node events create their own ids; they must not inflate the initial count.
    for (const Event& e : stream.events) {
      if (e.kind == EventKind::AddNode) {
        inferred = std::min<std::size_t>(inferred, e.u);
      }
    }
    stream.initial.node_count = inferred;
  }
  ValidationReport report = validate_stream(stream);
  if (!report.ok()) {
    std::ostringstream msg;
    msg << path << ": " << report.issues.size() << " validation issue(s); first at seq "
        << report.issues.front().seq << ": " << report.issues.front().message;
    if (!lenient) raise(Errc::ValidationFailed, msg.str());
    if (warnings) *warnings = msg.str();
  }
  return stream;
}

inline void write_stream(const GraphStream& stream, std::ostream& out) {
  out << "#nodes=" << stream.initial.node_count << "\n";
  for (const Event& e : stream.events) out << format_event_line(e) << "\n";
}

inline void write_stream(const GraphStream& stream, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(Errc::IoFailure, "cannot open " + path + " for writing");
  write_stream(stream, out);
}

}  // namespace dgstream
