#pragma once

#include <stdexcept>
#include <string>

namespace dgstream {

enum class Errc {
  MalformedLine,
  UnknownKind,
  NegativeTimestamp,
  UnknownNode,
  SelfLoop,
  EdgeNotFound,
  StaleEvent,
  DimensionMismatch,
  NonFinite,
  VersionNotFound,
  StaleToken,
  InvalidArgument,
  IoFailure,
  ValidationFailed,
  DegenerateInput,
  PipelineStalled,
  ExecutorFailed,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::UnknownKind: return "UnknownKind";
    case Errc::NegativeTimestamp: return "NegativeTimestamp";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::SelfLoop: return "SelfLoop";
    case Errc::EdgeNotFound: return "EdgeNotFound";
    case Errc::StaleEvent: return "StaleEvent";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonFinite: return "NonFinite";
    case Errc::VersionNotFound: return "VersionNotFound";
    case Errc::StaleToken: return "StaleToken";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IoFailure: return "IoFailure";
    case Errc::ValidationFailed: return "ValidationFailed";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::PipelineStalled: return "PipelineStalled";
    case Errc::ExecutorFailed: return "ExecutorFailed";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace dgstream
