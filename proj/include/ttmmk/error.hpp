#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ttmmk {

/// Failure categories surfaced by the library. The CLI prints the name of
/// the code on its diagnostic line, so the names are part of the interface.
enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  ModeOutOfRange,
  NonFinite,
  NotSymmetric,
  ZeroColumn,
  ShapeChain,
  UnsupportedOrder,
  RankMismatch,
  MissingClass,
  BadMagic,
  BadVersion,
  Truncated,
  PayloadMismatch,
  LimitExceeded,
  Io,
  Parse,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::ModeOutOfRange: return "mode_out_of_range";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::NotSymmetric: return "not_symmetric";
    case ErrorCode::ZeroColumn: return "zero_column";
    case ErrorCode::ShapeChain: return "shape_chain";
    case ErrorCode::UnsupportedOrder: return "unsupported_order";
    case ErrorCode::RankMismatch: return "rank_mismatch";
    case ErrorCode::MissingClass: return "missing_class";
    case ErrorCode::BadMagic: return "bad_magic";
    case ErrorCode::BadVersion: return "bad_version";
    case ErrorCode::Truncated: return "truncated";
    case ErrorCode::PayloadMismatch: return "payload_mismatch";
    case ErrorCode::LimitExceeded: return "limit_exceeded";
    case ErrorCode::Io: return "io";
    case ErrorCode::Parse: return "parse";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace ttmmk
