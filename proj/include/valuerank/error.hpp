#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace valuerank {

/// Error categories surfaced by the library. The names are part of the wire
/// format (problem-details `code`) and of the CLI's diagnostics.
enum class Errc {
  InvalidArgument,
  MalformedRecord,
  EmptyInventory,
  DuplicateId,
  WindowExhausted,
  InvalidTaxonomy,
  ParseError,
  MissingValue,
  OutOfRange,
  BackendError,
  ClassificationFailed,
  MissingLabel,
  InvalidResponse,
  NoExpressibleValue,
  QuantizationError,
  TooManyChanged,
  NothingChanged,
  EmptyFeed,
  DomainMismatch,
  InsufficientAnnotators,
  NoTrials,
  NoData,
  UndefinedCorrelation,
  DomainError,
  UndefinedAlpha,
  DegenerateWeights,
  AlreadyAnswered,
  UnknownTrial,
  UnknownSession,
  UnknownInventory,
  InvalidPhase,
  JobNotReady,
  Io,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::EmptyInventory: return "EmptyInventory";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::WindowExhausted: return "WindowExhausted";
    case Errc::InvalidTaxonomy: return "InvalidTaxonomy";
    case Errc::ParseError: return "ParseError";
    case Errc::MissingValue: return "MissingValue";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::BackendError: return "BackendError";
    case Errc::ClassificationFailed: return "ClassificationFailed";
    case Errc::MissingLabel: return "MissingLabel";
    case Errc::InvalidResponse: return "InvalidResponse";
    case Errc::NoExpressibleValue: return "NoExpressibleValue";
    case Errc::QuantizationError: return "QuantizationError";
    case Errc::TooManyChanged: return "TooManyChanged";
    case Errc::NothingChanged: return "NothingChanged";
    case Errc::EmptyFeed: return "EmptyFeed";
    case Errc::DomainMismatch: return "DomainMismatch";
    case Errc::InsufficientAnnotators: return "InsufficientAnnotators";
    case Errc::NoTrials: return "NoTrials";
    case Errc::NoData: return "NoData";
    case Errc::UndefinedCorrelation: return "UndefinedCorrelation";
    case Errc::DomainError: return "DomainError";
    case Errc::UndefinedAlpha: return "UndefinedAlpha";
    case Errc::DegenerateWeights: return "DegenerateWeights";
    case Errc::AlreadyAnswered: return "AlreadyAnswered";
    case Errc::UnknownTrial: return "UnknownTrial";
    case Errc::UnknownSession: return "UnknownSession";
    case Errc::UnknownInventory: return "UnknownInventory";
    case Errc::InvalidPhase: return "InvalidPhase";
    case Errc::JobNotReady: return "JobNotReady";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// Rating failures that a fresh backend call may fix.
constexpr bool is_retryable(Errc code) noexcept {
  return code == Errc::ParseError || code == Errc::MissingValue || code == Errc::OutOfRange ||
         code == Errc::BackendError;
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message, std::string detail = {})
      : std::runtime_error(std::move(message)), code_(code), detail_(std::move(detail)) {}

  Errc code() const noexcept { return code_; }

  /// Machine-oriented payload: an offending id, title, limit or line number.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace valuerank
