#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace latentlin {

enum class ErrorKind {
  DegenerateColumn,
  DegenerateRow,
  InvalidModel,
  GenerationFailed,
  NotStochastic,
  InsufficientSamples,
  NotAvailable,
  NotPSD,
  NotPD,
  Infeasible,
  NotConverged,
  TooLarge,
  RecoveryFailed,
  IllConditionedPartition,
  NoValidPartition,
  RankDeficient,
  DegenerateSpectrum,
  NotTriangulable,
  RankConditionUnmet,
  ShapeError,
  ParseError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateColumn: return "DegenerateColumn";
    case ErrorKind::DegenerateRow: return "DegenerateRow";
    case ErrorKind::InvalidModel: return "InvalidModel";
    case ErrorKind::GenerationFailed: return "GenerationFailed";
    case ErrorKind::NotStochastic: return "NotStochastic";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::NotAvailable: return "NotAvailable";
    case ErrorKind::NotPSD: return "NotPSD";
    case ErrorKind::NotPD: return "NotPD";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::RecoveryFailed: return "RecoveryFailed";
    case ErrorKind::IllConditionedPartition: return "IllConditionedPartition";
    case ErrorKind::NoValidPartition: return "NoValidPartition";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorKind::NotTriangulable: return "NotTriangulable";
    case ErrorKind::RankConditionUnmet: return "RankConditionUnmet";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Library exception. `stage` is filled in by the pipelines so callers can
/// tell which step of a multi-stage run failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::string stage = {})
      : std::runtime_error(format(kind, what, stage)),
        kind_(kind),
        detail_(what),
        stage_(std::move(stage)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

  /// Copy of this error re-tagged with a pipeline stage name.
  Error with_stage(std::string stage) const { return Error(kind_, detail_, std::move(stage)); }

 private:
  static std::string format(ErrorKind kind, const std::string& what, const std::string& stage) {
    std::string msg(to_string(kind));
    if (!stage.empty()) msg += " [" + stage + "]";
    if (!what.empty()) msg += ": " + what;
    return msg;
  }

  ErrorKind kind_;
  std::string detail_;
  std::string stage_;
};

/// Thrown when an iterative method runs out of budget; carries its best iterate.
template <typename Iterate>
class NotConvergedError : public Error {
 public:
  NotConvergedError(const std::string& what, Iterate best)
      : Error(ErrorKind::NotConverged, what), best_(std::move(best)) {}

  const Iterate& best() const noexcept { return best_; }

 private:
  Iterate best_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace latentlin
