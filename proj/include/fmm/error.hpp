#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fmm {

enum class ErrorKind {
  InvalidSpec,
  FlavorMismatch,
  OutOfInterval,
  ZeroState,
  EigenvalueHit,
  SingularReduction,
  InsufficientSamples,
  DegenerateFit,
  SchemaViolation,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::FlavorMismatch: return "FlavorMismatch";
    case ErrorKind::OutOfInterval: return "OutOfInterval";
    case ErrorKind::ZeroState: return "ZeroState";
    case ErrorKind::EigenvalueHit: return "EigenvalueHit";
    case ErrorKind::SingularReduction: return "SingularReduction";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::DegenerateFit: return "DegenerateFit";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace fmm
