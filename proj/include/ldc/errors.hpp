#pragma once

#include <stdexcept>
#include <string>

namespace ldc {

enum class Err {
  EmptyInput,
  NonFinite,
  DimensionMismatch,
  NotPSD,
  StaleCache,
  BadSpec,
  UnknownClass,
  ClassMismatch,
  EmptyClass,
  ZeroVector,
  LabelOutOfRange,
  BadSplit,
  ClassCollision,
  ShotCountMismatch,
  UnseenLabel,
  PlacementFailure,
  InsufficientSamples,
  BadMagic,
  TruncatedFile,
  RaggedCsv,
  DegenerateSpectrum,
  EmptyList,
  ConfigError,
  IoError,
};

const char* err_name(Err e);

class LdcError : public std::runtime_error {
 public:
  LdcError(Err code, const std::string& what)
      : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& what) { throw LdcError(code, what); }

}  // namespace ldc
