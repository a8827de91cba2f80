#include "ldc/errors.hpp"

namespace ldc {

const char* err_name(Err code) {
  switch (code) {
    case Err::EmptyInput: return "EmptyInput";
    case Err::NonFinite: return "NonFinite";
    case Err::DimensionMismatch: return "DimensionMismatch";
    case Err::NotPSD: return "NotPSD";
    case Err::StaleCache: return "StaleCache";
    case Err::BadSpec: return "BadSpec";
    case Err::UnknownClass: return "UnknownClass";
    case Err::ClassMismatch: return "ClassMismatch";
    case Err::EmptyClass: return "EmptyClass";
    case Err::ZeroVector: return "ZeroVector";
    case Err::LabelOutOfRange: return "LabelOutOfRange";
    case Err::BadSplit: return "BadSplit";
    case Err::ClassCollision: return "ClassCollision";
    case Err::ShotCountMismatch: return "ShotCountMismatch";
    case Err::UnseenLabel: return "UnseenLabel";
    case Err::PlacementFailure: return "PlacementFailure";
    case Err::InsufficientSamples: return "InsufficientSamples";
    case Err::BadMagic: return "BadMagic";
    case Err::TruncatedFile: return "TruncatedFile";
    case Err::RaggedCsv: return "RaggedCsv";
    case Err::DegenerateSpectrum: return "DegenerateSpectrum";
    case Err::EmptyList: return "EmptyList";
    case Err::ConfigError: return "ConfigError";
    case Err::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace ldc
