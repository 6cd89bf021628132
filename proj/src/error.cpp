#include "clusterguard/error.hpp"

namespace clusterguard {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::SingularDesign: return "SingularDesign";
    case ErrorKind::Degenerate: return "Degenerate";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::CalibrationMissing: return "CalibrationMissing";
    case ErrorKind::CalibrationFailure: return "CalibrationFailure";
    case ErrorKind::FileError: return "FileError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace clusterguard
