#include "motionseg/error.hpp"

namespace motionseg {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnsupportedDepth: return "UnsupportedDepth";
    case ErrorCode::TooManyInstances: return "TooManyInstances";
    case ErrorCode::DegenerateImage: return "DegenerateImage";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::MissingPair: return "MissingPair";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

}  // namespace motionseg
