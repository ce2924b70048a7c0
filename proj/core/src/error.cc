// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#include "attrefine/error.h"

namespace attrefine {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kBoxOutOfBounds: return "BoxOutOfBounds";
    case ErrorCode::kBoxSmallerThanStride: return "BoxSmallerThanStride";
    case ErrorCode::kEmptyFootprint: return "EmptyFootprint";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kPromptOutsideCrop: return "PromptOutsideCrop";
    case ErrorCode::kSeedOutsideConstraint: return "SeedOutsideConstraint";
    case ErrorCode::kProtocolError: return "ProtocolError";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kWindowMaskMismatch: return "WindowMaskMismatch";
    case ErrorCode::kEmptyBackground: return "EmptyBackground";
    case ErrorCode::kInsufficientPoints: return "InsufficientPoints";
    case ErrorCode::kPlacementFailure: return "PlacementFailure";
    case ErrorCode::kMalformedAnnotation: return "MalformedAnnotation";
    case ErrorCode::kMissingImage: return "MissingImage";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + detail),
      code_(code),
      detail_(detail) {}

void Fail(ErrorCode code, const std::string& detail) {
  throw Error(code, detail);
}

}  // namespace attrefine
