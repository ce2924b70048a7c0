// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTREFINE_ERROR_H_
#define ATTREFINE_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace attrefine {

enum class ErrorCode {
  kInvalidArgument,
  kIoError,
  kEmptyMask,
  kMalformedHeader,
  kShapeMismatch,
  kNonFiniteValue,
  kBoxOutOfBounds,
  kBoxSmallerThanStride,
  kEmptyFootprint,
  kBackendUnavailable,
  kPromptOutsideCrop,
  kSeedOutsideConstraint,
  kProtocolError,
  kDimensionMismatch,
  kWindowMaskMismatch,
  kEmptyBackground,
  kInsufficientPoints,
  kPlacementFailure,
  kMalformedAnnotation,
  kMissingImage,
  kConfigInvalid,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures surface as this exception; code() identifies the
// failure class, what() carries "<CodeName>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] void Fail(ErrorCode code, const std::string& detail);

}  // namespace attrefine

#endif  // ATTREFINE_ERROR_H_
