// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTREFINE_REMOTE_SEGMENTER_H_
#define ATTREFINE_REMOTE_SEGMENTER_H_

#include <chrono>
#include <condition_variable>
#include <mutex>
#include <string>

#include "attrefine/segment.h"

namespace attrefine {

struct RemoteSegmenterOptions {
  // e.g. "http://127.0.0.1:8080"
  std::string endpoint;
  int retries = 3;
  std::chrono::milliseconds initial_backoff{100};
  std::chrono::milliseconds timeout{30000};
  // Maximum concurrent in-flight requests.
  int pool_size = 8;
  // Scale factor for clipping returned masks to the box prior.
  double box_dilation = 1.5;
};

// Client for an external promptable segmenter speaking
//   POST /v1/segment
//   {"image_png_b64": "...", "point": {"x":..,"y":..,"label":1},
//    "box": [x1,y1,x2,y2]}
// -> {"width":W,"height":H,"runs":[[start,len],...]}
// Box and point are in crop coordinates; the box is half-open.
// HTTP 503 and transport failures are retried with exponential backoff and
// surface as kBackendUnavailable once retries are exhausted.
class RemoteSegmenter : public SegmenterBackend {
 public:
  explicit RemoteSegmenter(RemoteSegmenterOptions options);

  std::string name() const override { return "remote"; }
  bool deterministic() const override { return false; }

  // JSON request body for `request`.
  static std::string EncodeRequest(const SegmentRequest& request);

 protected:
  BinaryMask Run(const SegmentRequest& request) const override;

 private:
  class Slot;

  RemoteSegmenterOptions options_;
  std::string host_;
  int port_ = 0;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  mutable int in_flight_ = 0;
};

std::string Base64Encode(std::string_view bytes);
// Throws kProtocolError on malformed input.
std::string Base64Decode(std::string_view text);

}  // namespace attrefine

#endif  // ATTREFINE_REMOTE_SEGMENTER_H_
