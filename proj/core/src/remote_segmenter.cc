// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#include "attrefine/remote_segmenter.h"

#include <sodium.h>

#include <regex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "attrefine/error.h"
#include "attrefine/io.h"

namespace attrefine {

// RAII in-flight slot bounded by pool_size.
class RemoteSegmenter::Slot {
 public:
  explicit Slot(const RemoteSegmenter& owner) : owner_(owner) {
    std::unique_lock lock(owner_.mu_);
    owner_.cv_.wait(lock, [&] { return owner_.in_flight_ < owner_.options_.pool_size; });
    ++owner_.in_flight_;
  }
  ~Slot() {
    {
      std::lock_guard lock(owner_.mu_);
      --owner_.in_flight_;
    }
    owner_.cv_.notify_one();
  }

 private:
  const RemoteSegmenter& owner_;
};

std::string Base64Encode(std::string_view bytes) {
  if (sodium_init() < 0) Fail(ErrorCode::kIoError, "libsodium init failed");
  std::string out(sodium_base64_encoded_len(bytes.size(),
                                            sodium_base64_VARIANT_ORIGINAL),
                  '\0');
  sodium_bin2base64(out.data(), out.size(),
                    reinterpret_cast<const unsigned char*>(bytes.data()),
                    bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  out.resize(out.size() - 1);  // drop the terminating NUL
  return out;
}

std::string Base64Decode(std::string_view text) {
  if (sodium_init() < 0) Fail(ErrorCode::kIoError, "libsodium init failed");
  std::string out(text.size() / 4 * 3 + 3, '\0');
  std::size_t len = 0;
  if (sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()),
                        out.size(), text.data(), text.size(), nullptr, &len,
                        nullptr, sodium_base64_VARIANT_ORIGINAL) != 0) {
    Fail(ErrorCode::kProtocolError, "malformed base64 payload");
  }
  out.resize(len);
  return out;
}

RemoteSegmenter::RemoteSegmenter(RemoteSegmenterOptions options)
    : options_(std::move(options)) {
  static const std::regex kEndpoint(R"(^(?:http://)?([^:/]+)(?::(\d+))?/?$)");
  std::smatch m;
  if (!std::regex_match(options_.endpoint, m, kEndpoint)) {
    Fail(ErrorCode::kConfigInvalid,
         "endpoint must look like http://host:port, got '" +
             options_.endpoint + "'");
  }
  host_ = m[1].str();
  port_ = m[2].matched ? std::stoi(m[2].str()) : 80;
  if (options_.retries < 0 || options_.pool_size < 1) {
    Fail(ErrorCode::kConfigInvalid, "retries >= 0 and pool_size >= 1 required");
  }
}

std::string RemoteSegmenter::EncodeRequest(const SegmentRequest& request) {
  const BBox& b = request.box_prior;
  nlohmann::json body = {
      {"image_png_b64", Base64Encode(EncodePng(request.crop))},
      {"point", {{"x", request.point.x}, {"y", request.point.y}, {"label", 1}}},
      {"box", {b.x_min, b.y_min, b.x_max, b.y_max}},
  };
  return body.dump();
}

BinaryMask RemoteSegmenter::Run(const SegmentRequest& request) const {
  const std::string body = EncodeRequest(request);
  Slot slot(*this);

  httplib::Client client(host_, port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
      options_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());

  std::string last_failure;
  auto backoff = options_.initial_backoff;
  const int attempts = options_.retries + 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto res = client.Post("/v1/segment", body, "application/json");
    if (!res) {
      last_failure = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 503) {
      last_failure = "HTTP 503";
      continue;
    }
    if (res->status != 200) {
      Fail(ErrorCode::kProtocolError,
           "unexpected HTTP status " + std::to_string(res->status));
    }
    BinaryMask mask;
    try {
      mask = MaskFromJson(res->body);
    } catch (const Error& e) {
      Fail(ErrorCode::kProtocolError, "bad response body: " + e.detail());
    }
    if (mask.width() != request.crop.width() ||
        mask.height() != request.crop.height()) {
      Fail(ErrorCode::kDimensionMismatch,
           "response mask " + std::to_string(mask.width()) + "x" +
               std::to_string(mask.height()) + " for crop " +
               std::to_string(request.crop.width()) + "x" +
               std::to_string(request.crop.height()));
    }
    return mask.ClippedTo(DilatedPrior(request.box_prior, options_.box_dilation,
                                       mask.width(), mask.height()));
  }
  Fail(ErrorCode::kBackendUnavailable,
       options_.endpoint + " unavailable after " + std::to_string(attempts) +
           " attempts (" + std::to_string(options_.retries) +
           " retries): " + last_failure);
}

}  // namespace attrefine
