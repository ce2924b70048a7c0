// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#include "attrefine/io.h"

#include <png.h>

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "attrefine/error.h"

namespace attrefine {
namespace {

constexpr std::string_view kTensorMagic = "SODT1\n";
constexpr unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G',
                                            '\r', '\n', 0x1a, '\n'};

std::uint32_t ToLittleEndian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) |
           (v >> 24);
  }
  return v;
}

bool IsPng(std::string_view bytes) {
  return bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0;
}

// --- PNG ------------------------------------------------------------------

struct PngReadCursor {
  std::string_view bytes;
  std::size_t offset = 0;
};

void PngReadFn(png_structp png, png_bytep out, png_size_t count) {
  auto* cursor = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + count > cursor->bytes.size()) {
    png_error(png, "truncated PNG stream");
  }
  std::memcpy(out, cursor->bytes.data() + cursor->offset, count);
  cursor->offset += count;
}

void PngWriteFn(png_structp png, png_bytep data, png_size_t count) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), count);
}

void PngFlushFn(png_structp) {}

[[noreturn]] void PngErrorFn(png_structp, png_const_charp msg) {
  throw Error(ErrorCode::kIoError, std::string("png: ") + msg);
}

void PngWarningFn(png_structp, png_const_charp) {}

GrayImage DecodePng(std::string_view bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           PngErrorFn, PngWarningFn);
  if (!png) Fail(ErrorCode::kIoError, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_read_struct(png, info, nullptr); }
  } guard{&png, &info};

  PngReadCursor cursor{bytes, 0};
  png_set_read_fn(png, &cursor, PngReadFn);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_RGB_ALPHA ||
      color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> raw(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = raw.data() + y * rowbytes;
  png_read_image(png, rows.data());

  std::vector<double> data(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v;
      if (depth == 16) {
        // PNG samples are big-endian.
        v = ((rows[y][2 * x] << 8) | rows[y][2 * x + 1]) / 65535.0;
      } else {
        v = rows[y][x] / 255.0;
      }
      data[static_cast<std::size_t>(y) * width + x] = v;
    }
  }
  return GrayImage(width, height, std::move(data));
}

// --- PGM ------------------------------------------------------------------

struct PgmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

PgmHeader ParsePgmHeader(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    Fail(ErrorCode::kIoError, "not a binary PGM (P5) file");
  }
  std::size_t pos = 2;
  auto next_int = [&]() {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
    int value = 0;
    bool any = false;
    while (pos < bytes.size() &&
           std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + (bytes[pos] - '0');
      ++pos;
      any = true;
    }
    if (!any) Fail(ErrorCode::kIoError, "malformed PGM header");
    return value;
  };
  PgmHeader h;
  h.width = next_int();
  h.height = next_int();
  h.maxval = next_int();
  if (pos >= bytes.size()) Fail(ErrorCode::kIoError, "PGM has no payload");
  h.data_offset = pos + 1;  // single whitespace after maxval
  if (h.maxval <= 0 || h.maxval > 65535) {
    Fail(ErrorCode::kIoError, "PGM maxval out of range");
  }
  return h;
}

GrayImage DecodePgm(std::string_view bytes) {
  const PgmHeader h = ParsePgmHeader(bytes);
  const std::size_t bpp = h.maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  if (bytes.size() < h.data_offset + n * bpp) {
    Fail(ErrorCode::kIoError, "truncated PGM payload");
  }
  const auto* p =
      reinterpret_cast<const unsigned char*>(bytes.data() + h.data_offset);
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int raw = bpp == 2 ? (p[2 * i] << 8) | p[2 * i + 1] : p[i];
    data[i] = std::min(1.0, static_cast<double>(raw) / h.maxval);
  }
  return GrayImage(h.width, h.height, std::move(data));
}

std::uint16_t Quantize16(double v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

std::string Slurp(std::ifstream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// --- Tensors --------------------------------------------------------------

std::string EncodeTensor(const Tensor& tensor) {
  nlohmann::json header = {{"dtype", "f32"}, {"shape", tensor.shape()}};
  std::string out(kTensorMagic);
  out += header.dump();
  out += '\n';
  const auto data = tensor.data();
  out.reserve(out.size() + data.size() * 4);
  for (float f : data) {
    const std::uint32_t bits = ToLittleEndian(std::bit_cast<std::uint32_t>(f));
    char buf[4];
    std::memcpy(buf, &bits, 4);
    out.append(buf, 4);
  }
  return out;
}

Tensor DecodeTensor(std::string_view bytes) {
  if (bytes.substr(0, kTensorMagic.size()) != kTensorMagic) {
    Fail(ErrorCode::kMalformedHeader, "missing SODT1 magic line");
  }
  bytes.remove_prefix(kTensorMagic.size());
  const std::size_t eol = bytes.find('\n');
  if (eol == std::string_view::npos) {
    Fail(ErrorCode::kMalformedHeader, "missing header line terminator");
  }
  std::vector<std::int64_t> shape;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(0, eol));
    if (!header.is_object() || header.value("dtype", "") != "f32" ||
        !header.contains("shape") || !header["shape"].is_array()) {
      Fail(ErrorCode::kMalformedHeader, "header must carry dtype f32 and shape");
    }
    for (const auto& d : header["shape"]) {
      if (!d.is_number_integer() || d.get<std::int64_t>() < 0) {
        Fail(ErrorCode::kMalformedHeader, "shape extents must be integers >= 0");
      }
      shape.push_back(d.get<std::int64_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kMalformedHeader, e.what());
  }
  bytes.remove_prefix(eol + 1);
  if (bytes.size() % 4 != 0) {
    Fail(ErrorCode::kShapeMismatch, "payload is not a whole number of f32");
  }
  const std::int64_t expected = ShapeProduct(shape);
  const std::size_t count = bytes.size() / 4;
  if (static_cast<std::int64_t>(count) != expected) {
    Fail(ErrorCode::kShapeMismatch,
         "header shape holds " + std::to_string(expected) +
             " values, payload has " + std::to_string(count));
  }
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, bytes.data() + 4 * i, 4);
    data[i] = std::bit_cast<float>(ToLittleEndian(bits));
  }
  return Tensor(std::move(shape), std::move(data));
}

Tensor ReadTensor(const std::filesystem::path& path) {
  return DecodeTensor(ReadFile(path));
}

void WriteTensor(const Tensor& tensor, const std::filesystem::path& path) {
  WriteFileAtomic(path, EncodeTensor(tensor));
}

// --- Images ---------------------------------------------------------------

GrayImage DecodeImage(std::string_view bytes) {
  if (IsPng(bytes)) return DecodePng(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
    return DecodePgm(bytes);
  }
  Fail(ErrorCode::kIoError, "unrecognised image format (expected PNG or P5)");
}

GrayImage ReadImage(const std::filesystem::path& path) {
  return DecodeImage(ReadFile(path));
}

std::pair<int, int> ReadImageSize(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIoError, "cannot open " + path.string());
  std::string head(64, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  if (IsPng(head) && head.size() >= 24) {
    // IHDR is always the first chunk: width/height big-endian at 16..23.
    auto be32 = [&](std::size_t o) {
      const auto* u = reinterpret_cast<const unsigned char*>(head.data() + o);
      return static_cast<int>((std::uint32_t{u[0]} << 24) |
                              (std::uint32_t{u[1]} << 16) |
                              (std::uint32_t{u[2]} << 8) | u[3]);
    };
    return {be32(16), be32(20)};
  }
  if (head.size() >= 2 && head[0] == 'P' && head[1] == '5') {
    const PgmHeader h = ParsePgmHeader(head);
    return {h.width, h.height};
  }
  Fail(ErrorCode::kIoError, "unrecognised image format: " + path.string());
}

std::string EncodePng(const GrayImage& image) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            PngErrorFn, PngWarningFn);
  if (!png) Fail(ErrorCode::kIoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_write_struct(png, info); }
  } guard{&png, &info};

  std::string out;
  png_set_write_fn(png, &out, PngWriteFn, PngFlushFn);
  png_set_IHDR(png, info, image.width(), image.height(), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(2 * static_cast<std::size_t>(image.width()));
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const std::uint16_t s = Quantize16(image.at(x, y));
      row[2 * x] = static_cast<unsigned char>(s >> 8);
      row[2 * x + 1] = static_cast<unsigned char>(s & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  return out;
}

void WritePng(const GrayImage& image, const std::filesystem::path& path) {
  WriteFileAtomic(path, EncodePng(image));
}

void WritePgm(const GrayImage& image, const std::filesystem::path& path) {
  std::string out = "P5\n" + std::to_string(image.width()) + " " +
                    std::to_string(image.height()) + "\n65535\n";
  out.reserve(out.size() + 2 * image.data().size());
  for (double v : image.data()) {
    const std::uint16_t s = Quantize16(v);
    out.push_back(static_cast<char>(s >> 8));
    out.push_back(static_cast<char>(s & 0xff));
  }
  WriteFileAtomic(path, out);
}

// --- Masks ----------------------------------------------------------------

std::string MaskToJson(const BinaryMask& mask) {
  nlohmann::json runs = nlohmann::json::array();
  for (const Run& r : mask.runs()) runs.push_back({r.start, r.length});
  nlohmann::json j = {
      {"width", mask.width()}, {"height", mask.height()}, {"runs", runs}};
  return j.dump();
}

BinaryMask MaskFromJson(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const int width = j.at("width").get<int>();
    const int height = j.at("height").get<int>();
    std::vector<Run> runs;
    for (const auto& r : j.at("runs")) {
      if (!r.is_array() || r.size() != 2) {
        Fail(ErrorCode::kInvalidArgument, "mask run must be [start,len]");
      }
      runs.push_back({r[0].get<std::int64_t>(), r[1].get<std::int64_t>()});
    }
    return BinaryMask::FromRuns(width, height, std::move(runs));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kInvalidArgument, std::string("mask json: ") + e.what());
  }
}

BinaryMask ReadMask(const std::filesystem::path& path) {
  return MaskFromJson(ReadFile(path));
}

void WriteMask(const BinaryMask& mask, const std::filesystem::path& path) {
  WriteFileAtomic(path, MaskToJson(mask) + "\n");
}

// --- Files ----------------------------------------------------------------

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIoError, "cannot open " + path.string());
  return Slurp(in);
}

void WriteFileAtomic(const std::filesystem::path& path,
                     std::string_view contents) {
  static std::atomic<unsigned> counter{0};
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorCode::kIoError, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      Fail(ErrorCode::kIoError, "short write to " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    Fail(ErrorCode::kIoError, "cannot rename into " + path.string());
  }
}

}  // namespace attrefine
