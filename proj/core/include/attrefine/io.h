// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTREFINE_IO_H_
#define ATTREFINE_IO_H_

#include <filesystem>
#include <string>
#include <string_view>

#include "attrefine/image.h"
#include "attrefine/mask.h"
#include "attrefine/tensor.h"

namespace attrefine {

// SODT tensor files: "SODT1\n", a one-line JSON header
// {"dtype":"f32","shape":[...]}, "\n", then little-endian float32 payload.
std::string EncodeTensor(const Tensor& tensor);
Tensor DecodeTensor(std::string_view bytes);
Tensor ReadTensor(const std::filesystem::path& path);
void WriteTensor(const Tensor& tensor, const std::filesystem::path& path);

// Grayscale ingestion. PNG (8/16-bit; colour collapsed to luma) and binary
// PGM (P5, maxval up to 65535) are recognised by magic bytes. Intensities
// are divided by the format maximum.
GrayImage ReadImage(const std::filesystem::path& path);
GrayImage DecodeImage(std::string_view bytes);
// Header-only probe; returns {width, height}.
std::pair<int, int> ReadImageSize(const std::filesystem::path& path);

// 16-bit grayscale PNG; intensities quantised to round(v * 65535).
std::string EncodePng(const GrayImage& image);
void WritePng(const GrayImage& image, const std::filesystem::path& path);
// Binary PGM with maxval 65535.
void WritePgm(const GrayImage& image, const std::filesystem::path& path);

// {"width":W,"height":H,"runs":[[start,len],...]}
std::string MaskToJson(const BinaryMask& mask);
BinaryMask MaskFromJson(std::string_view text);
BinaryMask ReadMask(const std::filesystem::path& path);
void WriteMask(const BinaryMask& mask, const std::filesystem::path& path);

std::string ReadFile(const std::filesystem::path& path);
// Writes to a sibling temporary and renames it into place.
void WriteFileAtomic(const std::filesystem::path& path,
                     std::string_view contents);

}  // namespace attrefine

#endif  // ATTREFINE_IO_H_
