// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "axllm/quantizer.hpp"

namespace axllm {

/// AXLM binary matrix file, all multi-byte fields little-endian:
///
///   offset  size  field
///   0       4     magic "AXLM"
///   4       2     version (uint16, currently 1)
///   6       4     rows (uint32)
///   10      4     cols (uint32)
///   14      8     scale (IEEE-754 binary64)
///   22      r*c   payload, int8 row-major, never -128
inline constexpr std::uint16_t kMatrixFileVersion = 1;
inline constexpr std::size_t kMatrixHeaderBytes = 22;

std::vector<std::uint8_t> encode_matrix(const QuantizedMatrix& m);
QuantizedMatrix decode_matrix(const std::vector<std::uint8_t>& bytes);

/// Writes through a temporary file and renames, so a failed write never
/// leaves a partial file at path.
void write_matrix(const std::filesystem::path& path, const QuantizedMatrix& m);
QuantizedMatrix read_matrix(const std::filesystem::path& path);

/// Atomic text write (temp file + rename).
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace axllm
