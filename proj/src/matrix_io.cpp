// SPDX-License-Identifier: Apache-2.0
#include "axllm/matrix_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "axllm/error.hpp"

namespace axllm {

namespace {

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(std::uint8_t(bits >> (8 * i)));
}

template <class T>
T get_le(const std::vector<std::uint8_t>& in, std::size_t offset) {
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= std::uint64_t(in[offset + i]) << (8 * i);
  T value;
  std::memcpy(&value, &bits, sizeof(T));
  return value;
}

[[noreturn]] void bad_file(const std::string& what) {
  throw InvalidArgument("AXLM file: " + what);
}

}  // namespace

std::vector<std::uint8_t> encode_matrix(const QuantizedMatrix& m) {
  m.validate();
  if (m.rows > std::numeric_limits<std::uint32_t>::max() ||
      m.cols > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("AXLM file: shape does not fit 32-bit header fields");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kMatrixHeaderBytes + m.data.size());
  for (char c : {'A', 'X', 'L', 'M'}) out.push_back(std::uint8_t(c));
  put_le<std::uint16_t>(out, kMatrixFileVersion);
  put_le<std::uint32_t>(out, std::uint32_t(m.rows));
  put_le<std::uint32_t>(out, std::uint32_t(m.cols));
  put_le<double>(out, m.scale);
  for (auto v : m.data) out.push_back(std::uint8_t(v));
  return out;
}

QuantizedMatrix decode_matrix(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kMatrixHeaderBytes) bad_file("truncated header");
  if (std::memcmp(bytes.data(), "AXLM", 4) != 0) bad_file("bad magic");
  const auto version = get_le<std::uint16_t>(bytes, 4);
  if (version != kMatrixFileVersion) {
    bad_file("unsupported version " + std::to_string(version));
  }
  const auto rows = get_le<std::uint32_t>(bytes, 6);
  const auto cols = get_le<std::uint32_t>(bytes, 10);
  const auto scale = get_le<double>(bytes, 14);
  if (rows == 0) bad_file("rows is zero");
  if (cols == 0) bad_file("cols is zero");
  if (!(scale > 0.0) || !std::isfinite(scale)) bad_file("scale is not a positive finite number");
  const std::uint64_t payload = std::uint64_t(rows) * cols;
  const std::uint64_t have = bytes.size() - kMatrixHeaderBytes;
  if (have < payload) {
    std::ostringstream os;
    os << "truncated payload: header says " << rows << "x" << cols << " (" << payload
       << " bytes), found " << have;
    bad_file(os.str());
  }
  if (have > payload) {
    std::ostringstream os;
    os << "size mismatch: " << (have - payload) << " trailing bytes after payload";
    bad_file(os.str());
  }
  QuantizedMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.scale = scale;
  m.data.resize(payload);
  for (std::uint64_t i = 0; i < payload; ++i) {
    const auto b = std::int8_t(bytes[kMatrixHeaderBytes + i]);
    if (b == -128) bad_file("payload byte -128 at element " + std::to_string(i));
    m.data[i] = b;
  }
  return m;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot open " + tmp.string() + " for writing");
    out.write(text.data(), std::streamsize(text.size()));
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw InvalidArgument("write to " + tmp.string() + " failed");
    }
  }
  std::filesystem::rename(tmp, path);
}

void write_matrix(const std::filesystem::path& path, const QuantizedMatrix& m) {
  const auto bytes = encode_matrix(m);
  write_text_atomic(path, std::string(bytes.begin(), bytes.end()));
}

QuantizedMatrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_matrix(bytes);
}

}  // namespace axllm
