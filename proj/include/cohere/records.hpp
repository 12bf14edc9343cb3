#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cohere/error.hpp"
#include "cohere/field.hpp"
#include "cohere/field_io.hpp"

namespace cohere {

/// Lowercase hex SHA-256 of a byte string.
inline std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw DataError("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

inline std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(detail::read_file(path)); }

// Raw intensity record: "CINT", u32 n, f64 pitch, then n^2 f32 values, little-endian.

inline std::vector<std::uint8_t> encode_cint(const IntensityImage& image) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + 4 * image.values.size());
  out.insert(out.end(), {'C', 'I', 'N', 'T'});
  detail::put_le(out, static_cast<std::uint32_t>(image.grid.n()));
  detail::put_le(out, image.grid.pitch());
  for (double v : image.values) detail::put_le(out, static_cast<float>(v));
  return out;
}

/// Decoded record. Values are the stored f32 samples widened to double; exposure and metadata live in
/// the manifest, not the record.
inline IntensityImage decode_cint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "CINT", 4) != 0) throw ParseError("missing CINT magic", 0);
  std::size_t offset = 4;
  const auto n = detail::get_le<std::uint32_t>(bytes, offset, "CINT header");
  const auto pitch = detail::get_le<double>(bytes, offset, "CINT header");
  const GridSpec grid(n, pitch);
  if ((bytes.size() - offset) / 4 < grid.size()) throw ParseError("truncated CINT payload", bytes.size());
  std::vector<double> values(grid.size());
  for (double& v : values) v = detail::get_le<float>(bytes, offset, "CINT payload");
  if (offset != bytes.size()) throw ParseError("trailing bytes after CINT payload", offset);
  return IntensityImage{grid, std::move(values), 1.0, {}};
}

inline void write_cint(const std::filesystem::path& path, const IntensityImage& image) {
  detail::write_file_atomic(path, encode_cint(image));
}

inline IntensityImage read_cint(const std::filesystem::path& path) {
  try {
    return decode_cint(detail::read_file(path));
  } catch (const ParseError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

/// 8-bit gray image, row-major.
struct Gray8Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

/// clamp(round(v * scale), 0, 255), halves rounded away from zero.
inline std::uint8_t quantize(double value, double scale) {
  const double q = std::round(value * scale);
  if (!(q > 0.0)) return 0;
  return q >= 255.0 ? 255 : static_cast<std::uint8_t>(q);
}

inline Gray8Image quantize(const IntensityImage& image, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ContractError("exposure scale must be positive and finite");
  Gray8Image out{image.grid.n(), image.grid.n(), std::vector<std::uint8_t>(image.values.size())};
  std::transform(image.values.begin(), image.values.end(), out.pixels.begin(),
                 [scale](double v) { return quantize(v, scale); });
  return out;
}

/// Binary PGM (P5, maxval 255).
inline std::vector<std::uint8_t> encode_pgm(const Gray8Image& image) {
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

inline void write_pgm(const std::filesystem::path& path, const Gray8Image& image) {
  detail::write_file_atomic(path, encode_pgm(image));
}

}  // namespace cohere
