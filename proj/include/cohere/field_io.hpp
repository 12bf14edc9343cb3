#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "cohere/error.hpp"
#include "cohere/field.hpp"

namespace cohere {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace detail {

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t& offset, const char* what) {
  if (bytes.size() < offset + sizeof(T)) throw ParseError(std::string("truncated ") + what, offset);
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

/// Writes through a temporary file and renames, so readers never see partial files.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  const auto tmp = std::filesystem::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

// Debug dump: "CFLD", u32 n, f64 pitch, f64 wavelength, then n^2 (re, im) f64 pairs.

inline std::vector<std::uint8_t> encode_field(const ComplexField& field) {
  std::vector<std::uint8_t> out;
  out.reserve(24 + field.samples().size() * 16);
  out.insert(out.end(), {'C', 'F', 'L', 'D'});
  detail::put_le(out, static_cast<std::uint32_t>(field.grid().n()));
  detail::put_le(out, field.grid().pitch());
  detail::put_le(out, field.wavelength());
  for (const Complex& c : field.samples()) {
    detail::put_le(out, c.real());
    detail::put_le(out, c.imag());
  }
  return out;
}

inline ComplexField decode_field(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "CFLD", 4) != 0) throw ParseError("missing CFLD magic", 0);
  std::size_t offset = 4;
  const auto n = detail::get_le<std::uint32_t>(bytes, offset, "header");
  const auto pitch = detail::get_le<double>(bytes, offset, "header");
  const auto wavelength = detail::get_le<double>(bytes, offset, "header");
  const GridSpec grid(n, pitch);
  std::vector<Complex> samples(grid.size());
  for (auto& s : samples) {
    const double re = detail::get_le<double>(bytes, offset, "sample payload");
    const double im = detail::get_le<double>(bytes, offset, "sample payload");
    s = Complex(re, im);
  }
  if (offset != bytes.size()) throw ParseError("trailing bytes after field payload", offset);
  return ComplexField(grid, wavelength, std::move(samples));
}

inline void write_field(const std::filesystem::path& path, const ComplexField& field) {
  detail::write_file_atomic(path, encode_field(field));
}

inline ComplexField read_field(const std::filesystem::path& path) { return decode_field(detail::read_file(path)); }

}  // namespace cohere
