#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cohere/error.hpp"
#include "cohere/field_io.hpp"
#include "cohere/scene.hpp"

namespace cohere {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// MNIST-style dataset: count 28x28 8-bit images with class labels 0-9.
struct IdxDataset {
  std::vector<std::uint8_t> pixels;  // count * 28 * 28, row-major per image
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }

  std::span<const std::uint8_t> image(std::size_t i) const {
    if (i >= size()) throw DataError("dataset index " + std::to_string(i) + " out of range");
    return {pixels.data() + i * kObjectSide * kObjectSide, kObjectSide * kObjectSide};
  }

  SlmObject object(std::size_t i) const {
    const auto px = image(i);
    return SlmObject{{px.begin(), px.end()}, std::nullopt};
  }

  std::array<std::uint64_t, 10> class_histogram(std::span<const std::size_t> indices) const {
    std::array<std::uint64_t, 10> hist{};
    for (std::size_t i : indices) ++hist.at(labels.at(i));
    return hist;
  }
};

namespace detail {

inline std::uint32_t get_be32(std::span<const std::uint8_t> bytes, std::size_t& offset, const char* what) {
  if (bytes.size() < offset + 4) throw ParseError(std::string("truncated ") + what, offset);
  const std::uint8_t* p = bytes.data() + offset;
  offset += 4;
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

}  // namespace detail

/// Decodes an IDX image file (magic 0x00000803, count, rows, cols, then bytes). Only 28x28 is accepted.
inline std::vector<std::uint8_t> parse_idx_images(std::span<const std::uint8_t> bytes, std::size_t& count) {
  std::size_t offset = 0;
  const std::uint32_t magic = detail::get_be32(bytes, offset, "IDX header");
  if (magic != kIdxImageMagic) {
    throw ParseError(magic == kIdxLabelMagic ? "image magic expected, found label magic" : "bad IDX image magic", 0);
  }
  count = detail::get_be32(bytes, offset, "IDX header");
  const std::size_t dims_at = offset;
  const std::uint32_t rows = detail::get_be32(bytes, offset, "IDX header");
  const std::uint32_t cols = detail::get_be32(bytes, offset, "IDX header");
  if (rows != kObjectSide || cols != kObjectSide) {
    throw ParseError("IDX images must be 28x28, got " + std::to_string(rows) + "x" + std::to_string(cols), dims_at);
  }
  const std::size_t payload = count * kObjectSide * kObjectSide;
  if (bytes.size() - offset < payload) throw ParseError("truncated IDX image payload", bytes.size());
  if (bytes.size() - offset > payload) throw ParseError("trailing bytes after IDX image payload", offset + payload);
  return {bytes.begin() + static_cast<long>(offset), bytes.end()};
}

/// Decodes an IDX label file (magic 0x00000801, count, then one byte per label in 0-9).
inline std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  std::size_t offset = 0;
  const std::uint32_t magic = detail::get_be32(bytes, offset, "IDX header");
  if (magic != kIdxLabelMagic) throw ParseError("label magic expected", 0);
  const std::size_t count = detail::get_be32(bytes, offset, "IDX header");
  if (bytes.size() - offset < count) throw ParseError("truncated IDX label payload", bytes.size());
  if (bytes.size() - offset > count) throw ParseError("trailing bytes after IDX label payload", offset + count);
  std::vector<std::uint8_t> labels(bytes.begin() + static_cast<long>(offset), bytes.end());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 9) throw ParseError("label out of range 0-9", offset + i);
  }
  return labels;
}

inline IdxDataset parse_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes) {
  std::size_t count = 0;
  IdxDataset ds{parse_idx_images(image_bytes, count), parse_idx_labels(label_bytes)};
  if (ds.labels.size() != count) {
    throw DataError("image count " + std::to_string(count) + " does not match label count " +
                    std::to_string(ds.labels.size()));
  }
  return ds;
}

inline IdxDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto image_bytes = detail::read_file(images);
  const auto label_bytes = detail::read_file(labels);
  try {
    return parse_idx(image_bytes, label_bytes);
  } catch (const ParseError& e) {
    throw DataError(images.filename().string() + "/" + labels.filename().string() + ": " + e.what());
  }
}

namespace detail {

// Unbiased integer in [0, bound) from raw 64-bit engine output, independent of the standard
// library's distribution implementation.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % bound;
}

}  // namespace detail

/// `count` distinct indices drawn uniformly from [0, size) without replacement, sorted ascending.
inline std::vector<std::size_t> select_objects(std::size_t size, std::size_t count, std::uint64_t seed) {
  if (count > size) {
    throw ConfigError("cannot select " + std::to_string(count) + " objects from a dataset of " + std::to_string(size));
  }
  std::vector<std::size_t> pool(size);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(detail::uniform_below(rng, size - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace cohere
