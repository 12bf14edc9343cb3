#pragma once

#include <gtest/gtest.h>

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "cohere/idx.hpp"

namespace cohere::test {

inline const std::filesystem::path kData = COHERE_TEST_DATA;
inline const std::filesystem::path kImages = kData / "mnist-1000-images-idx3-ubyte";
inline const std::filesystem::path kLabels = kData / "mnist-1000-labels-idx1-ubyte";

/// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = info ? std::string(info->test_suite_name()) + "." + info->name() : "cohere";
    path_ = std::filesystem::temp_directory_path() /
            ("cohere-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline const IdxDataset& fixture() {
  static const IdxDataset ds = load_idx(kImages, kLabels);
  return ds;
}

inline std::size_t first_with_label(int label) {
  const auto& ds = fixture();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] == label) return i;
  }
  throw std::runtime_error("label not in fixture");
}

inline double max_abs_diff(std::span<const Complex> a, std::span<const Complex> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double relative_l2(std::span<const Complex> a, std::span<const Complex> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return std::sqrt(num / den);
}

/// Field with a centered Gaussian envelope exp(-r^2 / w0^2).
inline ComplexField gaussian_field(const GridSpec& g, double w0, double wavelength = kDefaultWavelength) {
  std::vector<Complex> s(g.size());
  for (std::size_t r = 0; r < g.n(); ++r) {
    for (std::size_t c = 0; c < g.n(); ++c) {
      const double x = g.coordinate(c), y = g.coordinate(r);
      s[r * g.n() + c] = std::exp(-(x * x + y * y) / (w0 * w0));
    }
  }
  return ComplexField(g, wavelength, std::move(s));
}

}  // namespace cohere::test
