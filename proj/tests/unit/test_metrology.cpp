#include "support.hpp"

#include <map>
#include <random>

#include "cohere/entropy.hpp"
#include "cohere/plot.hpp"
#include "cohere/speckle.hpp"
#include "cohere/stats.hpp"
#include "cohere/visibility.hpp"

namespace cohere {
namespace {

/// Independent reference: pads the image by edge replication, then counts (i, j) pairs in a map.
double brute_force_entropy(const Gray8Image& img) {
  const std::size_t w = img.width, h = img.height;
  std::vector<std::vector<int>> padded(h + 2, std::vector<int>(w + 2));
  for (std::size_t r = 0; r < h + 2; ++r) {
    for (std::size_t c = 0; c < w + 2; ++c) {
      const std::size_t rr = std::min(std::max<std::size_t>(r, 1), h) - 1;
      const std::size_t cc = std::min(std::max<std::size_t>(c, 1), w) - 1;
      padded[r][c] = img.pixels[rr * w + cc];
    }
  }
  std::map<std::pair<int, int>, int> counts;
  for (std::size_t r = 1; r <= h; ++r) {
    for (std::size_t c = 1; c <= w; ++c) {
      const int sum = padded[r - 1][c - 1] + padded[r - 1][c] + padded[r - 1][c + 1] + padded[r][c - 1] +
                      padded[r][c + 1] + padded[r + 1][c - 1] + padded[r + 1][c] + padded[r + 1][c + 1];
      ++counts[{padded[r][c], (sum + 4) / 8}];
    }
  }
  double H = 0.0;
  for (const auto& [pair, n] : counts) {
    const double p = double(n) / double(w * h);
    H -= p * std::log2(p);
  }
  return H;
}

Gray8Image stripes_6x6() {
  Gray8Image img{6, 6, std::vector<std::uint8_t>(36)};
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 6; ++c) img.pixels[r * 6 + c] = c % 2 == 0 ? 50 : 200;
  }
  return img;
}

TEST(Entropy, ConstantImageIsZero) {
  const Gray8Image img{16, 16, std::vector<std::uint8_t>(256, 77)};
  const auto report = entropy_2d(img);
  EXPECT_EQ(report.entropy, 0.0);
  EXPECT_EQ(report.histogram[77 * kGrayLevels + 77], 256u);
}

TEST(Entropy, UniformPairsReachSixteenBits) {
  std::vector<std::uint64_t> hist(kGrayLevels * kGrayLevels, 3);
  EXPECT_NEAR(entropy_from_histogram(hist, 3 * hist.size()), 16.0, 1e-12);
}

TEST(Entropy, StripePatternMatchesFrozenReference) {
  // Columns 50/200 give pairs (50,106) x6, (200,88) x12, (50,163) x12, (200,144) x6: H = 1/3 + log2 3.
  constexpr double kStripeEntropy = 1.9182958340544896;
  const auto img = stripes_6x6();
  EXPECT_NEAR(brute_force_entropy(img), kStripeEntropy, 1e-12);
  EXPECT_NEAR(entropy_2d(img).entropy, kStripeEntropy, 1e-12);
}

TEST(Entropy, MatchesBruteForceOnRandomImages) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 5; ++k) {
    Gray8Image img{13, 9, std::vector<std::uint8_t>(13 * 9)};
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() % 256);
    EXPECT_NEAR(entropy_2d(img).entropy, brute_force_entropy(img), 1e-12);
  }
}

TEST(Entropy, SensitiveToSpatialArrangement) {
  Gray8Image split{8, 8, std::vector<std::uint8_t>(64)};
  Gray8Image checker{8, 8, std::vector<std::uint8_t>(64)};
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t c = 0; c < 8; ++c) {
      split.pixels[r * 8 + c] = c < 4 ? 0 : 255;
      checker.pixels[r * 8 + c] = (r + c) % 2 ? 0 : 255;
    }
  }
  EXPECT_NE(entropy_2d(split).entropy, entropy_2d(checker).entropy);
}

TEST(Entropy, MeanOfItems) {
  EXPECT_EQ(mean_entropy(std::vector<double>{4.5}), 4.5);
  EXPECT_EQ(mean_entropy(std::vector<double>{3.0, 3.0}), 3.0);
  EXPECT_THROW(mean_entropy(std::vector<double>{}), DataError);
  EXPECT_THROW(entropy_2d(Gray8Image{}), DataError);
}

TEST(Entropy, RawImageUsesExposureScale) {
  const GridSpec g(4, 1e-5);
  IntensityImage img{g, std::vector<double>(16, 0.5), 1.0, {}};
  img.values[5] = 1.0;
  EXPECT_EQ(entropy_2d(img, 200.0).entropy, entropy_2d(quantize(img, 200.0)).entropy);
}

// ---------------------------------------------------------------------------------------------

IntensityImage fringe_image(double period, double visibility, double mean = 1.0) {
  const GridSpec g(256, 1e-5);
  std::vector<double> v(g.size());
  for (std::size_t r = 0; r < g.n(); ++r) {
    for (std::size_t c = 0; c < g.n(); ++c) v[r * g.n() + c] = mean * (1.0 + visibility * std::cos(2 * kPi * g.coordinate(c) / period));
  }
  return {g, v, 1.0, {}};
}

FringeWindow window_for(double period) {
  FringeWindow w;
  w.period = period;
  return w;
}

TEST(Visibility, AnalyticFringeIsOne) {
  const double p = 1.6e-4;
  EXPECT_NEAR(fringe_visibility(fringe_image(p, 1.0), window_for(p)).visibility, 1.0, 1e-6);
}

TEST(Visibility, PartialContrast) {
  const double p = 1.6e-4;
  EXPECT_NEAR(fringe_visibility(fringe_image(p, 0.37, 4.0), window_for(p)).visibility, 0.37, 1e-6);
}

TEST(Visibility, ConstantIsZero) {
  const double p = 1.6e-4;
  EXPECT_NEAR(fringe_visibility(fringe_image(p, 0.0), window_for(p)).visibility, 0.0, 1e-9);
}

TEST(Visibility, RejectsDegenerateInput) {
  const double p = 1.6e-4;
  EXPECT_THROW(fringe_visibility(fringe_image(p, 0.0, 0.0), window_for(p)), DataError);
  EXPECT_THROW(fringe_visibility(fringe_image(p, 1.0), window_for(0.5e-3)), ConfigError);
  EXPECT_THROW(fringe_visibility(fringe_image(p, 1.0), window_for(0.0)), ConfigError);
}

// ---------------------------------------------------------------------------------------------

/// |low-pass filtered complex noise|^2 with a Gaussian filter; intensity autocovariance exp(-r^2 / s^2).
IntensityImage synthetic_speckle(double s_pixels, std::uint64_t seed) {
  const std::size_t n = 512;
  fft::Buffer buf(n * n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < n * n; ++i) buf[i] = {normal(rng), normal(rng)};
  fft::transform_2d(buf, n, n, fft::Direction::forward);
  // field correlation exp(-r^2 / (2 s^2)) -> transfer exp(-pi^2 s^2 f^2) on f in cycles/pixel
  for (std::size_t ky = 0; ky < n; ++ky) {
    for (std::size_t kx = 0; kx < n; ++kx) {
      const double fx = fft::frequency(kx, n, 1.0), fy = fft::frequency(ky, n, 1.0);
      buf[ky * n + kx] *= std::exp(-kPi * kPi * s_pixels * s_pixels * (fx * fx + fy * fy));
    }
  }
  fft::transform_2d(buf, n, n, fft::Direction::inverse);
  const GridSpec g(n, 1e-5);
  std::vector<double> v(n * n);
  for (std::size_t i = 0; i < n * n; ++i) v[i] = std::norm(buf[i]);
  return {g, v, 1.0, {}};
}

TEST(Speckle, SyntheticSizeMatchesKnownWidth) {
  const double s = 4.0;
  const auto img = synthetic_speckle(s, 1);
  const auto report = speckle_stats(img, SpeckleWindow::centered(img.grid, 256));
  EXPECT_NEAR(report.size, s * img.grid.pitch(), 0.1 * s * img.grid.pitch());
}

TEST(Speckle, FullyDevelopedContrastIsOne) {
  const auto img = synthetic_speckle(3.0, 2);
  EXPECT_NEAR(speckle_stats(img, SpeckleWindow::centered(img.grid, 256)).contrast, 1.0, 0.15);
}

TEST(Speckle, StationaryUnderWindowShift) {
  const auto img = synthetic_speckle(4.0, 3);
  const auto w = SpeckleWindow::centered(img.grid, 256);
  auto shifted = w;
  shifted.col += 10;
  const double a = speckle_stats(img, w).size, b = speckle_stats(img, shifted).size;
  EXPECT_LT(std::abs(a - b) / a, 0.05);
}

TEST(Speckle, RejectsDegenerateWindows) {
  const GridSpec g(64, 1e-5);
  const IntensityImage flat{g, std::vector<double>(g.size(), 1.0), 1.0, {}};
  EXPECT_THROW(speckle_stats(flat, SpeckleWindow::centered(g, 32)), DataError);
  const IntensityImage dark{g, std::vector<double>(g.size(), 0.0), 1.0, {}};
  EXPECT_THROW(speckle_stats(dark, SpeckleWindow::centered(g, 32)), DataError);
  EXPECT_THROW(speckle_stats(flat, SpeckleWindow{60, 0, 8, 8}), ConfigError);
}

// ---------------------------------------------------------------------------------------------

TEST(Stats, TwoPointFitIsExact) {
  const auto fit = linear_fit(std::vector<double>{1.0, 3.0}, std::vector<double>{2.0, 8.0});
  EXPECT_DOUBLE_EQ(fit.slope, 3.0);
  EXPECT_DOUBLE_EQ(fit.intercept, -1.0);
  EXPECT_DOUBLE_EQ(fit.r_squared, 1.0);
  EXPECT_THROW(linear_fit(std::vector<double>{1.0}, std::vector<double>{1.0}), DataError);
}

TEST(Stats, NoisyFit) {
  const std::vector<double> x{0, 1, 2, 3, 4}, y{0.1, 0.9, 2.1, 2.9, 4.1};
  const auto fit = linear_fit(x, y);
  EXPECT_NEAR(fit.slope, 1.0, 0.05);
  EXPECT_GT(fit.r_squared, 0.99);
  EXPECT_LT(fit.r_squared, 1.0);
}

TEST(Stats, Spearman) {
  const std::vector<double> a{1, 2, 3, 4}, rev{9, 7, 5, 1}, ties{1, 1, 2, 3};
  EXPECT_DOUBLE_EQ(spearman(a, a), 1.0);
  EXPECT_DOUBLE_EQ(spearman(a, rev), -1.0);
  EXPECT_EQ(ranks(ties), (std::vector<double>{1.5, 1.5, 3.0, 4.0}));
}

// ---------------------------------------------------------------------------------------------

TEST(Plot, EmptySeriesIsAnError) {
  test::TempDir dir;
  EXPECT_THROW(render_plot(PlotSpec{}, dir / "p.png"), DataError);
}

TEST(Plot, SingleSeriesWritesFile) {
  test::TempDir dir;
  PlotSpec spec;
  spec.log_x = true;
  spec.series.push_back({"entropy", {0.1, 1.0, 8.0}, {5.0, 7.0, 7.2}});
  render_plot(spec, dir / "p.png");
  EXPECT_GT(std::filesystem::file_size(dir / "p.png"), 0u);
}

TEST(Plot, ComparisonLegendLabels) {
  const CsvTable t{{"coherence_length_m", "with_diffuser_mean_bits", "without_diffuser_mean_bits", "items"},
                   {{1e-4, 4.0, 5.0, 3}, {8e-3, 5.0, 7.0, 3}}};
  const auto spec = plot_spec_from_csv({{"entropy.csv", t}});
  ASSERT_EQ(spec.series.size(), 2u);
  EXPECT_EQ(spec.series[0].label, "with diffuser");
  EXPECT_EQ(spec.series[1].label, "without diffuser");
  EXPECT_TRUE(spec.log_x);
}

}  // namespace
}  // namespace cohere
