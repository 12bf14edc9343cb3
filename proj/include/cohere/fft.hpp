#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <tuple>

#include "cohere/error.hpp"

namespace cohere::fft {

enum class Direction : int { forward = FFTW_FORWARD, inverse = FFTW_BACKWARD };

/// SIMD-aligned complex buffer. All transforms run on these so that every
/// execution sees the alignment its plan was created for (bit-reproducible output).
class Buffer {
 public:
  Buffer() = default;
  explicit Buffer(std::size_t size) { resize(size); }

  void resize(std::size_t size) {
    if (size <= capacity_) {
      size_ = size;
      return;
    }
    data_.reset(static_cast<std::complex<double>*>(fftw_malloc(sizeof(std::complex<double>) * size)));
    if (!data_) throw std::bad_alloc();
    size_ = capacity_ = size;
  }

  std::complex<double>* data() noexcept { return data_.get(); }
  const std::complex<double>* data() const noexcept { return data_.get(); }
  std::size_t size() const noexcept { return size_; }
  std::complex<double>& operator[](std::size_t i) noexcept { return data_[i]; }
  const std::complex<double>& operator[](std::size_t i) const noexcept { return data_[i]; }
  std::span<std::complex<double>> span() noexcept { return {data_.get(), size_}; }

  void zero() noexcept {
    if (size_ > 0) std::memset(static_cast<void*>(data_.get()), 0, sizeof(std::complex<double>) * size_);
  }

 private:
  struct Free {
    void operator()(std::complex<double>* p) const noexcept { fftw_free(p); }
  };
  std::unique_ptr<std::complex<double>[], Free> data_;
  std::size_t size_ = 0;
  std::size_t capacity_ = 0;
};

namespace detail {

inline fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

/// Process-wide plan cache. FFTW planning is not thread-safe; execution of an
/// existing plan on new (equally aligned) arrays is.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  // Batch of `count` contiguous in-place transforms of length `length`.
  fftw_plan batch(std::size_t length, std::size_t count, Direction dir) {
    return get({0, length, count, static_cast<int>(dir)}, [&](std::complex<double>* scratch) {
      const int n = static_cast<int>(length);
      return fftw_plan_many_dft(1, &n, static_cast<int>(count), as_fftw(scratch), nullptr, 1, n, as_fftw(scratch),
                                nullptr, 1, n, static_cast<int>(dir), FFTW_ESTIMATE);
    }, length * count);
  }

  // Batch of `count` contiguous out-of-place transforms; the input is left unchanged.
  fftw_plan batch_out_of_place(std::size_t length, std::size_t count, Direction dir) {
    return get({2, length, count, static_cast<int>(dir)}, [&](std::complex<double>* scratch) {
      Buffer out(length * count);
      const int n = static_cast<int>(length);
      return fftw_plan_many_dft(1, &n, static_cast<int>(count), as_fftw(scratch), nullptr, 1, n, as_fftw(out.data()),
                                nullptr, 1, n, static_cast<int>(dir), FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
    }, length * count);
  }

  // In-place rows x cols 2D transform.
  fftw_plan two_d(std::size_t rows, std::size_t cols, Direction dir) {
    return get({1, rows, cols, static_cast<int>(dir)}, [&](std::complex<double>* scratch) {
      return fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), as_fftw(scratch), as_fftw(scratch),
                              static_cast<int>(dir), FFTW_ESTIMATE);
    }, rows * cols);
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  using Key = std::tuple<int, std::size_t, std::size_t, int>;

  template <class Make>
  fftw_plan get(const Key& key, Make make, std::size_t scratch_size) {
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    Buffer scratch(scratch_size);
    fftw_plan plan = make(scratch.data());
    if (plan == nullptr) throw NumericalError("FFTW failed to create a plan");
    plans_.emplace(key, plan);
    return plan;
  }

  std::mutex mutex_;
  std::map<Key, fftw_plan> plans_;
};

}  // namespace detail

/// `count` contiguous unnormalized transforms of length `length`, in place, starting at data.
inline void transform_batch(std::complex<double>* data, std::size_t length, std::size_t count, Direction dir) {
  if (count == 0) return;
  fftw_plan plan = detail::PlanCache::instance().batch(length, count, dir);
  fftw_execute_dft(plan, detail::as_fftw(data), detail::as_fftw(data));
}

/// Out-of-place variant of transform_batch. `in` is not modified; `in` and `out` must not overlap.
inline void transform_batch(const std::complex<double>* in, std::complex<double>* out, std::size_t length,
                            std::size_t count, Direction dir) {
  if (count == 0) return;
  fftw_plan plan = detail::PlanCache::instance().batch_out_of_place(length, count, dir);
  fftw_execute_dft(plan, detail::as_fftw(const_cast<std::complex<double>*>(in)), detail::as_fftw(out));
}

/// Unnormalized in-place 2D transform of a rows x cols row-major buffer.
inline void transform_2d(Buffer& buffer, std::size_t rows, std::size_t cols, Direction dir) {
  if (buffer.size() < rows * cols) throw ContractError("fft buffer smaller than transform");
  fftw_plan plan = detail::PlanCache::instance().two_d(rows, cols, dir);
  fftw_execute_dft(plan, detail::as_fftw(buffer.data()), detail::as_fftw(buffer.data()));
}

/// Signed frequency of bin k in standard FFT order for a length-n transform with sample spacing d.
inline double frequency(std::size_t k, std::size_t n, double spacing) {
  const auto signed_k = k < (n + 1) / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
  return signed_k / (static_cast<double>(n) * spacing);
}

}  // namespace cohere::fft
