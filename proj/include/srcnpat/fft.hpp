#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>

#include "srcnpat/errors.hpp"

namespace srcnpat::fft {

// FFTW's planner is not re-entrant; every plan creation/destruction goes
// through this lock.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

template <class T>
using AlignedBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
AlignedBuffer<T> allocate(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw Error("fftw_malloc failed");
  return AlignedBuffer<T>(p);
}

class Plan {
 public:
  Plan() = default;
  explicit Plan(fftw_plan p) : plan_(p) {
    if (plan_ == nullptr) throw Error("FFTW plan creation failed");
  }
  Plan(Plan&& o) noexcept : plan_(o.plan_) { o.plan_ = nullptr; }
  Plan& operator=(Plan&& o) noexcept {
    if (this != &o) {
      reset();
      plan_ = o.plan_;
      o.plan_ = nullptr;
    }
    return *this;
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan() { reset(); }

  void execute() const { fftw_execute(plan_); }
  void execute_r2c(double* in, std::complex<double>* out) const {
    fftw_execute_dft_r2c(plan_, in, reinterpret_cast<fftw_complex*>(out));
  }
  void execute_c2r(std::complex<double>* in, double* out) const {
    fftw_execute_dft_c2r(plan_, reinterpret_cast<fftw_complex*>(in), out);
  }

 private:
  void reset() {
    if (plan_ != nullptr) {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
      plan_ = nullptr;
    }
  }
  fftw_plan plan_ = nullptr;
};

// Real <-> half-complex 2D transform pair for an n0 x n1 row-major array.
// FFTW_ESTIMATE keeps plans, and therefore results, reproducible run to run.
// The inverse is unnormalized.
class Real2D {
 public:
  Real2D(std::size_t n0, std::size_t n1) : n0_(n0), n1_(n1) {
    auto re = allocate<double>(n0 * n1);
    auto cx = allocate<std::complex<double>>(n0 * (n1 / 2 + 1));
    std::lock_guard lock(planner_mutex());
    auto* c = reinterpret_cast<fftw_complex*>(cx.get());
    forward_ = Plan(fftw_plan_dft_r2c_2d(static_cast<int>(n0), static_cast<int>(n1), re.get(), c, FFTW_ESTIMATE));
    backward_ = Plan(fftw_plan_dft_c2r_2d(static_cast<int>(n0), static_cast<int>(n1), c, re.get(), FFTW_ESTIMATE));
  }

  std::size_t real_size() const { return n0_ * n1_; }
  std::size_t complex_size() const { return n0_ * (n1_ / 2 + 1); }

  // in/out must be fftw_malloc-aligned buffers of the sizes above.
  void forward(double* in, std::complex<double>* out) const { forward_.execute_r2c(in, out); }
  // Destroys the contents of `in`.
  void backward(std::complex<double>* in, double* out) const { backward_.execute_c2r(in, out); }

 private:
  std::size_t n0_, n1_;
  Plan forward_, backward_;
};

// Batched real 1D transforms over the columns of a row-major rows x cols array.
class Columns1D {
 public:
  Columns1D(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
    auto re = allocate<double>(rows * cols);
    auto cx = allocate<std::complex<double>>((rows / 2 + 1) * cols);
    int n[] = {static_cast<int>(rows)};
    const int howmany = static_cast<int>(cols);
    const int stride = static_cast<int>(cols);
    std::lock_guard lock(planner_mutex());
    auto* c = reinterpret_cast<fftw_complex*>(cx.get());
    forward_ = Plan(fftw_plan_many_dft_r2c(1, n, howmany, re.get(), nullptr, stride, 1, c, nullptr, stride, 1,
                                           FFTW_ESTIMATE));
    backward_ = Plan(fftw_plan_many_dft_c2r(1, n, howmany, c, nullptr, stride, 1, re.get(), nullptr, stride, 1,
                                            FFTW_ESTIMATE));
  }
  std::size_t bins() const { return rows_ / 2 + 1; }
  void forward(double* in, std::complex<double>* out) const { forward_.execute_r2c(in, out); }
  void backward(std::complex<double>* in, double* out) const { backward_.execute_c2r(in, out); }

 private:
  std::size_t rows_, cols_;
  Plan forward_, backward_;
};

// Smallest m >= n whose prime factors are all <= 7.
inline std::size_t next_smooth(std::size_t n) {
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u, 7u})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

}  // namespace srcnpat::fft
