#pragma once

// Zero-padded (free-space) discrete convolution on uniform lattices via
// FFTW real-to-complex transforms. Plans use FFTW_ESTIMATE so repeated runs
// execute identical arithmetic.

#include <fftw3.h>

#include <array>
#include <complex>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "vpflow/core.hpp"

namespace vpflow {

namespace detail {

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};

using FftwPlan = std::unique_ptr<fftw_plan_s, FftwPlanDeleter>;

}  // namespace detail

/// Linear convolution out[i] = sum_j kernel(i - j) in[j] for i, j in the
/// box [0, n)^D, evaluated on a (pad * n)^D torus. pad >= 2 rules out any
/// wrap-around image.
template <int D>
class FreeSpaceConvolver {
 public:
  using Index = std::array<int, D>;
  using KernelSample = std::function<double(const Index& displacement)>;

  FreeSpaceConvolver(const Index& n, int pad) : n_(n) {
    if (pad < 2) throw ConfigError("padding factor must be >= 2");
    real_size_ = 1;
    for (int k = 0; k < D; ++k) {
      if (n[k] < 1) throw ConfigError("convolution box must be non-empty");
      padded_[k] = pad * n[k];
      real_size_ *= static_cast<std::size_t>(padded_[k]);
    }
    complex_size_ = real_size_ / static_cast<std::size_t>(padded_[D - 1]) *
                    static_cast<std::size_t>(padded_[D - 1] / 2 + 1);
    real_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * real_size_)));
    spec_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * complex_size_)));
    forward_.reset(fftw_plan_dft_r2c(D, padded_.data(), real_.get(), spec_.get(), FFTW_ESTIMATE));
    backward_.reset(fftw_plan_dft_c2r(D, padded_.data(), spec_.get(), real_.get(), FFTW_ESTIMATE));
    if (!forward_ || !backward_) throw Error("FFTW plan creation failed");
  }

  FreeSpaceConvolver(const FreeSpaceConvolver&) = delete;
  FreeSpaceConvolver& operator=(const FreeSpaceConvolver&) = delete;

  const Index& box() const { return n_; }
  std::size_t box_size() const {
    std::size_t s = 1;
    for (int c : n_) s *= static_cast<std::size_t>(c);
    return s;
  }

  /// Transforms a kernel sampled on displacements in (-P/2, P/2); the
  /// displacement P/2 (never reached from inside the box) is set to zero.
  std::vector<std::complex<double>> transform_kernel(const KernelSample& sample) {
    for (std::size_t f = 0; f < real_size_; ++f) {
      Index m = padded_index(f);
      Index disp{};
      bool nyquist = false;
      for (int k = 0; k < D; ++k) {
        const int P = padded_[k];
        if (2 * m[k] == P) nyquist = true;
        disp[k] = 2 * m[k] < P ? m[k] : m[k] - P;
      }
      real_.get()[f] = nyquist ? 0.0 : sample(disp);
    }
    fftw_execute(forward_.get());
    std::vector<std::complex<double>> out(complex_size_);
    for (std::size_t i = 0; i < complex_size_; ++i) out[i] = {spec_.get()[i][0], spec_.get()[i][1]};
    return out;
  }

  /// Forward transform of box data (row-major, box_size() values).
  std::vector<std::complex<double>> transform_input(std::span<const double> in) {
    if (in.size() != box_size()) throw InputError("convolution input has wrong size");
    std::fill(real_.get(), real_.get() + real_size_, 0.0);
    for (std::size_t f = 0; f < in.size(); ++f) real_.get()[embed(f)] = in[f];
    fftw_execute(forward_.get());
    std::vector<std::complex<double>> out(complex_size_);
    for (std::size_t i = 0; i < complex_size_; ++i) out[i] = {spec_.get()[i][0], spec_.get()[i][1]};
    return out;
  }

  /// Inverse transform of input_hat * kernel_hat restricted to the box,
  /// multiplied by `scale`.
  void convolve_into(const std::vector<std::complex<double>>& input_hat,
                     const std::vector<std::complex<double>>& kernel_hat, double scale,
                     std::span<double> out) {
    for (std::size_t i = 0; i < complex_size_; ++i) {
      const std::complex<double> p = input_hat[i] * kernel_hat[i];
      spec_.get()[i][0] = p.real();
      spec_.get()[i][1] = p.imag();
    }
    fftw_execute(backward_.get());
    const double norm = scale / static_cast<double>(real_size_);
    for (std::size_t f = 0; f < out.size(); ++f) out[f] = real_.get()[embed(f)] * norm;
  }

 private:
  Index padded_index(std::size_t f) const {
    Index m{};
    for (int k = D - 1; k >= 0; --k) {
      m[k] = static_cast<int>(f % static_cast<std::size_t>(padded_[k]));
      f /= static_cast<std::size_t>(padded_[k]);
    }
    return m;
  }

  std::size_t embed(std::size_t box_flat) const {
    Index idx{};
    for (int k = D - 1; k >= 0; --k) {
      idx[k] = static_cast<int>(box_flat % static_cast<std::size_t>(n_[k]));
      box_flat /= static_cast<std::size_t>(n_[k]);
    }
    std::size_t f = 0;
    for (int k = 0; k < D; ++k)
      f = f * static_cast<std::size_t>(padded_[k]) + static_cast<std::size_t>(idx[k]);
    return f;
  }

  Index n_{};
  std::array<int, D> padded_{};
  std::size_t real_size_ = 0;
  std::size_t complex_size_ = 0;
  std::unique_ptr<double, detail::FftwDeleter> real_;
  std::unique_ptr<fftw_complex, detail::FftwDeleter> spec_;
  detail::FftwPlan forward_;
  detail::FftwPlan backward_;
};

}  // namespace vpflow
