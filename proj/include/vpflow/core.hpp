#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vpflow {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Fixed-size Euclidean vector. Spatial vectors use Vec<D>, phase-space
/// points Vec<2 * D>, sphere points Vec<M + 1>.
template <int D>
using Vec = std::array<double, D>;

template <std::size_t D>
constexpr Vec<D> operator+(const Vec<D>& a, const Vec<D>& b) {
  Vec<D> r{};
  for (std::size_t k = 0; k < D; ++k) r[k] = a[k] + b[k];
  return r;
}

template <std::size_t D>
constexpr Vec<D> operator-(const Vec<D>& a, const Vec<D>& b) {
  Vec<D> r{};
  for (std::size_t k = 0; k < D; ++k) r[k] = a[k] - b[k];
  return r;
}

template <std::size_t D>
constexpr Vec<D> operator-(const Vec<D>& a) {
  Vec<D> r{};
  for (std::size_t k = 0; k < D; ++k) r[k] = -a[k];
  return r;
}

template <std::size_t D>
constexpr Vec<D> operator*(double s, const Vec<D>& a) {
  Vec<D> r{};
  for (std::size_t k = 0; k < D; ++k) r[k] = s * a[k];
  return r;
}

template <std::size_t D>
constexpr double dot(const Vec<D>& a, const Vec<D>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < D; ++k) s += a[k] * b[k];
  return s;
}

template <std::size_t D>
double norm(const Vec<D>& a) {
  return std::sqrt(dot(a, a));
}

/// Concatenates position and velocity into a phase-space point.
template <int D>
Vec<2 * D> phase_point(const Vec<D>& x, const Vec<D>& v) {
  Vec<2 * D> z{};
  for (int k = 0; k < D; ++k) {
    z[k] = x[k];
    z[D + k] = v[k];
  }
  return z;
}

template <std::size_t D>
bool all_finite(const Vec<D>& a) {
  for (double c : a)
    if (!std::isfinite(c)) return false;
  return true;
}

// Error hierarchy. Each maps to a distinct CLI exit code.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (dimension, kernel spec, masses).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data (negative densities, off-sphere points, mismatched ids).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Evaluation of a singular kernel at its singularity.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Non-finite state encountered while stepping.
class NumericalFault : public Error {
 public:
  using Error::Error;
};

/// Semi-Lagrangian advection left the velocity grid.
class GridRangeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// 64-bit FNV-1a; used for config hashes embedded in output files.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

/// Formats a double so that it round-trips exactly.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace vpflow
