#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace vpflow {

/// Piecewise cubic Hermite interpolant on a strictly increasing node set.
/// Slopes are supplied by the caller; `limit_monotone` applies the
/// Fritsch-Carlson limiter so monotone data yields a monotone interpolant.
class CubicHermite {
 public:
  CubicHermite() = default;

  CubicHermite(std::vector<double> nodes, std::vector<double> values,
               std::vector<double> slopes, bool limit_monotone = false)
      : x_(std::move(nodes)), y_(std::move(values)), d_(std::move(slopes)) {
    if (x_.size() < 2 || y_.size() != x_.size() || d_.size() != x_.size())
      throw std::invalid_argument("CubicHermite: need >= 2 matching nodes");
    for (std::size_t i = 1; i < x_.size(); ++i)
      if (!(x_[i] > x_[i - 1]))
        throw std::invalid_argument("CubicHermite: nodes not increasing");
    if (limit_monotone) apply_fritsch_carlson();
  }

  double front() const { return x_.front(); }
  double back() const { return x_.back(); }
  std::span<const double> nodes() const { return x_; }
  std::span<const double> values() const { return y_; }
  std::span<const double> slopes() const { return d_; }

  /// Index i with x_[i] <= x < x_[i+1], clamped to the valid segment range.
  std::size_t segment(double x) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    return std::min(i, x_.size() - 2);
  }

  double operator()(double x) const { return eval(x, segment(x)); }
  double derivative(double x) const { return eval_derivative(x, segment(x)); }

  double eval(double x, std::size_t i) const {
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    return h00 * y_[i] + h10 * h * d_[i] + h01 * y_[i + 1] + h11 * h * d_[i + 1];
  }

  double eval_derivative(double x, std::size_t i) const {
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t;
    const double d00 = (6 * t2 - 6 * t) / h;
    const double d10 = 3 * t2 - 4 * t + 1;
    const double d01 = (-6 * t2 + 6 * t) / h;
    const double d11 = 3 * t2 - 2 * t;
    return d00 * y_[i] + d10 * d_[i] + d01 * y_[i + 1] + d11 * d_[i + 1];
  }

 private:
  void apply_fritsch_carlson() {
    for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
      const double secant = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
      if (secant == 0.0) {
        d_[i] = d_[i + 1] = 0.0;
        continue;
      }
      const double a = d_[i] / secant;
      const double b = d_[i + 1] / secant;
      if (a < 0.0) d_[i] = 0.0;
      if (b < 0.0) d_[i + 1] = 0.0;
      const double s = a * a + b * b;
      if (s > 9.0) {
        const double tau = 3.0 / std::sqrt(s);
        d_[i] = tau * a * secant;
        d_[i + 1] = tau * b * secant;
      }
    }
  }

  std::vector<double> x_, y_, d_;
};

}  // namespace vpflow
