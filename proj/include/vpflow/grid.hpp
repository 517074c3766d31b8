#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>

#include "vpflow/core.hpp"

namespace vpflow {

/// Uniform node-centred lattice: node i sits at origin + i h and stands for
/// the cell of volume h^D around it. Flat storage is row-major (last axis
/// fastest). A periodic grid wraps node `cells` back onto node 0.
template <int D>
struct GridSpec {
  Vec<D> origin{};
  double spacing = 1.0;
  std::array<int, D> cells{};
  bool periodic = false;

  std::size_t size() const {
    std::size_t n = 1;
    for (int c : cells) n *= static_cast<std::size_t>(c);
    return n;
  }

  double cell_volume() const { return std::pow(spacing, D); }
  double length(int axis) const { return spacing * cells[static_cast<std::size_t>(axis)]; }

  std::size_t flat(const std::array<int, D>& idx) const {
    std::size_t f = 0;
    for (int k = 0; k < D; ++k)
      f = f * static_cast<std::size_t>(cells[k]) + static_cast<std::size_t>(idx[k]);
    return f;
  }

  std::array<int, D> unflat(std::size_t f) const {
    std::array<int, D> idx{};
    for (int k = D - 1; k >= 0; --k) {
      idx[k] = static_cast<int>(f % static_cast<std::size_t>(cells[k]));
      f /= static_cast<std::size_t>(cells[k]);
    }
    return idx;
  }

  Vec<D> node(const std::array<int, D>& idx) const {
    Vec<D> x{};
    for (int k = 0; k < D; ++k) x[k] = origin[k] + spacing * idx[k];
    return x;
  }

  /// Maps x into [origin, origin + L) along periodic axes.
  void wrap(Vec<D>& x) const {
    if (!periodic) return;
    for (int k = 0; k < D; ++k) {
      const double L = length(k);
      double s = std::fmod(x[k] - origin[k], L);
      if (s < 0.0) s += L;
      if (s >= L) s = 0.0;
      x[k] = origin[k] + s;
    }
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Multilinear (cloud-in-cell) weights of one point.
template <int D>
struct CicStencil {
  static constexpr int kPoints = 1 << D;
  std::array<std::size_t, kPoints> index{};
  std::array<double, kPoints> weight{};
};

/// Stencil of x, or nullopt when x lies outside a non-periodic grid.
template <int D>
std::optional<CicStencil<D>> cic_stencil(const GridSpec<D>& g, const Vec<D>& x) {
  std::array<int, D> base{};
  std::array<int, D> next{};
  Vec<D> frac{};
  for (int k = 0; k < D; ++k) {
    const double s = (x[k] - g.origin[k]) / g.spacing;
    const int n = g.cells[k];
    if (g.periodic) {
      double fl = std::floor(s);
      double fr = s - fl;
      long long i = static_cast<long long>(fl) % n;
      if (i < 0) i += n;
      base[k] = static_cast<int>(i);
      next[k] = static_cast<int>((i + 1) % n);
      frac[k] = fr;
    } else {
      if (!(s >= 0.0) || s > n - 1) return std::nullopt;
      int i = static_cast<int>(std::floor(s));
      if (i >= n - 1) i = n - 2;
      base[k] = i;
      next[k] = i + 1;
      frac[k] = s - i;
    }
  }
  CicStencil<D> st;
  for (int corner = 0; corner < CicStencil<D>::kPoints; ++corner) {
    std::array<int, D> idx{};
    double w = 1.0;
    for (int k = 0; k < D; ++k) {
      const bool hi = (corner >> (D - 1 - k)) & 1;
      idx[k] = hi ? next[k] : base[k];
      w *= hi ? frac[k] : 1.0 - frac[k];
    }
    st.index[static_cast<std::size_t>(corner)] = g.flat(idx);
    st.weight[static_cast<std::size_t>(corner)] = w;
  }
  return st;
}

}  // namespace vpflow
