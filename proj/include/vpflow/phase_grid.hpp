#pragma once

#include <cmath>
#include <vector>

#include "vpflow/core.hpp"

namespace vpflow {

/// Distribution function on a 1D x 1D phase lattice. x is periodic with Nx
/// nodes x_i = x0 + i dx; v has Nv nodes from -vmax to vmax inclusive.
/// Storage index is iv * Nx + ix.
struct PhaseGridFunction {
  int nx = 0;
  int nv = 0;
  double x0 = 0.0;
  double length = 1.0;
  double vmax = 1.0;
  double t = 0.0;
  std::vector<double> f;

  PhaseGridFunction() = default;
  PhaseGridFunction(int nx_, int nv_, double x0_, double length_, double vmax_)
      : nx(nx_), nv(nv_), x0(x0_), length(length_), vmax(vmax_) {
    if (nx < 4 || nv < 4) throw ConfigError("phase grid needs at least 4 nodes per axis");
    if (!(length > 0.0) || !(vmax > 0.0)) throw ConfigError("phase grid extents must be positive");
    f.assign(static_cast<std::size_t>(nx) * static_cast<std::size_t>(nv), 0.0);
  }

  double dx() const { return length / nx; }
  double dv() const { return 2.0 * vmax / (nv - 1); }
  double cell_area() const { return dx() * dv(); }
  double x(int ix) const { return x0 + ix * dx(); }
  double v(int iv) const { return -vmax + iv * dv(); }
  std::size_t index(int ix, int iv) const {
    return static_cast<std::size_t>(iv) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(ix);
  }
  double& at(int ix, int iv) { return f[index(ix, iv)]; }
  double at(int ix, int iv) const { return f[index(ix, iv)]; }

  bool same_lattice(const PhaseGridFunction& o) const {
    return nx == o.nx && nv == o.nv && x0 == o.x0 && length == o.length && vmax == o.vmax;
  }

  /// Trapezoid in v, periodic sum in x.
  double mass() const {
    double m = 0.0;
    for (int iv = 0; iv < nv; ++iv) {
      const double wv = (iv == 0 || iv == nv - 1) ? 0.5 : 1.0;
      for (int ix = 0; ix < nx; ++ix) m += wv * at(ix, iv);
    }
    return m * cell_area();
  }

  template <class F>
  static PhaseGridFunction sample(int nx, int nv, double x0, double length, double vmax, F&& f0) {
    PhaseGridFunction g(nx, nv, x0, length, vmax);
    for (int iv = 0; iv < nv; ++iv)
      for (int ix = 0; ix < nx; ++ix) g.at(ix, iv) = f0(g.x(ix), g.v(iv));
    return g;
  }
};

}  // namespace vpflow
