#pragma once

// 1D-1V semi-Lagrangian reference solver on a periodic-in-x phase lattice.
// The field solve is a direct periodic convolution, kept separate from the
// FFT path used by the particle code.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "vpflow/core.hpp"
#include "vpflow/kernels.hpp"
#include "vpflow/particles.hpp"
#include "vpflow/phase_grid.hpp"

namespace vpflow {

namespace detail {

/// Four-point Lagrange weights for nodes -1, 0, 1, 2 at offset theta in [0, 1).
inline std::array<double, 4> cubic_lagrange(double th) {
  return {-th * (th - 1.0) * (th - 2.0) / 6.0, (th + 1.0) * (th - 1.0) * (th - 2.0) / 2.0,
          -(th + 1.0) * th * (th - 2.0) / 2.0, (th + 1.0) * th * (th - 1.0) / 6.0};
}

inline int wrap_index(long long i, int n) {
  long long r = i % n;
  return static_cast<int>(r < 0 ? r + n : r);
}

}  // namespace detail

/// Trapezoid-in-v density at each x node.
inline std::vector<double> marginal_density(const PhaseGridFunction& g) {
  std::vector<double> rho(static_cast<std::size_t>(g.nx), 0.0);
  const double dv = g.dv();
  for (int iv = 0; iv < g.nv; ++iv) {
    const double wv = (iv == 0 || iv == g.nv - 1) ? 0.5 * dv : dv;
    for (int ix = 0; ix < g.nx; ++ix) rho[static_cast<std::size_t>(ix)] += wv * g.at(ix, iv);
  }
  return rho;
}

/// E = sigma K_n * (rho - rho_b) on the periodic x nodes with rho_b the mean
/// of rho. The source is smoothed by direct convolution with psi_n sampled on
/// the lattice, then E' = sigma q is integrated with the four-point cubic
/// rule and the mean of E removed.
class EulerianField {
 public:
  explicit EulerianField(const KernelSpec& spec) : spec_(spec) {
    spec_.validate();
    if (spec_.dim != 1) throw ConfigError("the phase-space solver is 1D-1V");
  }

  /// E = 0 everywhere (free streaming).
  static EulerianField free_streaming() {
    KernelSpec s;
    s.dim = 1;
    EulerianField f(s);
    f.zero_ = true;
    return f;
  }

  const KernelSpec& spec() const { return spec_; }

  std::vector<double> solve(const std::vector<double>& rho, double dx) const {
    if (zero_) return std::vector<double>(rho.size(), 0.0);
    const int n = static_cast<int>(rho.size());
    double mean = 0.0;
    for (double r : rho) mean += r;
    mean /= n;
    std::vector<double> q(rho.size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = rho[i] - mean;

    if (spec_.mollified()) {
      std::vector<double> taps;
      const int half = static_cast<int>(std::floor(1.0 / (spec_.level * dx)));
      double norm_sum = 0.0;
      for (int m = -half; m <= half; ++m) {
        taps.push_back(mollifier<1>(spec_.level, Vec<1>{m * dx}));
        norm_sum += taps.back();
      }
      std::vector<double> s(q.size(), 0.0);
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int m = -half; m <= half; ++m)
          acc += taps[static_cast<std::size_t>(m + half)] * q[static_cast<std::size_t>(detail::wrap_index(i - m, n))];
        s[static_cast<std::size_t>(i)] = acc / norm_sum;
      }
      q = std::move(s);
    }

    std::vector<double> E(rho.size(), 0.0);
    auto at = [&](int i) { return q[static_cast<std::size_t>(detail::wrap_index(i, n))]; };
    for (int i = 0; i + 1 < n; ++i)
      E[static_cast<std::size_t>(i + 1)] =
          E[static_cast<std::size_t>(i)] + spec_.sigma * dx * (-at(i - 1) + 13.0 * at(i) + 13.0 * at(i + 1) - at(i + 2)) / 24.0;
    double emean = 0.0;
    for (double e : E) emean += e;
    emean /= n;
    for (double& e : E) e -= emean;
    return E;
  }

  std::vector<double> solve(const PhaseGridFunction& g) const { return solve(marginal_density(g), g.dx()); }

 private:
  KernelSpec spec_;
  bool zero_ = false;
};

struct SlStepStats {
  double clamped_mass = 0.0;   ///< negative mass removed by clamping
  double renorm_factor = 1.0;  ///< rescale restoring the pre-clamp mass
  std::vector<double> E;       ///< field used for the v-advection
};

/// Relative level above which mass in the outer two v rows is an error.
inline constexpr double kVelocityBoundaryTolerance = 1e-10;

namespace detail {

inline void advect_x(PhaseGridFunction& g, double dt, std::vector<double>& row) {
  const double dx = g.dx();
  for (int iv = 0; iv < g.nv; ++iv) {
    const double s = -g.v(iv) * dt / dx;
    const double fl = std::floor(s);
    const auto w = cubic_lagrange(s - fl);
    const long long base = static_cast<long long>(fl);
    for (int ix = 0; ix < g.nx; ++ix) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += w[static_cast<std::size_t>(k)] * g.at(wrap_index(ix + base + k - 1, g.nx), iv);
      row[static_cast<std::size_t>(ix)] = acc;
    }
    for (int ix = 0; ix < g.nx; ++ix) g.at(ix, iv) = row[static_cast<std::size_t>(ix)];
  }
}

inline void advect_v(PhaseGridFunction& g, const std::vector<double>& E, double dt, std::vector<double>& col) {
  const double dv = g.dv();
  for (int ix = 0; ix < g.nx; ++ix) {
    const double s = -E[static_cast<std::size_t>(ix)] * dt / dv;
    const double fl = std::floor(s);
    const auto w = cubic_lagrange(s - fl);
    const long long base = static_cast<long long>(fl);
    for (int iv = 0; iv < g.nv; ++iv) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) {
        const long long j = iv + base + k - 1;
        if (j >= 0 && j < g.nv) acc += w[static_cast<std::size_t>(k)] * g.at(ix, static_cast<int>(j));
      }
      col[static_cast<std::size_t>(iv)] = acc;
    }
    for (int iv = 0; iv < g.nv; ++iv) g.at(ix, iv) = col[static_cast<std::size_t>(iv)];
  }
}

inline void check_velocity_band(const PhaseGridFunction& g) {
  double fmax = 0.0, edge = 0.0;
  for (double v : g.f) fmax = std::max(fmax, std::abs(v));
  for (int iv : {0, 1, g.nv - 2, g.nv - 1})
    for (int ix = 0; ix < g.nx; ++ix) edge = std::max(edge, std::abs(g.at(ix, iv)));
  if (edge > kVelocityBoundaryTolerance * fmax)
    throw GridRangeError("distribution reaches the velocity boundary; enlarge vmax");
}

}  // namespace detail

/// One Strang step: half x-shift, field solve, full v-shift, half x-shift,
/// then clamping of negatives and a mass-restoring rescale.
inline SlStepStats sl_step(PhaseGridFunction& g, const EulerianField& field, double dt) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  const double m0 = g.mass();
  std::vector<double> row(static_cast<std::size_t>(g.nx)), col(static_cast<std::size_t>(g.nv));
  SlStepStats st;
  detail::advect_x(g, 0.5 * dt, row);
  st.E = field.solve(g);
  detail::advect_v(g, st.E, dt, col);
  detail::advect_x(g, 0.5 * dt, row);
  for (double& v : g.f) {
    if (!std::isfinite(v)) throw NumericalFault("non-finite phase-grid value");
    if (v < 0.0) {
      st.clamped_mass -= v * g.cell_area();
      v = 0.0;
    }
  }
  detail::check_velocity_band(g);
  const double m1 = g.mass();
  if (m1 > 0.0) {
    st.renorm_factor = m0 / m1;
    for (double& v : g.f) v *= st.renorm_factor;
  }
  g.t += dt;
  return st;
}

/// Phase-lattice initialization from a pointwise f0(x, v).
template <class F>
PhaseGridFunction sample_phase_grid(int nx, int nv, double x0, double length, double vmax, F&& f0) {
  return PhaseGridFunction::sample(nx, nv, x0, length, vmax, std::forward<F>(f0));
}

/// 2D cloud-in-cell deposit of active 1D particles onto the lattice (x
/// periodic, v node-centred); mass outside the v range is returned apart.
struct PhaseDeposit {
  PhaseGridFunction f;
  double outside_mass = 0.0;
};

inline PhaseDeposit deposit_phase(const ParticleEnsemble<1>& ens, const PhaseGridFunction& lattice) {
  PhaseDeposit out;
  out.f = PhaseGridFunction(lattice.nx, lattice.nv, lattice.x0, lattice.length, lattice.vmax);
  out.f.t = ens.t;
  const double dx = lattice.dx(), dv = lattice.dv();
  const double inv_area = 1.0 / (dx * dv);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    if (!ens.active(i)) continue;
    const double sx = (ens.x[i][0] - lattice.x0) / dx;
    const double sv = (ens.v[i][0] + lattice.vmax) / dv;
    if (!(sv >= 0.0) || sv > lattice.nv - 1) {
      out.outside_mass += ens.w[i];
      continue;
    }
    const double fx = std::floor(sx);
    const double tx = sx - fx;
    const int ix = detail::wrap_index(static_cast<long long>(fx), lattice.nx);
    const int ix1 = detail::wrap_index(ix + 1, lattice.nx);
    int iv = static_cast<int>(std::floor(sv));
    if (iv >= lattice.nv - 1) iv = lattice.nv - 2;
    const double tv = sv - iv;
    const double m = ens.w[i] * inv_area;
    out.f.at(ix, iv) += m * (1.0 - tx) * (1.0 - tv);
    out.f.at(ix1, iv) += m * tx * (1.0 - tv);
    out.f.at(ix, iv + 1) += m * (1.0 - tx) * tv;
    out.f.at(ix1, iv + 1) += m * tx * tv;
  }
  return out;
}

/// L1 phase-space distance between deposited particles and the grid
/// solution; deposited mass beyond the v range counts in full.
inline double cross_validate(const ParticleEnsemble<1>& ens, const PhaseGridFunction& g) {
  for (std::size_t i = 0; i < ens.size(); ++i)
    if (ens.active(i) && (ens.x[i][0] < g.x0 || ens.x[i][0] >= g.x0 + g.length))
      throw InputError("cross_validate: particles lie outside the lattice period");
  const auto dep = deposit_phase(ens, g);
  double d = 0.0;
  for (std::size_t k = 0; k < g.f.size(); ++k) d += std::abs(dep.f.f[k] - g.f[k]);
  return d * g.cell_area() + dep.outside_mass;
}

inline double cross_validate(const ParticleEnsemble<1>& ens, const KernelSpec& particle_spec,
                             const PhaseGridFunction& g, const KernelSpec& grid_spec) {
  if (!(particle_spec == grid_spec))
    throw ConfigError("cross_validate: kernel specs differ (" + particle_spec.to_string() + " vs " +
                      grid_spec.to_string() + ")");
  return cross_validate(ens, g);
}

}  // namespace vpflow
