#pragma once

// Density deposition, the free-space field solve E = sigma K_n * (rho - rho_b),
// the two potential-energy functionals and the effective-mass ledger.

#include <boost/math/quadrature/gauss.hpp>

#include <complex>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "vpflow/core.hpp"
#include "vpflow/fft_convolution.hpp"
#include "vpflow/grid.hpp"
#include "vpflow/kernels.hpp"
#include "vpflow/particles.hpp"

namespace vpflow {

template <int D>
struct DepositResult {
  std::vector<double> rho;        ///< mass per cell volume
  double deposited_mass = 0.0;
  double out_of_bounds_mass = 0.0;
  std::size_t out_of_bounds = 0;
};

/// Cloud-in-cell deposition of the active particles, accumulated in particle
/// order. Particles outside a non-periodic grid are tallied, not deposited.
template <int D>
DepositResult<D> deposit(const ParticleEnsemble<D>& ens, const GridSpec<D>& grid) {
  DepositResult<D> out;
  out.rho.assign(grid.size(), 0.0);
  const double inv_vol = 1.0 / grid.cell_volume();
  for (std::size_t i = 0; i < ens.size(); ++i) {
    if (!ens.active(i)) continue;
    const auto st = cic_stencil<D>(grid, ens.x[i]);
    if (!st) {
      out.out_of_bounds_mass += ens.w[i];
      ++out.out_of_bounds;
      continue;
    }
    for (int c = 0; c < CicStencil<D>::kPoints; ++c)
      out.rho[st->index[c]] += ens.w[i] * st->weight[c] * inv_vol;
    out.deposited_mass += ens.w[i];
  }
  return out;
}

/// CIC gather of a vector field at x; zero outside a non-periodic grid.
template <int D>
Vec<D> gather(const GridSpec<D>& grid, std::span<const Vec<D>> field, const Vec<D>& x) {
  Vec<D> out{};
  const auto st = cic_stencil<D>(grid, x);
  if (!st) return out;
  for (int c = 0; c < CicStencil<D>::kPoints; ++c) {
    const Vec<D>& f = field[st->index[c]];
    for (int k = 0; k < D; ++k) out[k] += st->weight[c] * f[k];
  }
  return out;
}

template <int D>
struct FieldState {
  GridSpec<D> grid;
  KernelSpec spec;
  std::vector<double> rho;
  std::vector<double> background;  ///< empty when absent
  std::vector<Vec<D>> E;
  std::vector<double> V;           ///< empty unless requested
};

/// Solves E = sigma K_n * (rho - rho_b) on a grid by zero-padded FFT
/// convolution with the kernel sampled at lattice displacements.
///
/// Non-periodic grids give the whole-space field. A periodic 1D grid is
/// treated as a neutral slab repeated along the line: three periods are
/// convolved in free space, the middle one kept and its mean removed, which
/// is the zero-mean periodic field of the mollified kernel.
///
/// Background densities are accepted in d = 2 and on periodic 1D grids and
/// must carry the same mass as rho to 1e-8 relative.
template <int D>
class FieldSolver {
 public:
  FieldSolver(const GridSpec<D>& grid, const KernelSpec& spec, int pad = 2)
      : grid_(grid), spec_(spec), kernel_(spec) {
    spec_.validate();
    if (spec_.dim != D) throw ConfigError("kernel spec dimension does not match grid");
    if (grid_.periodic && D != 1) throw ConfigError("periodic field solves are 1D only");
    if (spec_.mollified() && spec_.level * grid_.spacing > 1.0 + 1e-12)
      throw ConfigError("mollification radius 1/n must be at least one grid spacing");
    std::array<int, D> box = grid_.cells;
    if (grid_.periodic) box[0] *= 3;
    conv_ = std::make_unique<FreeSpaceConvolver<D>>(box, pad);
    const double h = grid_.spacing;
    for (int c = 0; c < D; ++c) {
      kernel_hat_[c] = conv_->transform_kernel([&, c](const std::array<int, D>& disp) {
        Vec<D> r{};
        for (int k = 0; k < D; ++k) r[k] = disp[k] * h;
        return kernel_(r)[c];
      });
    }
  }

  const GridSpec<D>& grid() const { return grid_; }
  const KernelSpec& spec() const { return spec_; }

  std::vector<Vec<D>> solve(std::span<const double> rho, std::span<const double> background = {}) {
    const auto q_hat = conv_->transform_input(source(rho, background));
    const std::size_t n_box = conv_->box_size();
    std::vector<double> comp(n_box);
    std::vector<Vec<D>> E(grid_.size());
    const double vol = grid_.cell_volume();
    for (int c = 0; c < D; ++c) {
      conv_->convolve_into(q_hat, kernel_hat_[c], vol, comp);
      if (grid_.periodic) {
        const std::size_t n = grid_.size();
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += comp[n + i];
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) E[i][c] = comp[n + i] - mean;
      } else {
        for (std::size_t i = 0; i < n_box; ++i) E[i][c] = comp[i];
      }
    }
    return E;
  }

  /// V = H * (rho - rho_b) with H(0) replaced by its cell average (d >= 2).
  std::vector<double> potential(std::span<const double> rho, std::span<const double> background = {}) {
    if constexpr (D == 1) {
      throw ConfigError("potential is not defined for d = 1 (H does not decay)");
    } else {
      if (!potential_hat_) {
        const double h = grid_.spacing;
        const double h0 = fundamental_solution_cell_average(D, h);
        potential_hat_ = conv_->transform_kernel([&](const std::array<int, D>& disp) {
          Vec<D> r{};
          bool origin = true;
          for (int k = 0; k < D; ++k) {
            r[k] = disp[k] * h;
            origin = origin && disp[k] == 0;
          }
          return origin ? h0 : fundamental_solution<D>(r);
        });
      }
      const auto q_hat = conv_->transform_input(source(rho, background));
      std::vector<double> V(grid_.size());
      conv_->convolve_into(q_hat, *potential_hat_, grid_.cell_volume(), V);
      return V;
    }
  }

 private:
  std::vector<double> source(std::span<const double> rho, std::span<const double> background) const {
    const std::size_t n = grid_.size();
    if (rho.size() != n) throw InputError("density has wrong size for grid");
    std::vector<double> q(rho.begin(), rho.end());
    if (!background.empty()) {
      if (background.size() != n) throw InputError("background has wrong size for grid");
      if (!(D == 2 || grid_.periodic))
        throw ConfigError("background densities are supported in d = 2 and periodic 1D only");
      double mr = 0.0, mb = 0.0;
      for (std::size_t i = 0; i < n; ++i) mr += rho[i], mb += background[i];
      if (std::abs(mr - mb) > 1e-8 * std::max(std::abs(mr), std::abs(mb)))
        throw ConfigError("background mass does not match density mass");
      for (std::size_t i = 0; i < n; ++i) q[i] -= background[i];
    }
    for (double c : q)
      if (!std::isfinite(c)) throw NumericalFault("non-finite density");
    if (!grid_.periodic) return q;
    double mean = 0.0;
    for (double c : q) mean += c;
    mean /= static_cast<double>(n);
    std::vector<double> ext(3 * n);
    for (std::size_t i = 0; i < 3 * n; ++i) ext[i] = q[i % n] - mean;
    return ext;
  }

  GridSpec<D> grid_;
  KernelSpec spec_;
  KernelEvaluator kernel_;
  std::unique_ptr<FreeSpaceConvolver<D>> conv_;
  std::array<std::vector<std::complex<double>>, D> kernel_hat_;
  std::optional<std::vector<std::complex<double>>> potential_hat_;
};

struct PotentialForms {
  double potential_H = 0.0;   ///< int (H * rho) rho
  double potential_E2 = 0.0;  ///< int |grad H * rho|^2
};

namespace detail {

/// int over the exterior of an axis-aligned box of |c / |x - c0|^2|^2, i.e.
/// the solid-angle integral of 1 / R(Omega) from the centre c0.
inline double exterior_monopole_integral(const Vec<3>& lo, const Vec<3>& hi, const Vec<3>& c0) {
  using boost::math::quadrature::gauss;
  double total = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    const int a = (axis + 1) % 3, b = (axis + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      const double plane = side == 0 ? lo[axis] : hi[axis];
      const double dist = std::abs(plane - c0[axis]);
      total += gauss<double, 40>::integrate(
          [&](double ya) {
            return gauss<double, 40>::integrate(
                [&](double yb) {
                  const double da = ya - c0[a], db = yb - c0[b];
                  const double R2 = dist * dist + da * da + db * db;
                  return dist / (R2 * R2);
                },
                lo[b], hi[b]);
          },
          lo[a], hi[a]);
    }
  }
  return total;
}

}  // namespace detail

/// Grid quadratures of int (H * rho) rho and int |K * rho|^2 (field from the
/// spec's kernel, sign dropped). In d = 3 the field integral outside the grid
/// box is added from the monopole field about the centre of mass. In d = 2
/// both sums are restricted to the grid (finite only for neutral sources).
template <int D>
PotentialForms potential_two_forms(std::span<const double> rho, const GridSpec<D>& grid,
                                   const KernelSpec& spec, std::span<const double> background = {}) {
  if constexpr (D == 1) {
    throw ConfigError("potential_two_forms requires d >= 2");
  } else {
    if (grid.periodic) throw ConfigError("potential_two_forms requires a free-space grid");
    for (double r : rho)
      if (r < 0.0) throw InputError("potential_two_forms requires a nonnegative density");
    FieldSolver<D> solver(grid, spec);
    const auto V = solver.potential(rho, background);
    const auto E = solver.solve(rho, background);
    const double vol = grid.cell_volume();
    PotentialForms out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double q = background.empty() ? rho[i] : rho[i] - background[i];
      out.potential_H += V[i] * q * vol;
      out.potential_E2 += dot(E[i], E[i]) * vol;
    }
    if constexpr (D == 3) {
      if (background.empty()) {
        double mass = 0.0;
        Vec<3> com{};
        for (std::size_t i = 0; i < grid.size(); ++i) {
          const auto x = grid.node(grid.unflat(i));
          mass += rho[i] * vol;
          for (int k = 0; k < 3; ++k) com[k] += rho[i] * vol * x[k];
        }
        if (mass > 0.0) {
          for (auto& c : com) c /= mass;
          Vec<3> lo{}, hi{};
          for (int k = 0; k < 3; ++k) {
            lo[k] = grid.origin[k] - 0.5 * grid.spacing;
            hi[k] = lo[k] + grid.length(k);
          }
          const double c3 = dimensional_constant(3) * mass;
          out.potential_E2 += c3 * c3 * detail::exterior_monopole_integral(lo, hi, com);
        }
      }
    }
    return out;
  }
}

/// Where the initial mass currently sits. `escaped_v` holds particles with
/// |v| > R_v inside the spatial ball: mass that still generates a field in
/// the effective density but has left every velocity-compact set.
struct EffectiveMassLedger {
  double total_initial_mass = 0.0;
  double active_mass = 0.0;
  double escaped_v_mass = 0.0;
  double escaped_x_mass = 0.0;

  double bucket_sum() const { return active_mass + escaped_v_mass + escaped_x_mass; }

  bool consistent(double rel_tol = 1e-12) const {
    const double scale = std::max(total_initial_mass, 1e-300);
    return std::abs(bucket_sum() - total_initial_mass) <= rel_tol * scale &&
           active_mass + escaped_v_mass <= total_initial_mass * (1.0 + rel_tol);
  }
};

template <int D>
EffectiveMassLedger ledger_update(const ParticleEnsemble<D>& ens, double radius_x, double radius_v) {
  if (!(radius_x > 0.0) || !(radius_v > 0.0)) throw ConfigError("ledger cutoffs must be positive");
  EffectiveMassLedger L;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    L.total_initial_mass += ens.w[i];
    if (norm(ens.x[i]) > radius_x) L.escaped_x_mass += ens.w[i];
    else if (norm(ens.v[i]) > radius_v) L.escaped_v_mass += ens.w[i];
    else L.active_mass += ens.w[i];
  }
  return L;
}

}  // namespace vpflow
