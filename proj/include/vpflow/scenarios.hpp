#pragma once

// Initial-data families, quasi-random particle sampling and truncation.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "vpflow/core.hpp"
#include "vpflow/grid.hpp"
#include "vpflow/kernels.hpp"
#include "vpflow/particles.hpp"

namespace vpflow {

enum class BackgroundKind { None, Uniform, Disc };

/// A registered initial-data family with its parameters and domain.
struct Scenario {
  std::string name;
  int dim = 1;
  int sigma = 1;
  std::map<std::string, double> params;
  BackgroundKind background = BackgroundKind::None;
  double x_lo = 0.0, x_hi = 1.0;  ///< spatial box per axis
  double v_lo = -1.0, v_hi = 1.0;  ///< velocity box per axis
  double sample_x_lo = 0.0, sample_x_hi = 1.0;  ///< spatial box holding supp f0
  bool periodic = false;
  int grid_cells = 64;
  std::size_t particles = 100000;
  double mollify_n = 8.0;

  double param(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end()) throw ConfigError("scenario '" + name + "' has no parameter '" + key + "'");
    return it->second;
  }

  /// Registered families: landau, two_stream, bump3d, bump2d.
  static Scenario named(const std::string& name, const std::map<std::string, double>& overrides = {}) {
    Scenario s;
    s.name = name;
    if (name == "landau") {
      s.dim = 1;
      s.sigma = 1;
      s.params = {{"alpha", 0.01}, {"k", 0.5}, {"n0", 1.0}, {"vth", 1.0}, {"vmax", 8.0}};
      s.background = BackgroundKind::Uniform;
      s.periodic = true;
      s.grid_cells = 128;
      s.mollify_n = 8.0;
    } else if (name == "two_stream") {
      s.dim = 1;
      s.sigma = 1;
      s.params = {{"alpha", 0.01}, {"k", 0.2}, {"n0", 1.0}, {"vth", 1.0}, {"v0", 2.4}, {"vmax", 10.0}};
      s.background = BackgroundKind::Uniform;
      s.periodic = true;
      s.grid_cells = 128;
      s.mollify_n = 2.0;
    } else if (name == "bump3d") {
      s.dim = 3;
      s.sigma = -1;
      s.params = {{"amplitude", 1.0}, {"rx", 1.0}, {"rv", 1.0}, {"box", 2.0}};
      s.grid_cells = 32;
      s.particles = 50000;
      s.mollify_n = 4.0;
    } else if (name == "bump2d") {
      s.dim = 2;
      s.sigma = 1;
      s.params = {{"amplitude", 1.0}, {"rx", 1.0}, {"rv", 1.0}, {"box", 2.0}, {"disc_radius", 1.5}};
      s.background = BackgroundKind::Disc;
      s.grid_cells = 64;
      s.particles = 50000;
      s.mollify_n = 8.0;
    } else {
      throw ConfigError("unknown scenario family '" + name + "'");
    }
    for (const auto& [k, v] : overrides) {
      if (k == "sigma") {
        s.sigma = static_cast<int>(v);
        continue;
      }
      if (!s.params.count(k)) throw ConfigError("scenario '" + name + "' has no parameter '" + k + "'");
      s.params[k] = v;
    }
    s.finalize_domain();
    return s;
  }

 private:
  void finalize_domain() {
    if (name == "landau" || name == "two_stream") {
      x_lo = 0.0;
      x_hi = 2.0 * kPi / param("k");
      v_lo = -param("vmax");
      v_hi = param("vmax");
      sample_x_lo = x_lo;
      sample_x_hi = x_hi;
    } else {
      x_lo = -param("box");
      x_hi = param("box");
      v_lo = -param("rv");
      v_hi = param("rv");
      sample_x_lo = -param("rx");
      sample_x_hi = param("rx");
      if (param("rx") > param("box")) throw ConfigError("bump radius exceeds the grid box");
    }
  }
};

template <int D>
using PhaseFunction = std::function<double(const Vec<D>& x, const Vec<D>& v)>;

namespace detail {

inline double maxwellian(double v, double vth) {
  return std::exp(-0.5 * v * v / (vth * vth)) / (std::sqrt(2.0 * kPi) * vth);
}

inline double compact_bump(double r2, double R) {
  const double q = 1.0 - r2 / (R * R);
  return q > 0.0 ? q * q : 0.0;
}

}  // namespace detail

/// Pointwise f0 of a scenario.
template <int D>
PhaseFunction<D> initial_density(const Scenario& s) {
  if (s.dim != D) throw ConfigError("scenario '" + s.name + "' is " + std::to_string(s.dim) + "-dimensional");
  if (s.name == "landau") {
    const double a = s.param("alpha"), k = s.param("k"), n0 = s.param("n0"), vth = s.param("vth");
    return [=](const Vec<D>& x, const Vec<D>& v) {
      return n0 * (1.0 + a * std::cos(k * x[0])) * detail::maxwellian(v[0], vth);
    };
  }
  if (s.name == "two_stream") {
    const double a = s.param("alpha"), k = s.param("k"), n0 = s.param("n0"), vth = s.param("vth"),
                 v0 = s.param("v0");
    return [=](const Vec<D>& x, const Vec<D>& v) {
      return n0 * (1.0 + a * std::cos(k * x[0])) * 0.5 *
             (detail::maxwellian(v[0] - v0, vth) + detail::maxwellian(v[0] + v0, vth));
    };
  }
  if (s.name == "bump3d" || s.name == "bump2d") {
    const double A = s.param("amplitude"), rx = s.param("rx"), rv = s.param("rv");
    return [=](const Vec<D>& x, const Vec<D>& v) {
      return A * detail::compact_bump(dot(x, x), rx) * detail::compact_bump(dot(v, v), rv);
    };
  }
  throw ConfigError("unknown scenario family '" + s.name + "'");
}

/// Analytic total mass of a family.
inline double analytic_mass(const Scenario& s) {
  if (s.name == "landau" || s.name == "two_stream") {
    const double L = s.x_hi - s.x_lo, vth = s.param("vth"), vmax = s.param("vmax");
    if (s.name == "landau") return s.param("n0") * L * std::erf(vmax / (std::sqrt(2.0) * vth));
    const double v0 = s.param("v0");
    const double c = std::sqrt(2.0) * vth;
    return s.param("n0") * L * 0.5 * (std::erf((vmax - v0) / c) + std::erf((vmax + v0) / c));
  }
  // int_{|y| < R} (1 - |y|^2 / R^2)^2 dy = |S^{d-1}| R^d * 8 / (d (d + 2) (d + 4)).
  const int d = s.dim;
  auto ball = [d](double R) { return unit_sphere_area(d) * std::pow(R, d) * 8.0 / (d * (d + 2.0) * (d + 4.0)); };
  return s.param("amplitude") * ball(s.param("rx")) * ball(s.param("rv"));
}

/// min{n, 1_{B_n}(x, v) f0(x, v)} with B_n the phase-space ball of radius n.
template <int D>
PhaseFunction<D> truncate_initial(PhaseFunction<D> f0, double n) {
  if (!(n >= 1.0)) throw ConfigError("truncation level must be >= 1");
  return [f0 = std::move(f0), n](const Vec<D>& x, const Vec<D>& v) {
    if (dot(x, x) + dot(v, v) >= n * n) return 0.0;
    return std::min(n, f0(x, v));
  };
}

/// Additive recurrence (generalized golden ratio) sequence in [0,1)^s with a
/// Cranley-Patterson shift drawn from `seed`.
class QuasiRandom {
 public:
  QuasiRandom(int dims, std::uint64_t seed) : alpha_(static_cast<std::size_t>(dims)), shift_(alpha_.size()) {
    double phi = 2.0;
    for (int i = 0; i < 64; ++i) phi = std::pow(1.0 + phi, 1.0 / (dims + 1));
    for (std::size_t j = 0; j < alpha_.size(); ++j) alpha_[j] = std::fmod(std::pow(1.0 / phi, static_cast<double>(j + 1)), 1.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& s : shift_) s = u(rng);
  }

  double coordinate(std::uint64_t n, std::size_t j) const {
    const double v = shift_[j] + static_cast<double>(n) * alpha_[j];
    return v - std::floor(v);
  }

 private:
  std::vector<double> alpha_, shift_;
};

/// Weighted particles from f0 over the scenario's sampling box: N quasi-random
/// points, weight f0 * box volume / N, points with f0 <= 1e-12 dropped.
/// Band indices use the seeded offset rule.
template <int D>
ParticleEnsemble<D> sample_particles(const Scenario& s, const PhaseFunction<D>& f0, std::size_t N,
                                     std::uint64_t seed) {
  if (N == 0) throw ConfigError("particle count must be positive");
  const double Lx = s.sample_x_hi - s.sample_x_lo, Lv = s.v_hi - s.v_lo;
  const double vol = std::pow(Lx * Lv, D);
  QuasiRandom q(2 * D, seed);
  ParticleEnsemble<D> ens;
  ens.reserve(N);
  for (std::size_t n = 0; n < N; ++n) {
    Vec<D> x{}, v{};
    for (int k = 0; k < D; ++k) {
      x[k] = s.sample_x_lo + Lx * q.coordinate(n + 1, static_cast<std::size_t>(k));
      v[k] = s.v_lo + Lv * q.coordinate(n + 1, static_cast<std::size_t>(D + k));
    }
    const double f = f0(x, v);
    if (!(f > 1e-12)) continue;
    ens.push_back(x, v, f * vol / static_cast<double>(N), f);
  }
  const auto bands = band_assign(ens.f0, seed);
  ens.band = bands.bands;
  ens.band_offset = bands.offset;
  ens.seed = seed;
  return ens;
}

/// Spatial field grid of the scenario.
template <int D>
GridSpec<D> scenario_grid(const Scenario& s, int cells = 0) {
  if (cells <= 0) cells = s.grid_cells;
  GridSpec<D> g;
  g.cells.fill(cells);
  g.periodic = s.periodic;
  g.origin.fill(s.x_lo);
  g.spacing = (s.x_hi - s.x_lo) / (s.periodic ? cells : cells - 1);
  return g;
}

/// Background density with total mass `mass` on the grid, or empty.
template <int D>
std::vector<double> scenario_background(const Scenario& s, const GridSpec<D>& g, double mass) {
  if (s.background == BackgroundKind::None) return {};
  std::vector<double> bg(g.size(), 0.0);
  if (s.background == BackgroundKind::Uniform) {
    double vol = g.cell_volume() * static_cast<double>(g.size());
    for (double& b : bg) b = mass / vol;
    return bg;
  }
  // Uniform disc: cell occupancy by a 4^D sub-lattice, then scaled to mass.
  const double R = s.param("disc_radius");
  double frac_sum = 0.0;
  const int sub = 4;
  int corners = 1;
  for (int k = 0; k < D; ++k) corners *= sub;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto c = g.node(g.unflat(i));
    int inside = 0;
    for (int m = 0; m < corners; ++m) {
      Vec<D> y = c;
      int rem = m;
      for (int k = 0; k < D; ++k) {
        y[k] += g.spacing * ((rem % sub + 0.5) / sub - 0.5);
        rem /= sub;
      }
      inside += dot(y, y) < R * R;
    }
    bg[i] = static_cast<double>(inside) / corners;
    frac_sum += bg[i];
  }
  if (frac_sum == 0.0) throw ConfigError("background disc does not intersect the grid");
  const double scale = mass / (frac_sum * g.cell_volume());
  for (double& b : bg) b *= scale;
  return bg;
}

template <int D>
struct InitialData {
  Scenario scenario;
  PhaseFunction<D> f0;
  GridSpec<D> grid;
  KernelSpec kernel;

  ParticleEnsemble<D> sample(std::size_t N, std::uint64_t seed) const {
    return sample_particles<D>(scenario, f0, N, seed);
  }
  std::vector<double> background(double mass) const { return scenario_background<D>(scenario, grid, mass); }
};

template <int D>
InitialData<D> build_initial(const Scenario& s, double mollify_n = 0.0, int grid_cells = 0) {
  InitialData<D> init;
  init.scenario = s;
  init.f0 = initial_density<D>(s);
  init.grid = scenario_grid<D>(s, grid_cells);
  init.kernel.dim = D;
  init.kernel.sigma = s.sigma;
  init.kernel.level = mollify_n > 0.0 ? mollify_n : s.mollify_n;
  init.kernel.validate();
  return init;
}

}  // namespace vpflow
