#pragma once

// Scalar monitors: energies, Casimirs, the weak-form renormalization
// residual, the flow-separation functional and series verdicts.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vpflow/core.hpp"
#include "vpflow/particles.hpp"
#include "vpflow/phase_grid.hpp"

namespace vpflow {

/// Sum of w |v|^2 over active particles.
template <int D>
double kinetic_energy(const ParticleEnsemble<D>& ens) {
  double k = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i)
    if (ens.active(i)) k += ens.w[i] * dot(ens.v[i], ens.v[i]);
  return k;
}

/// Phase-grid quadrature of int |v|^2 f.
inline double kinetic_energy(const PhaseGridFunction& g) {
  double k = 0.0;
  for (int iv = 0; iv < g.nv; ++iv) {
    const double wv = (iv == 0 || iv == g.nv - 1) ? 0.5 : 1.0;
    const double v2 = g.v(iv) * g.v(iv);
    for (int ix = 0; ix < g.nx; ++ix) k += wv * v2 * g.at(ix, iv);
  }
  return k * g.cell_area();
}

/// A registered Casimir density psi with its identifier.
struct Casimir {
  std::string id;
  std::function<double(double)> psi;
};

/// Registered ids: "s", "s2", "s_arctan_s", "s_above_c" (c = 1) and
/// "s_above_c:<c>".
inline Casimir casimir_by_id(const std::string& id) {
  if (id == "s") return {id, [](double s) { return s; }};
  if (id == "s2") return {id, [](double s) { return s * s; }};
  if (id == "s_arctan_s") return {id, [](double s) { return s * std::atan(s); }};
  if (id.rfind("s_above_c", 0) == 0) {
    double c = 1.0;
    if (id.size() > 9) {
      if (id[9] != ':') throw ConfigError("unregistered Casimir '" + id + "'");
      try {
        std::size_t used = 0;
        c = std::stod(id.substr(10), &used);
        if (used != id.size() - 10) throw std::invalid_argument(id);
      } catch (const std::exception&) {
        throw ConfigError("bad threshold in Casimir '" + id + "'");
      }
    }
    return {id, [c](double s) { return s > c ? s : 0.0; }};
  }
  throw ConfigError("unregistered Casimir '" + id + "'");
}

inline const std::vector<std::string>& default_casimir_ids() {
  static const std::vector<std::string> ids{"s", "s2", "s_arctan_s", "s_above_c"};
  return ids;
}

/// Sum over active particles of psi(f0) w / f0; f0 = 0 contributes nothing.
template <int D>
double casimir(const ParticleEnsemble<D>& ens, const Casimir& c) {
  double s = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i)
    if (ens.active(i) && ens.f0[i] > 0.0) s += c.psi(ens.f0[i]) * (ens.w[i] / ens.f0[i]);
  return s;
}

inline double casimir(const PhaseGridFunction& g, const Casimir& c) {
  double s = 0.0;
  for (int iv = 0; iv < g.nv; ++iv) {
    const double wv = (iv == 0 || iv == g.nv - 1) ? 0.5 : 1.0;
    for (int ix = 0; ix < g.nx; ++ix) s += wv * c.psi(g.at(ix, iv));
  }
  return s * g.cell_area();
}

template <class State>
double casimir(const State& s, const std::string& id) {
  return casimir(s, casimir_by_id(id));
}

// ---------------------------------------------------------------------------
// Renormalization residual

/// Bounded C^1 renormalizations.
struct Renormalizer {
  enum class Kind { Arctan, Rational, ClampedLinear };
  Kind kind = Kind::Arctan;
  double cap = 1.0;  ///< ClampedLinear: beta(s) = min(s, cap) smoothed over [cap/2, 3cap/2]

  double operator()(double s) const {
    switch (kind) {
      case Kind::Arctan: return std::atan(s);
      case Kind::Rational: return s / (1.0 + s * s);
      case Kind::ClampedLinear: {
        // Linear below cap/2, constant above 3cap/2, quadratic blend between.
        const double a = 0.5 * cap, b = 1.5 * cap;
        if (s <= a) return s;
        if (s >= b) return a + 0.5 * (b - a);
        const double u = s - a;
        return a + u - u * u / (2.0 * (b - a));
      }
    }
    return 0.0;
  }

  static Renormalizer by_id(const std::string& id) {
    if (id == "arctan") return {Kind::Arctan, 1.0};
    if (id == "rational") return {Kind::Rational, 1.0};
    if (id == "clamped") return {Kind::ClampedLinear, 1.0};
    throw ConfigError("unregistered renormalization '" + id + "'");
  }
};

/// phi(t, x, v) = tau(t) chi(x) eta(v), each factor (1 - s^2)^4 in a scaled
/// coordinate s. chi is periodized on the run's x period.
struct ProductBump {
  double t_center = 0.0, t_width = 1.0;
  double x_center = 0.0, x_width = 1.0;
  double v_center = 0.0, v_width = 1.0;

  static double b(double s) {
    const double q = 1.0 - s * s;
    return q > 0.0 ? q * q * q * q : 0.0;
  }
  static double db(double s) {
    const double q = 1.0 - s * s;
    return q > 0.0 ? -8.0 * s * q * q * q : 0.0;
  }
};

/// One Eulerian snapshot: f on the lattice and the field at the x nodes.
struct PhaseSnapshot {
  PhaseGridFunction f;
  std::vector<double> E;
};

struct ResidualReport {
  double residual = 0.0;  ///< |weak-form sum|
  double scale = 0.0;     ///< sum of the absolute values of its terms
};

/// Discrete weak form of d_t beta(f) + v d_x beta(f) + E d_v beta(f) = 0
/// tested against phi: int phi_0 beta(f_0) - int phi_T beta(f_T) +
/// int_0^T int (phi_t + v phi_x + E phi_v) beta(f). Phase integrals use the
/// lattice quadrature, time integrals the trapezoid rule over the snapshots
/// (uniform cadence required).
inline ResidualReport renorm_residual(std::span<const PhaseSnapshot> snaps, const Renormalizer& beta,
                                      const ProductBump& phi) {
  if (snaps.size() < 2) throw InputError("renorm_residual needs at least two snapshots");
  const auto& g0 = snaps.front().f;
  if (!(phi.x_width > 0.0 && phi.v_width > 0.0 && phi.t_width > 0.0))
    throw InputError("test function widths must be positive");
  if (2.0 * phi.x_width > g0.length) throw InputError("test function x-support exceeds the period");
  if (phi.v_center - phi.v_width < -g0.vmax || phi.v_center + phi.v_width > g0.vmax)
    throw InputError("test function v-support exceeds the velocity grid");
  const double dt = snaps[1].f.t - snaps[0].f.t;
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    if (!snaps[k].f.same_lattice(g0)) throw InputError("snapshots live on different lattices");
    if (snaps[k].E.size() != static_cast<std::size_t>(g0.nx)) throw InputError("field size mismatch");
    if (k > 0 && std::abs(snaps[k].f.t - snaps[k - 1].f.t - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
      throw InputError("snapshots are not at uniform cadence");
  }

  const int nx = g0.nx, nv = g0.nv;
  std::vector<double> chi(static_cast<std::size_t>(nx)), dchi(chi.size());
  for (int ix = 0; ix < nx; ++ix) {
    double d = g0.x(ix) - phi.x_center;
    d -= g0.length * std::round(d / g0.length);
    chi[static_cast<std::size_t>(ix)] = ProductBump::b(d / phi.x_width);
    dchi[static_cast<std::size_t>(ix)] = ProductBump::db(d / phi.x_width) / phi.x_width;
  }
  std::vector<double> eta(static_cast<std::size_t>(nv)), deta(eta.size());
  for (int iv = 0; iv < nv; ++iv) {
    const double s = (g0.v(iv) - phi.v_center) / phi.v_width;
    eta[static_cast<std::size_t>(iv)] = ProductBump::b(s);
    deta[static_cast<std::size_t>(iv)] = ProductBump::db(s) / phi.v_width;
  }
  const double area = g0.cell_area();

  auto tested = [&](const PhaseSnapshot& s, bool derivative) {
    const double st = (s.f.t - phi.t_center) / phi.t_width;
    const double tau = ProductBump::b(st), dtau = ProductBump::db(st) / phi.t_width;
    double sum = 0.0;
    for (int iv = 0; iv < nv; ++iv) {
      const auto jv = static_cast<std::size_t>(iv);
      const double v = s.f.v(iv);
      for (int ix = 0; ix < nx; ++ix) {
        const auto jx = static_cast<std::size_t>(ix);
        double w;
        if (derivative)
          w = dtau * chi[jx] * eta[jv] + tau * (v * dchi[jx] * eta[jv] + s.E[jx] * chi[jx] * deta[jv]);
        else
          w = tau * chi[jx] * eta[jv];
        if (w != 0.0) sum += w * beta(s.f.at(ix, iv));
      }
    }
    return sum * area;
  };

  std::vector<double> terms;
  terms.push_back(tested(snaps.front(), false));
  terms.push_back(-tested(snaps.back(), false));
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    const double wt = (k == 0 || k + 1 == snaps.size()) ? 0.5 * dt : dt;
    terms.push_back(wt * tested(snaps[k], true));
  }
  ResidualReport r;
  double total = 0.0;
  for (double t : terms) {
    total += t;
    r.scale += std::abs(t);
  }
  r.residual = std::abs(total);
  return r;
}

// ---------------------------------------------------------------------------
// Flow separation

/// Mass-normalized sum of w log(1 + |x_A - x_B| / (zeta delta) + |v_A - v_B| / delta)
/// over index-matched pairs active in both runs. `period` > 0 measures the
/// x difference with the minimum-image convention.
template <int D>
double separation_functional(const ParticleEnsemble<D>& a, const ParticleEnsemble<D>& b, double delta,
                             double zeta, double period = 0.0) {
  if (a.size() != b.size()) throw InputError("separation: ensembles have different sizes");
  if (!(delta > 0.0) || !(zeta > 0.0)) throw ConfigError("separation: delta and zeta must be positive");
  double num = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.w[i] != b.w[i] || a.f0[i] != b.f0[i])
      throw InputError("separation: particle identities differ at index " + std::to_string(i));
    if (!a.active(i) || !b.active(i)) continue;
    Vec<D> dx = a.x[i] - b.x[i];
    if (period > 0.0)
      for (auto& c : dx) c -= period * std::round(c / period);
    const Vec<D> dv = a.v[i] - b.v[i];
    num += a.w[i] * std::log1p(norm(dx) / (zeta * delta) + norm(dv) / delta);
    mass += a.w[i];
  }
  return mass > 0.0 ? num / mass : 0.0;
}

// ---------------------------------------------------------------------------
// Records and verdicts

struct DiagnosticsRecord {
  double t = 0.0;
  std::int64_t step = 0;
  double mass_total = 0.0;
  double mass_active = 0.0;
  std::map<int, double> mass_per_band;
  double kinetic = 0.0;
  double potential_H = 0.0;
  double potential_E2 = 0.0;
  double total_energy = 0.0;
  std::map<std::string, double> casimir_values;
  double noblowup_partial = 0.0;
  std::optional<double> phi_sep;
};

struct EnergyVerdicts {
  bool two_forms_ok = true;     ///< potential_H >= potential_E2 - tol everywhere
  bool energy_bound_ok = true;  ///< sigma = +1: total(t) <= total(0) (1 + budget)
  double max_rel_drift = 0.0;
  double final_rel_drift = 0.0;
  double worst_form_gap = 0.0;  ///< min of potential_H - potential_E2
};

inline EnergyVerdicts energy_report(std::span<const DiagnosticsRecord> series, int sigma,
                                    double drift_budget = 0.01, double form_tol = 0.0) {
  EnergyVerdicts v;
  if (series.empty()) return v;
  const double e0 = series.front().total_energy;
  const double scale = std::max(std::abs(e0), 1e-300);
  v.worst_form_gap = kInf;
  for (const auto& r : series) {
    const double drift = std::abs(r.total_energy - e0) / scale;
    v.max_rel_drift = std::max(v.max_rel_drift, drift);
    const double gap = r.potential_H - r.potential_E2;
    v.worst_form_gap = std::min(v.worst_form_gap, gap);
    if (gap < -form_tol) v.two_forms_ok = false;
    if (sigma == 1 && r.total_energy > e0 + drift_budget * std::abs(e0)) v.energy_bound_ok = false;
  }
  v.final_rel_drift = std::abs(series.back().total_energy - e0) / scale;
  return v;
}

}  // namespace vpflow
