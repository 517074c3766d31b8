#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "vpflow/core.hpp"

namespace vpflow {

enum class ParticleStatus : std::uint8_t {
  Active = 0,
  Escaped = 1,   ///< left the escape ball going forward; t_plus recorded
  PreBirth = 2,  ///< left the escape ball going backward; t_minus recorded
};

/// Weighted phase-space points. Weights, carried f0 values and band indices
/// are fixed at sampling time; only x, v, status and the exit times evolve.
template <int D>
struct ParticleEnsemble {
  std::vector<Vec<D>> x;
  std::vector<Vec<D>> v;
  std::vector<double> w;
  std::vector<double> f0;
  std::vector<int> band;
  std::vector<ParticleStatus> status;
  std::vector<double> t_plus;   ///< NaN until escape
  std::vector<double> t_minus;  ///< NaN until pre-birth exit
  double t = 0.0;
  std::int64_t step = 0;
  double band_offset = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return w.size(); }

  bool active(std::size_t i) const { return status[i] == ParticleStatus::Active; }

  void reserve(std::size_t n) {
    x.reserve(n), v.reserve(n), w.reserve(n), f0.reserve(n), band.reserve(n);
    status.reserve(n), t_plus.reserve(n), t_minus.reserve(n);
  }

  void push_back(const Vec<D>& xi, const Vec<D>& vi, double wi, double f0i, int bi = 0) {
    x.push_back(xi);
    v.push_back(vi);
    w.push_back(wi);
    f0.push_back(f0i);
    band.push_back(bi);
    status.push_back(ParticleStatus::Active);
    t_plus.push_back(std::nan(""));
    t_minus.push_back(std::nan(""));
  }

  /// Sum of all weights, escaped or not, in index order.
  double total_mass() const {
    double m = 0.0;
    for (double wi : w) m += wi;
    return m;
  }

  double active_mass() const {
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
      if (active(i)) m += w[i];
    return m;
  }

  std::map<int, double> band_masses() const {
    std::map<int, double> m;
    for (std::size_t i = 0; i < size(); ++i) m[band[i]] += w[i];
    return m;
  }
};

/// Bitwise equality of two ensembles (NaN exit times compare equal).
template <int D>
bool bitwise_equal(const ParticleEnsemble<D>& a, const ParticleEnsemble<D>& b) {
  auto same = [](const auto& u, const auto& v) {
    return u.size() == v.size() &&
           (u.empty() || std::memcmp(u.data(), v.data(), u.size() * sizeof(u[0])) == 0);
  };
  return same(a.x, b.x) && same(a.v, b.v) && same(a.w, b.w) && same(a.f0, b.f0) &&
         same(a.band, b.band) && same(a.status, b.status) && same(a.t_plus, b.t_plus) &&
         same(a.t_minus, b.t_minus) && std::memcmp(&a.t, &b.t, sizeof a.t) == 0 &&
         a.step == b.step && a.band_offset == b.band_offset && a.seed == b.seed;
}

struct BandAssignment {
  std::vector<int> bands;
  double offset = 0.0;  ///< R; band = max(0, floor(value - R))
};

/// Level-set bands k <= f0 - R < k + 1. R = 0 unless some value is an exact
/// integer, in which case R is drawn from (0, 1) with `seed` and redrawn
/// until no value sits on a band boundary.
inline BandAssignment band_assign(std::span<const double> values, std::uint64_t seed = 0) {
  for (double v : values)
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("band_assign: negative or non-finite f0 value");

  auto on_boundary = [&](double R) {
    for (double v : values) {
      const double s = v - R;
      if (s > 0.0 && s == std::floor(s)) return true;
    }
    return false;
  };

  BandAssignment out;
  bool needs_shift = false;
  for (double v : values)
    if (v > 0.0 && v == std::floor(v)) needs_shift = true;
  if (needs_shift) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    do {
      out.offset = u(rng);
    } while (out.offset == 0.0 || on_boundary(out.offset));
  }
  out.bands.reserve(values.size());
  for (double v : values) {
    const double s = std::floor(v - out.offset);
    out.bands.push_back(s < 0.0 ? 0 : static_cast<int>(s));
  }
  return out;
}

}  // namespace vpflow
