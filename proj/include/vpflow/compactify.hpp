#pragma once

// Damped radial diffeomorphism psi: R^m -> S^m \ {N} with prescribed decay of
// its gradient, the pushed-forward field c = grad psi(phi(y)) b(phi(y)), a
// projected RK4 integrator on the sphere, and the no-blow-up certificate.

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "vpflow/core.hpp"
#include "vpflow/interpolation.hpp"
#include "vpflow/particles.hpp"

namespace vpflow {

/// Nonincreasing D: [0, inf) -> (0, 1]. `breakpoints` lists the radii where
/// D may jump, so quadratures can split there.
struct DampingProfile {
  std::function<double(double)> D;
  std::vector<double> breakpoints;
  std::string name;

  double operator()(double r) const { return D(r); }

  static DampingProfile constant(double value) {
    return {[value](double) { return value; }, {}, "constant(" + format_double(value) + ")"};
  }

  /// D(r) = value * (1 + r / scale)^(-power).
  static DampingProfile power_law(double value, double power, double scale = 1.0) {
    return {[=](double r) { return value * std::pow(1.0 + r / scale, -power); },
            {},
            "power_law(" + format_double(value) + "," + format_double(power) + "," + format_double(scale) + ")"};
  }

  /// D = 1 on [0, 1) and (2^n C_n)^(-1) on [2^(n-1), 2^n), where
  /// C_n = 1 + int_0^T int_{B_(2^n)} |b| rho. The last C_n is reused beyond
  /// the supplied range.
  static DampingProfile from_flux_integrals(std::vector<double> C) {
    if (C.empty()) throw InputError("flux integrals must be non-empty");
    for (std::size_t i = 0; i < C.size(); ++i) {
      if (!(C[i] >= 1.0)) throw InputError("flux integrals C_n must be >= 1");
      if (i > 0 && C[i] < C[i - 1]) throw InputError("flux integrals C_n must be nondecreasing");
    }
    auto D = [C](double r) {
      if (r < 1.0) return 1.0;
      const int n = static_cast<int>(std::floor(std::log2(r))) + 1;
      const double Cn = C[std::min<std::size_t>(static_cast<std::size_t>(n - 1), C.size() - 1)];
      return 1.0 / (std::ldexp(1.0, n) * Cn);
    };
    std::vector<double> bp;
    for (int n = 0; n < 200; ++n) bp.push_back(std::ldexp(1.0, n));
    return {D, bp, "flux_integrals(" + std::to_string(C.size()) + ")"};
  }

  static DampingProfile user(std::function<double(double)> f, std::vector<double> breakpoints = {},
                             std::string name = "user") {
    return {std::move(f), std::move(breakpoints), std::move(name)};
  }

  /// Samples D on a log grid (plus both sides of each breakpoint) and
  /// rejects values outside (0, 1] or increases.
  void validate(double r_max = 1e12) const {
    std::vector<double> r{0.0};
    for (double s = 1e-6; s <= r_max; s *= 1.05) r.push_back(s);
    for (double b : breakpoints)
      if (b <= r_max) r.push_back(std::nextafter(b, 0.0)), r.push_back(b);
    std::sort(r.begin(), r.end());
    double prev = 1.0;
    for (double s : r) {
      const double v = D(s);
      if (!(v > 0.0 && v <= 1.0)) throw InputError("damping profile must take values in (0, 1] (" + name + ")");
      if (v > prev * (1.0 + 1e-15)) throw InputError("damping profile must be nonincreasing (" + name + ")");
      prev = v;
    }
  }
};

/// psi(x) = sin(psi0(|x|)) (x/|x|, 0) - cos(psi0(|x|)) e_(m+1).
///
/// psi0 = c0 * int_0^r psi1 with psi1 a one-sided average of
/// D1 = D0(0) on [0, 1 + pi/D0(0)], min(D0, r^-2) beyond, and
/// D0 = min(1/4, r^-2) D. On [0, pi/D0(0)) psi0 is the exact line
/// c0 D0(0) r; beyond it the complement g = pi - psi0 is tabulated (so that
/// angles near the north pole keep full relative precision) and extended by
/// a 1/r tail past the last node.
class DampedDiffeomorphism {
 public:
  explicit DampedDiffeomorphism(DampingProfile profile, double geometric_ratio = 1.01)
      : profile_(std::move(profile)) {
    profile_.validate();
    a_ = D0(0.0);
    r_lin_ = kPi / a_;
    r_max_ = 1e3 * r_lin_;
    build(geometric_ratio);
  }

  const DampingProfile& profile() const { return profile_; }
  double c0() const { return c0_; }
  double D0(double r) const { return std::min(0.25, r > 0.0 ? 1.0 / (r * r) : 0.25) * profile_(r); }
  double D1(double r) const {
    if (r <= 1.0 + r_lin_) return a_;
    return std::min(D0(r), 1.0 / (r * r));
  }
  double linear_radius() const { return r_lin_; }
  double r0() const { return 2.0 * kPi / a_; }
  double r_max() const { return r_max_; }
  const CubicHermite& table() const { return g_; }

  /// One-sided mollification psi1(r) = int_0^1 s(t) D1(r + t) dt with the
  /// bump s(t) = 140 t^3 (1 - t)^3.
  double psi1(double r) const {
    using boost::math::quadrature::gauss;
    if (r + 1.0 <= 1.0 + r_lin_) return a_;
    std::vector<double> cuts{0.0};
    auto add_cut = [&](double b) {
      const double t = b - r;
      if (t > 0.0 && t < 1.0) cuts.push_back(t);
    };
    add_cut(1.0 + r_lin_);
    for (double b : profile_.breakpoints) add_cut(b);
    cuts.push_back(1.0);
    std::sort(cuts.begin(), cuts.end());
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      // Sample strictly inside each piece so half-open jumps resolve correctly.
      s += gauss<double, 20>::integrate(
          [&](double t) {
            const double q = t * (1.0 - t);
            return 140.0 * q * q * q * D1(r + t);
          },
          cuts[i], cuts[i + 1]);
    }
    return s;
  }

  /// pi - psi0(r), accurate near the north pole.
  double complement(double r) const {
    if (r < r_lin_) return kPi - c0_ * a_ * r;
    if (r <= r_max_) return g_(r);
    return g_max_ * r_max_ / r;
  }

  double psi0(double r) const {
    if (r < r_lin_) return c0_ * a_ * r;
    return kPi - complement(r);
  }

  double psi0_prime(double r) const {
    if (r < r_lin_) return c0_ * a_;
    if (r <= r_max_) return -g_.derivative(r);
    return g_max_ * r_max_ / (r * r);
  }

  /// r with psi0(r) = pi - alpha, alpha in (0, pi].
  double radius_from_complement(double alpha) const {
    if (!(alpha > 0.0)) throw InputError("north pole has no preimage");
    const double g_lin = kPi - c0_ * a_ * r_lin_;
    if (alpha >= g_lin) return (kPi - alpha) / (c0_ * a_);
    if (alpha < g_max_) return g_max_ * r_max_ / alpha;
    // g decreasing: locate the node interval, then bisect the cubic.
    const auto nodes = g_.nodes();
    const auto vals = g_.values();
    std::size_t lo = 0, hi = nodes.size() - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      (vals[mid] >= alpha ? lo : hi) = mid;
    }
    double a = nodes[lo], b = nodes[hi];
    for (int it = 0; it < 200 && b - a > 0.0; ++it) {
      const double m = 0.5 * (a + b);
      if (m == a || m == b) break;
      (g_.eval(m, lo) >= alpha ? a : b) = m;
    }
    return 0.5 * (a + b);
  }

  template <std::size_t M>
  std::array<double, M + 1> to_sphere(const Vec<M>& x) const {
    const double r = norm(x);
    std::array<double, M + 1> y{};
    if (r == 0.0) {
      y[M] = -1.0;
      return y;
    }
    const double g = complement(r);
    const double s = std::sin(g) / r;
    for (std::size_t k = 0; k < M; ++k) y[k] = s * x[k];
    y[M] = std::cos(g);
    return y;
  }

  /// psi(x) - N, computed without cancellation near the north pole.
  template <std::size_t M>
  std::array<double, M + 1> offset_from_north(const Vec<M>& x) const {
    const double r = norm(x);
    std::array<double, M + 1> y{};
    if (r == 0.0) {
      y[M] = -2.0;
      return y;
    }
    const double g = complement(r);
    const double s = std::sin(g) / r;
    const double h = std::sin(0.5 * g);
    for (std::size_t k = 0; k < M; ++k) y[k] = s * x[k];
    y[M] = -2.0 * h * h;
    return y;
  }

  /// phi = psi^(-1) on S^m \ {N}.
  template <std::size_t K>
  Vec<K - 1> from_sphere(const std::array<double, K>& y) const {
    constexpr std::size_t M = K - 1;
    double rho = 0.0;
    for (std::size_t k = 0; k < M; ++k) rho += y[k] * y[k];
    rho = std::sqrt(rho);
    Vec<M> x{};
    if (rho == 0.0) {
      if (y[M] > 0.0) throw InputError("north pole has no preimage");
      return x;
    }
    const double alpha = std::atan2(rho, y[M]);
    const double r = alpha >= kPi - c0_ * a_ * r_lin_ ? std::atan2(rho, -y[M]) / (c0_ * a_)
                                                      : radius_from_complement(alpha);
    for (std::size_t k = 0; k < M; ++k) x[k] = r * y[k] / rho;
    return x;
  }

  /// grad psi(x) b: radial part scaled by psi0', transverse part by sin(psi0)/r.
  template <std::size_t M>
  std::array<double, M + 1> pushforward(const Vec<M>& x, const Vec<M>& b) const {
    std::array<double, M + 1> c{};
    const double r = norm(x);
    if (r == 0.0) {
      const double s = c0_ * a_;
      for (std::size_t k = 0; k < M; ++k) c[k] = s * b[k];
      return c;
    }
    const double g = complement(r);
    const double dpsi = psi0_prime(r);
    const double tang = std::sin(g) / r;
    Vec<M> e{};
    for (std::size_t k = 0; k < M; ++k) e[k] = x[k] / r;
    const double br = dot(e, b);
    // psi0 = pi - g: cos(psi0) = -cos(g), sin(psi0) = sin(g).
    for (std::size_t k = 0; k < M; ++k) c[k] = br * dpsi * (-std::cos(g)) * e[k] + tang * (b[k] - br * e[k]);
    c[M] = br * dpsi * std::sin(g);
    return c;
  }

  /// Operator norm of grad psi at radius r.
  double gradient_norm(double r) const {
    if (r == 0.0) return c0_ * a_;
    return std::max(psi0_prime(r), std::sin(complement(r)) / r);
  }

  /// 2 psi0' + 2 sin(psi0) / r, the majorant used in the decay argument.
  double gradient_majorant(double r) const {
    if (r == 0.0) return 4.0 * c0_ * a_;
    return 2.0 * psi0_prime(r) + 2.0 * std::sin(complement(r)) / r;
  }

  void write_csv(std::ostream& os, int samples = 2000) const {
    os << "# damping " << profile_.name << " c0=" << format_double(c0_) << " r0=" << format_double(r0()) << "\n";
    os << "r,psi0,psi0_prime\n";
    const double top = std::log(r_max_ + 1.0);
    for (int i = 0; i <= samples; ++i) {
      const double r = std::expm1(top * i / samples);
      os << format_double(r) << "," << format_double(psi0(r)) << "," << format_double(psi0_prime(r)) << "\n";
    }
  }

 private:
  void build(double ratio) {
    using boost::math::quadrature::gauss;
    using boost::math::quadrature::gauss_kronrod;
    if (!(ratio > 1.0)) throw ConfigError("geometric ratio must exceed 1");

    std::vector<double> r;
    const double band_end = r_lin_ + 2.0;
    for (int i = 0; i <= 200; ++i) r.push_back(r_lin_ + 2.0 * i / 200);
    for (double s = band_end * ratio; s < r_max_; s *= ratio) r.push_back(s);
    r.push_back(r_max_);
    for (double b : profile_.breakpoints) {
      if (b <= band_end || b >= r_max_) continue;
      for (int j = 0; j <= 8; ++j) r.push_back(b - 1.0 + j / 8.0);
    }
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end(), [](double p, double q) { return q - p <= 1e-12 * q; }), r.end());
    r.erase(std::remove_if(r.begin(), r.end(), [&](double s) { return s < r_lin_; }), r.end());

    std::vector<double> p1(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) p1[i] = psi1(r[i]);

    std::vector<double> piece(r.size() - 1);
    for (std::size_t i = 0; i + 1 < r.size(); ++i)
      piece[i] = gauss<double, 10>::integrate([&](double s) { return psi1(s); }, r[i], r[i + 1]);

    // Tail beyond r_max with u = 1 / r.
    const double tail = gauss_kronrod<double, 31>::integrate(
        [&](double u) { return u > 0.0 ? psi1(1.0 / u) / (u * u) : 0.0; }, 0.0, 1.0 / r_max_, 12, 1e-12);

    std::vector<double> right(r.size());
    right.back() = tail;
    for (std::size_t i = r.size() - 1; i-- > 0;) right[i] = right[i + 1] + piece[i];
    const double total = a_ * r_lin_ + right.front();
    c0_ = kPi / total;

    std::vector<double> g(r.size()), dg(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      g[i] = c0_ * right[i];
      dg[i] = -c0_ * p1[i];
    }
    g_max_ = g.back();
    g_ = CubicHermite(std::move(r), std::move(g), std::move(dg), true);
  }

  DampingProfile profile_;
  double a_ = 0.0;
  double r_lin_ = 0.0;
  double r_max_ = 0.0;
  double c0_ = 0.0;
  double g_max_ = 0.0;
  CubicHermite g_;
};

/// Geodesic angle from y to the north pole.
template <std::size_t K>
double distance_to_north(const std::array<double, K>& y) {
  double rho = 0.0;
  for (std::size_t k = 0; k + 1 < K; ++k) rho += y[k] * y[k];
  return std::atan2(std::sqrt(rho), y[K - 1]);
}

/// c(y) = grad psi(phi(y)) b(phi(y)); c(N) = 0.
template <std::size_t K, class Field>
std::array<double, K> compactified_field(const DampedDiffeomorphism& map, const std::array<double, K>& y,
                                         const Field& b) {
  double n2 = 0.0;
  for (double c : y) n2 += c * c;
  if (std::abs(std::sqrt(n2) - 1.0) > 1e-8) throw InputError("point is not on the unit sphere");
  if (distance_to_north(y) == 0.0) return std::array<double, K>{};
  const auto x = map.from_sphere(y);
  return map.pushforward<K - 1>(x, b(x));
}

struct GradientBoundReport {
  bool global_ok = true;
  bool decay_ok = true;
  bool majorant_ok = true;
  double worst_global_ratio = 0.0;  ///< max |grad psi| / D(0)
  double worst_decay_ratio = 0.0;   ///< max |grad psi| / D(|x|) over |x| >= r0
  std::size_t checked = 0;
  std::vector<double> offending_radii;

  bool ok() const { return global_ok && decay_ok && majorant_ok; }
};

/// Finite-difference operator norm of grad psi at each sample, checked
/// against D(0) everywhere and D(|x|) beyond r0 with relative slack eps.
template <std::size_t M>
GradientBoundReport gradient_bound_check(const DampedDiffeomorphism& map, std::span<const Vec<M>> samples,
                                         double eps = 1e-3) {
  GradientBoundReport rep;
  const double D_zero = map.profile()(0.0);
  for (const auto& x : samples) {
    const double r = norm(x);
    const double h = 1e-5 * std::max(1.0, r);
    Eigen::Matrix<double, M + 1, M> J;
    for (std::size_t j = 0; j < M; ++j) {
      Vec<M> p = x, q = x;
      p[j] += h;
      q[j] -= h;
      const auto yp = map.offset_from_north<M>(p);
      const auto yq = map.offset_from_north<M>(q);
      for (std::size_t i = 0; i <= M; ++i)
        J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (yp[i] - yq[i]) / (2.0 * h);
    }
    const double nrm = Eigen::JacobiSVD<Eigen::Matrix<double, M + 1, M>>(J).singularValues()(0);
    ++rep.checked;
    const double g_ratio = nrm / D_zero;
    rep.worst_global_ratio = std::max(rep.worst_global_ratio, g_ratio);
    bool bad = false;
    if (g_ratio > 1.0 + eps) rep.global_ok = false, bad = true;
    if (r >= map.r0()) {
      const double d_ratio = nrm / map.profile()(r);
      rep.worst_decay_ratio = std::max(rep.worst_decay_ratio, d_ratio);
      if (d_ratio > 1.0 + eps) rep.decay_ok = false, bad = true;
    }
    if (map.gradient_majorant(r) < nrm * (1.0 - eps)) rep.majorant_ok = false, bad = true;
    if (bad) rep.offending_radii.push_back(r);
  }
  return rep;
}

template <std::size_t K>
struct SphereTrajectory {
  std::vector<double> t;
  std::vector<std::array<double, K>> y;
  bool reached_north = false;
  double arrival_time = kInf;
  std::size_t rejected_steps = 0;
};

/// Projected RK4 for y' = c(y) on S^m. Stage points are projected before
/// evaluating c; a step whose renormalization correction exceeds 1e-3 is
/// rejected and retried with half the step. Arrival in the geodesic ball of
/// radius `arrival_radius` about N is located by bisecting the final step.
template <std::size_t M, class Field>
SphereTrajectory<M + 1> integrate_on_sphere(const DampedDiffeomorphism& map, const Vec<M>& x0, const Field& b,
                                            double dt, double T, double arrival_radius = 1e-2) {
  constexpr std::size_t K = M + 1;
  using Y = std::array<double, K>;
  if (!(dt > 0.0) || !(T >= 0.0)) throw ConfigError("integrate_on_sphere: need dt > 0 and T >= 0");

  auto project = [](Y y) {
    double n = 0.0;
    for (double c : y) n += c * c;
    n = std::sqrt(n);
    for (double& c : y) c /= n;
    return y;
  };
  auto field = [&](const Y& y) { return compactified_field<K>(map, project(y), b); };
  auto axpy = [](const Y& y, double s, const Y& k) {
    Y out;
    for (std::size_t i = 0; i < K; ++i) out[i] = y[i] + s * k[i];
    return out;
  };
  // Returns the unprojected RK4 update.
  auto rk4 = [&](const Y& y, double h) {
    const Y k1 = field(y);
    const Y k2 = field(axpy(y, 0.5 * h, k1));
    const Y k3 = field(axpy(y, 0.5 * h, k2));
    const Y k4 = field(axpy(y, h, k3));
    Y out;
    for (std::size_t i = 0; i < K; ++i) out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
  };

  SphereTrajectory<K> tr;
  Y y = map.to_sphere<M>(x0);
  double t = 0.0;
  tr.t.push_back(t);
  tr.y.push_back(y);
  if (distance_to_north(y) < arrival_radius) {
    tr.reached_north = true;
    tr.arrival_time = 0.0;
    return tr;
  }
  while (t < T) {
    double h = std::min(dt, T - t);
    if (T - t - h < 1e-12 * T) h = T - t;
    Y next;
    for (;;) {
      next = rk4(y, h);
      double n = 0.0;
      for (double c : next) n += c * c;
      if (std::abs(std::sqrt(n) - 1.0) <= 1e-3) break;
      ++tr.rejected_steps;
      h *= 0.5;
      if (h < 1e-14 * std::max(1.0, T)) throw NumericalFault("integrate_on_sphere: step size underflow");
    }
    next = project(next);
    if (distance_to_north(next) < arrival_radius) {
      double lo = 0.0, hi = h;
      for (int it = 0; it < 100 && hi - lo > 1e-15 * std::max(1.0, t); ++it) {
        const double mid = 0.5 * (lo + hi);
        (distance_to_north(project(rk4(y, mid))) < arrival_radius ? hi : lo) = mid;
      }
      tr.reached_north = true;
      tr.arrival_time = t + hi;
      tr.t.push_back(t + hi);
      tr.y.push_back(project(rk4(y, hi)));
      return tr;
    }
    y = next;
    t += h;
    tr.t.push_back(t);
    tr.y.push_back(y);
  }
  return tr;
}

/// sum_i w_i |b_i| / ((1 + |z_i|) log(2 + |z_i|)) over active particles,
/// z = (x, v), b = (v, E).
template <int D>
double certificate_integrand(const ParticleEnsemble<D>& ens, std::span<const Vec<D>> E) {
  if (E.size() != ens.size()) throw InputError("certificate_integrand: field sample count mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    if (!ens.active(i)) continue;
    const double z = std::sqrt(dot(ens.x[i], ens.x[i]) + dot(ens.v[i], ens.v[i]));
    const double bn = std::sqrt(dot(ens.v[i], ens.v[i]) + dot(E[i], E[i]));
    s += ens.w[i] * bn / ((1.0 + z) * std::log(2.0 + z));
  }
  return s;
}

enum class QuadratureRule { Trapezoid, Midpoint };

/// Time quadrature of sampled certificate integrand values on a uniform
/// time grid. Midpoint pairs consecutive intervals and uses the sample at
/// their shared node, so it needs an even number of intervals.
inline double noblowup_certificate(std::span<const double> t, std::span<const double> values,
                                   QuadratureRule rule = QuadratureRule::Trapezoid) {
  if (t.size() != values.size()) throw InputError("noblowup_certificate: size mismatch");
  if (t.size() < 2) return 0.0;
  double s = 0.0;
  if (rule == QuadratureRule::Trapezoid) {
    for (std::size_t i = 0; i + 1 < t.size(); ++i) s += 0.5 * (t[i + 1] - t[i]) * (values[i] + values[i + 1]);
  } else {
    if ((t.size() - 1) % 2 != 0) throw InputError("midpoint rule needs an even number of intervals");
    for (std::size_t i = 0; i + 2 < t.size(); i += 2) s += (t[i + 2] - t[i]) * values[i + 1];
  }
  return s;
}

/// Running trapezoid accumulation of the certificate during a run.
class NoBlowupAccumulator {
 public:
  void add(double t, double value) {
    if (has_last_) total_ += 0.5 * std::abs(t - t_last_) * (value + v_last_);
    t_last_ = t;
    v_last_ = value;
    has_last_ = true;
  }
  double value() const { return total_; }

  /// {total, t_last, v_last, has_last} for checkpoints.
  std::array<double, 4> state() const { return {total_, t_last_, v_last_, has_last_ ? 1.0 : 0.0}; }
  void restore(const std::array<double, 4>& s) {
    total_ = s[0];
    t_last_ = s[1];
    v_last_ = s[2];
    has_last_ = s[3] != 0.0;
  }

 private:
  double total_ = 0.0;
  double t_last_ = 0.0;
  double v_last_ = 0.0;
  bool has_last_ = false;
};

/// Adds dt * sum w |b| 1_{|z| < 2^n} to C[n - 1] for n = 1..C.size(); the
/// C_n of the data-driven damping profile are 1 + these sums.
template <int D>
void accumulate_flux_integrals(const ParticleEnsemble<D>& ens, std::span<const Vec<D>> E, double dt,
                               std::vector<double>& C) {
  for (std::size_t i = 0; i < ens.size(); ++i) {
    if (!ens.active(i)) continue;
    const double z = std::sqrt(dot(ens.x[i], ens.x[i]) + dot(ens.v[i], ens.v[i]));
    const double bn = std::sqrt(dot(ens.v[i], ens.v[i]) + dot(E[i], E[i]));
    for (std::size_t n = 0; n < C.size(); ++n)
      if (z < std::ldexp(1.0, static_cast<int>(n) + 1)) C[n] += dt * ens.w[i] * bn;
  }
}

}  // namespace vpflow
