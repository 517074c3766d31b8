#pragma once

// Coulomb/Newton kernels K(x) = sigma c_d x / |x|^d, their fundamental
// solutions H (K = -sigma grad H), and mollified kernels K_n = K * psi_n.

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "vpflow/core.hpp"
#include "vpflow/interpolation.hpp"

namespace vpflow {

enum class MollifierShape {
  /// psi(x) proportional to (1 - |x|^2)^4 on the unit ball.
  Poly4,
};

inline std::string to_string(MollifierShape s) {
  switch (s) {
    case MollifierShape::Poly4:
      return "poly4";
  }
  return "unknown";
}

inline MollifierShape parse_mollifier_shape(const std::string& id) {
  if (id == "poly4") return MollifierShape::Poly4;
  throw ConfigError("unknown mollifier shape '" + id + "'");
}

struct KernelSpec {
  int dim = 3;
  int sigma = 1;             ///< +1 repulsive, -1 attractive
  double level = kInf;       ///< mollification level n; infinity = exact kernel
  MollifierShape shape = MollifierShape::Poly4;

  bool mollified() const { return std::isfinite(level); }

  void validate() const {
    if (dim < 1 || dim > 3) throw ConfigError("kernel dimension must be 1, 2 or 3");
    if (sigma != 1 && sigma != -1) throw ConfigError("kernel sign must be +1 or -1");
    if (!(level >= 1.0)) throw ConfigError("mollification level must be >= 1 or inf");
  }

  /// Canonical one-line form embedded in output headers.
  std::string to_string() const {
    std::ostringstream os;
    os << "d=" << dim << " sigma=" << sigma << " n="
       << (mollified() ? format_double(level) : std::string("inf"))
       << " shape=" << vpflow::to_string(shape);
    return os.str();
  }

  static KernelSpec parse(const std::string& text) {
    KernelSpec spec;
    std::istringstream is(text);
    std::string tok;
    while (is >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw ConfigError("bad kernel token '" + tok + "'");
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "d") spec.dim = std::stoi(val);
      else if (key == "sigma") spec.sigma = std::stoi(val);
      else if (key == "n") spec.level = val == "inf" ? kInf : std::stod(val);
      else if (key == "shape") spec.shape = parse_mollifier_shape(val);
      else throw ConfigError("unknown kernel key '" + key + "'");
    }
    spec.validate();
    return spec;
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Surface measure of the unit (d-1)-sphere; for d = 1 the two points {-1, 1}.
inline double unit_sphere_area(int d) {
  switch (d) {
    case 1: return 2.0;
    case 2: return 2.0 * kPi;
    case 3: return 4.0 * kPi;
    default: throw ConfigError("unsupported dimension " + std::to_string(d));
  }
}

/// c_d with c_d div(x / |x|^d) = delta_0.
inline double dimensional_constant(int d) { return 1.0 / unit_sphere_area(d); }

/// sigma c_d x / |x|^d. Unmollified specs only.
template <int D>
Vec<D> poisson_kernel(const Vec<D>& x, const KernelSpec& spec) {
  static_assert(D >= 1 && D <= 3);
  if (spec.dim != D) throw ConfigError("kernel spec dimension does not match argument");
  if (spec.mollified()) throw ConfigError("poisson_kernel requires an unmollified spec");
  const double r = norm(x);
  if (r == 0.0) throw SingularityError("poisson_kernel evaluated at the origin");
  double rd = r;
  for (int k = 1; k < D; ++k) rd *= r;
  return (spec.sigma * dimensional_constant(D) / rd) * x;
}

/// H with -H'' = delta in 1D, -Laplace H = delta otherwise.
template <int D>
double fundamental_solution(const Vec<D>& x) {
  static_assert(D >= 1 && D <= 3);
  const double r = norm(x);
  if (r == 0.0) throw SingularityError("fundamental_solution evaluated at the origin");
  if constexpr (D == 1) return -0.5 * r;
  else if constexpr (D == 2) return -std::log(r) / (2.0 * kPi);
  else return dimensional_constant(3) / r;
}

/// Mean of H over the cell [-h/2, h/2]^d; stands in for H(0) on lattices.
inline double fundamental_solution_cell_average(int d, double h) {
  using boost::math::quadrature::gauss;
  switch (d) {
    case 1:
      return -h / 8.0;
    case 2: {
      // Unit square split into four triangles with apex at the origin.
      const double edge = gauss<double, 30>::integrate(
          [](double y) { return 0.25 * 0.5 * std::log(0.25 + y * y) - 0.125; }, -0.5, 0.5);
      const double mean_log_r = 4.0 * edge;
      return -(std::log(h) + mean_log_r) / (2.0 * kPi);
    }
    case 3: {
      // Unit cube split into six pyramids: int 1/r = (3/2) int_face 1/R dA.
      const double face = gauss<double, 30>::integrate(
          [](double y) {
            return gauss<double, 30>::integrate(
                [y](double z) { return 1.0 / std::sqrt(0.25 + y * y + z * z); }, -0.5, 0.5);
          },
          -0.5, 0.5);
      return dimensional_constant(3) * 1.5 * face / h;
    }
    default:
      throw ConfigError("unsupported dimension " + std::to_string(d));
  }
}

// Mollifier psi(x) = C_d (1 - |x|^2)^4 on |x| < 1 and psi_n(x) = n^d psi(n x).

inline double poly4_normalization(int d) {
  switch (d) {
    case 1: return 315.0 / 256.0;
    case 2: return 5.0 / kPi;
    case 3: return 3465.0 / (512.0 * kPi);
    default: throw ConfigError("unsupported dimension " + std::to_string(d));
  }
}

/// Radial profile of the unit-level mollifier.
inline double mollifier_profile(double s, int d) {
  if (s >= 1.0) return 0.0;
  const double q = 1.0 - s * s;
  const double q2 = q * q;
  return poly4_normalization(d) * q2 * q2;
}

template <int D>
double mollifier(double level, const Vec<D>& x, MollifierShape shape = MollifierShape::Poly4) {
  static_assert(D >= 1 && D <= 3);
  if (!(level >= 1.0)) throw ConfigError("mollifier level must be >= 1");
  if (shape != MollifierShape::Poly4) throw ConfigError("unsupported mollifier shape");
  return std::pow(level, D) * mollifier_profile(level * norm(x), D);
}

/// Tabulated K_n. Newton's theorem gives |K_n|(r) = c_d r^{1-d} M(n r) with
/// M the psi-mass of the unit ball of radius n r; the table stores
/// g(u) = M(u) / u^d on [0, 1], which is smooth through u = 0.
class MollifiedKernel {
 public:
  explicit MollifiedKernel(const KernelSpec& spec, int table_nodes = 1025) : spec_(spec) {
    spec_.validate();
    if (!spec_.mollified()) throw ConfigError("MollifiedKernel requires a finite level");
    const int d = spec_.dim;
    std::vector<double> u(static_cast<std::size_t>(table_nodes)), g(u.size()), dg(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      u[i] = static_cast<double>(i) / static_cast<double>(table_nodes - 1);
      g[i] = scaled_mass(u[i], d);
      dg[i] = scaled_mass_derivative(u[i], d);
    }
    table_ = CubicHermite(std::move(u), std::move(g), std::move(dg));
  }

  const KernelSpec& spec() const { return spec_; }
  double support_radius() const { return 1.0 / spec_.level; }

  /// |K_n|(r) / |sigma|.
  double radial(double r) const {
    const int d = spec_.dim;
    const double n = spec_.level;
    const double cd = dimensional_constant(d);
    const double u = n * r;
    if (u >= 1.0) return cd * std::pow(r, 1 - d);
    return cd * std::pow(n, d - 1) * u * table_(u);
  }

  template <std::size_t D>
  Vec<D> operator()(const Vec<D>& x) const {
    if (spec_.dim != static_cast<int>(D)) throw ConfigError("kernel spec dimension does not match argument");
    const double r = norm(x);
    if (r == 0.0) return Vec<D>{};
    return (spec_.sigma * radial(r) / r) * x;
  }

  /// sup_r |K_n|(r) by dense radial scan.
  double bound(int samples = 20000) const {
    double m = 0.0;
    const double rmax = support_radius();
    for (int i = 1; i <= samples; ++i) m = std::max(m, radial(rmax * i / samples));
    return m;
  }

  /// CSV with columns r, |K_n|(r) on [0, 2/n].
  void write_csv(std::ostream& os, int samples = 512) const {
    os << "# kernel " << spec_.to_string() << "\n";
    os << "r,K_n_abs\n";
    const double rmax = 2.0 * support_radius();
    for (int i = 0; i <= samples; ++i) {
      const double r = rmax * i / samples;
      os << format_double(r) << "," << format_double(radial(r)) << "\n";
    }
  }

  /// g(u) = M(u) / u^d = |S^{d-1}| C_d int_0^1 t^{d-1} (1 - u^2 t^2)^4 dt.
  static double scaled_mass(double u, int d) {
    using boost::math::quadrature::gauss;
    const double pref = unit_sphere_area(d) * poly4_normalization(d);
    return pref * gauss<double, 10>::integrate(
                      [u, d](double t) {
                        const double q = 1.0 - u * u * t * t;
                        return std::pow(t, d - 1) * q * q * q * q;
                      },
                      0.0, 1.0);
  }

  static double scaled_mass_derivative(double u, int d) {
    using boost::math::quadrature::gauss;
    const double pref = unit_sphere_area(d) * poly4_normalization(d);
    return pref * gauss<double, 10>::integrate(
                      [u, d](double t) {
                        const double q = 1.0 - u * u * t * t;
                        return std::pow(t, d - 1) * 4.0 * q * q * q * (-2.0 * u * t * t);
                      },
                      0.0, 1.0);
  }

 private:
  KernelSpec spec_;
  CubicHermite table_;
};

/// Kernel for a spec: exact when unmollified, tabulated K_n otherwise.
/// The exact kernel is extended by 0 at the origin (odd-symmetric cell value).
class KernelEvaluator {
 public:
  explicit KernelEvaluator(const KernelSpec& spec) : spec_(spec) {
    spec_.validate();
    if (spec_.mollified()) mollified_.emplace(spec_);
  }

  const KernelSpec& spec() const { return spec_; }

  template <std::size_t D>
  Vec<D> operator()(const Vec<D>& x) const {
    if (mollified_) return (*mollified_)(x);
    if (norm(x) == 0.0) return Vec<D>{};
    return poisson_kernel<static_cast<int>(D)>(x, spec_);
  }

 private:
  KernelSpec spec_;
  std::optional<MollifiedKernel> mollified_;
};

/// Outward flux of the kernel through the sphere of radius r (sigma if exact).
inline double kernel_flux(const KernelSpec& spec, double r) {
  using boost::math::quadrature::gauss;
  KernelEvaluator k(spec);
  switch (spec.dim) {
    case 1:
      return k(Vec<1>{r})[0] - k(Vec<1>{-r})[0];
    case 2: {
      const int m = 256;
      double s = 0.0;
      for (int i = 0; i < m; ++i) {
        const double a = 2.0 * kPi * i / m;
        const Vec<2> n{std::cos(a), std::sin(a)};
        s += dot(k(r * n), n);
      }
      return s * (2.0 * kPi / m) * r;
    }
    case 3: {
      const int m = 128;
      double s = 0.0;
      for (int i = 0; i < m; ++i) {
        const double phi = 2.0 * kPi * i / m;
        s += gauss<double, 30>::integrate(
            [&](double theta) {
              const Vec<3> n{std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                             std::cos(theta)};
              return dot(k(r * n), n) * std::sin(theta);
            },
            0.0, kPi);
      }
      return s * (2.0 * kPi / m) * r * r;
    }
    default:
      throw ConfigError("unsupported dimension");
  }
}

}  // namespace vpflow
