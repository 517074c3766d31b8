#include <gtest/gtest.h>

#include <boost/numeric/odeint.hpp>

#include <random>

#include "vpflow/compactify.hpp"

using namespace vpflow;

namespace {

std::vector<DampingProfile> profiles() {
  return {DampingProfile::constant(1.0), DampingProfile::power_law(1.0, 2.0),
          DampingProfile::from_flux_integrals({1.5, 3.0, 10.0, 40.0, 120.0, 500.0})};
}

using Y3 = std::array<double, 3>;

double sphere_norm(const Y3& y) { return std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]); }

// b(x, v) = (v, x + x^3): finite-time escape from (1, 0).
Vec<2> blowup_field(const Vec<2>& z) { return {z[1], z[0] + z[0] * z[0] * z[0]}; }
Vec<2> harmonic_field(const Vec<2>& z) { return {z[1], -z[0]}; }

// First time |z(t)| reaches R for z' = blowup_field(z), z(0) = (1, 0), by
// adaptive Dormand-Prince with dense-output event bisection.
double euclidean_hitting_time(double R) {
  using namespace boost::numeric::odeint;
  using State = std::array<double, 2>;
  auto rhs = [](const State& z, State& dz, double) {
    dz[0] = z[1];
    dz[1] = z[0] + z[0] * z[0] * z[0];
  };
  auto stepper = make_dense_output(1e-13, 1e-13, runge_kutta_dopri5<State>());
  stepper.initialize(State{1.0, 0.0}, 0.0, 1e-4);
  auto radius = [](const State& z) { return std::hypot(z[0], z[1]); };
  for (;;) {
    const auto [t0, t1] = stepper.do_step(rhs);
    if (radius(stepper.current_state()) >= R) {
      double lo = t0, hi = t1;
      State z;
      for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        stepper.calc_state(mid, z);
        (radius(z) >= R ? hi : lo) = mid;
      }
      return hi;
    }
  }
}

}  // namespace

TEST(DampingProfile, ValidationRejectsBadProfiles) {
  EXPECT_THROW(DampingProfile::user([](double r) { return 0.5 + 0.1 * std::sin(r); }).validate(), InputError);
  EXPECT_THROW(DampingProfile::user([](double) { return 1.5; }).validate(), InputError);
  EXPECT_THROW(DampingProfile::user([](double r) { return r > 5 ? 0.0 : 1.0; }).validate(), InputError);
  EXPECT_THROW(DampingProfile::from_flux_integrals({2.0, 1.5}), InputError);
  EXPECT_THROW(DampedDiffeomorphism(DampingProfile::user([](double r) { return 1.0 + r; })), InputError);
  EXPECT_NO_THROW(DampingProfile::from_flux_integrals({1.0, 2.0, 2.0}).validate());
}

TEST(DampingProfile, FluxIntegralProfileValues) {
  const auto D = DampingProfile::from_flux_integrals({2.0, 5.0});
  EXPECT_EQ(D(0.5), 1.0);
  EXPECT_EQ(D(1.0), 1.0 / 4.0);   // [1, 2): 1 / (2 C_1)
  EXPECT_EQ(D(3.0), 1.0 / 20.0);  // [2, 4): 1 / (4 C_2)
  EXPECT_EQ(D(5.0), 1.0 / 40.0);  // last C reused
}

TEST(DampedDiffeomorphism, ConstantProfileNormalizationOracle) {
  // For D = 1: ||psi1||_1 = ||D1||_1 - a/2 (the bump has mean 1/2), and
  // ||D1||_1 = a (1 + pi/a) + 1 / (1 + pi/a).
  DampedDiffeomorphism map(DampingProfile::constant(1.0));
  const double a = 0.25, rl = kPi / a;
  const double c0 = kPi / (kPi + a / 2.0 + 1.0 / (1.0 + rl));
  EXPECT_NEAR(map.c0(), c0, 1e-10);
  EXPECT_GT(map.c0(), 0.0);
  EXPECT_LT(map.c0(), 1.0);
  for (double r : {0.0, 1.0, 5.0, 12.0, 4.0 * kPi - 1e-9}) EXPECT_NEAR(map.psi0(r), map.c0() * 0.25 * r, 1e-14);
  EXPECT_EQ(map.r0(), 8.0 * kPi);
}

TEST(DampedDiffeomorphism, Psi1OracleAgainstDirectAverage) {
  DampedDiffeomorphism map(DampingProfile::power_law(1.0, 2.0));
  for (double r : {13.0, 13.7, 20.0, 150.0}) {
    // Midpoint sums on each side of the jump of D1 at 1 + pi / D0(0).
    const double cut = std::clamp(1.0 + map.linear_radius() - r, 0.0, 1.0);
    const int m = 20000;
    double s = 0.0;
    for (auto [lo, hi] : {std::pair{0.0, cut}, std::pair{cut, 1.0}}) {
      for (int i = 0; i < m; ++i) {
        const double t = lo + (hi - lo) * (i + 0.5) / m;
        s += 140.0 * std::pow(t * (1 - t), 3) * map.D1(r + t) * (hi - lo) / m;
      }
    }
    EXPECT_NEAR(map.psi1(r), s, 1e-7 * s) << r;
  }
}

TEST(DampedDiffeomorphism, ProfilePropertiesForThreeDampings) {
  for (const auto& D : profiles()) {
    DampedDiffeomorphism map(D);
    const double a = map.D0(0.0);
    // Linear near 0.
    for (int i = 0; i < 100; ++i) {
      const double r = map.linear_radius() * i / 100.0;
      EXPECT_NEAR(map.psi0(r), map.c0() * a * r, 1e-13) << D.name;
    }
    // Approaches pi.
    EXPECT_GE(map.psi0(map.r_max()), kPi - 1e-3) << D.name;
    EXPECT_LT(map.psi0(map.r_max()), kPi);
    // Strictly increasing on every table node.
    const auto g = map.table().values();
    for (std::size_t i = 1; i < g.size(); ++i) ASSERT_LT(g[i], g[i - 1]) << D.name << " node " << i;
    // Slope bounds on a dense log grid.
    for (double r = 1e-3; r < map.r_max(); r *= 1.003) {
      const double s = map.psi0_prime(r);
      EXPECT_GT(s, 0.0);
      EXPECT_LE(s, a * (1.0 + 1e-9)) << D.name << " r=" << r;
      if (r >= 2.0 * kPi / a) EXPECT_LE(s, map.D0(r) * (1.0 + 1e-3)) << D.name << " r=" << r;
    }
  }
}

TEST(DampedDiffeomorphism, SphereMapBasics) {
  DampedDiffeomorphism map(DampingProfile::power_law(1.0, 2.0));
  const auto s = map.to_sphere<2>(Vec<2>{0.0, 0.0});
  EXPECT_EQ(s, (Y3{0.0, 0.0, -1.0}));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> lr(-3.0, std::log10(map.r_max()));
  for (int i = 0; i < 10000; ++i) {
    Vec<2> x{n(rng), n(rng)};
    x = (std::pow(10.0, lr(rng)) / norm(x)) * x;
    EXPECT_NEAR(sphere_norm(map.to_sphere<2>(x)), 1.0, 1e-14);
  }
}

TEST(DampedDiffeomorphism, RoundTrip) {
  for (const auto& D : profiles()) {
    DampedDiffeomorphism map(D);
    std::mt19937_64 rng(13);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> lr(-4.0, std::log10(map.r_max()));
    for (int i = 0; i < 5000; ++i) {
      Vec<2> x{n(rng), n(rng)};
      x = (std::pow(10.0, lr(rng)) / norm(x)) * x;
      const auto back = map.from_sphere(map.to_sphere<2>(x));
      EXPECT_LE(norm(back - x), 1e-9 * norm(x)) << D.name << " |x|=" << norm(x);
    }
  }
}

TEST(DampedDiffeomorphism, InjectiveOnSamples) {
  DampedDiffeomorphism map(DampingProfile::constant(1.0));
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::vector<Vec<2>> xs(300);
  for (auto& x : xs) x = {u(rng), u(rng)};
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      const auto a = map.offset_from_north<2>(xs[i]), b = map.offset_from_north<2>(xs[j]);
      EXPECT_GT(std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]), 0.0);
    }
}

TEST(GradientBound, PassesOnSamplesForThreeDampings) {
  for (const auto& D : profiles()) {
    DampedDiffeomorphism map(D);
    std::vector<Vec<2>> xs{{0.0, 0.0}};
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
    const double lo = std::log(map.r0()), hi = std::log(1e2 * map.r0());
    for (int i = 0; i < 10000; ++i) {
      const double r = std::exp(lo + (hi - lo) * i / 9999.0), th = ang(rng);
      xs.push_back({r * std::cos(th), r * std::sin(th)});
    }
    for (int i = 1; i < 200; ++i) xs.push_back({map.r0() * i / 200.0, 0.0});
    const auto rep = gradient_bound_check<2>(map, xs);
    EXPECT_TRUE(rep.global_ok) << D.name << " worst " << rep.worst_global_ratio;
    EXPECT_TRUE(rep.decay_ok) << D.name << " worst " << rep.worst_decay_ratio;
    EXPECT_TRUE(rep.majorant_ok) << D.name;
    EXPECT_EQ(rep.checked, xs.size());
  }
}

TEST(GradientBound, FiniteDifferenceMatchesAnalyticNorm) {
  DampedDiffeomorphism map(DampingProfile::power_law(1.0, 1.0));
  for (double r : {0.5, 5.0, 12.7, 13.3, 40.0, 400.0}) {
    const Vec<2> x{r, 0.0};
    const std::vector<Vec<2>> one{x};
    const auto rep = gradient_bound_check<2>(map, one);
    EXPECT_NEAR(rep.worst_global_ratio, map.gradient_norm(r), 1e-6 * map.gradient_norm(r)) << r;
  }
}

TEST(CompactifiedField, NorthPoleZeroFieldAndErrors) {
  DampedDiffeomorphism map(DampingProfile::power_law(1.0, 2.0));
  const auto c = compactified_field<3>(map, Y3{0.0, 0.0, 1.0}, blowup_field);
  EXPECT_EQ(c, (Y3{}));
  auto zero = [](const Vec<2>&) { return Vec<2>{}; };
  for (const Y3& y : {Y3{0.0, 0.0, -1.0}, Y3{0.6, 0.0, 0.8}, Y3{0.0, -1.0, 0.0}})
    EXPECT_EQ(compactified_field<3>(map, y, zero), (Y3{}));
  EXPECT_THROW(compactified_field<3>(map, Y3{0.0, 0.0, 1.1}, zero), InputError);
}

TEST(CompactifiedField, TangentAndMatchesFiniteDifferences) {
  DampedDiffeomorphism map(DampingProfile::power_law(1.0, 2.0));
  auto b = [](const Vec<2>& z) { return Vec<2>{z[1] - 0.3 * z[0] * z[0], z[0] * z[1] + 1.0}; };
  std::mt19937_64 rng(41);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> lr(-2.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    Vec<2> x{n(rng), n(rng)};
    x = (std::pow(10.0, lr(rng)) / norm(x)) * x;
    const auto y = map.to_sphere<2>(x);
    const auto c = compactified_field<3>(map, y, b);
    const double cn = sphere_norm(c);
    EXPECT_LE(std::abs(c[0] * y[0] + c[1] * y[1] + c[2] * y[2]), 1e-10 * std::max(1.0, cn));
    // Directional derivative of psi along b(x).
    const Vec<2> bx = map.from_sphere(y);
    const auto dir = b(bx);
    const double h = 1e-6 * std::max(1.0, norm(x)) / std::max(1.0, norm(dir));
    const auto p = map.offset_from_north<2>(x + h * dir), q = map.offset_from_north<2>(x - h * dir);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(c[k], (p[k] - q[k]) / (2 * h), 1e-6 * std::max(cn, 1e-12) + 1e-12);
  }
}

TEST(CompactifiedField, ContinuousTowardNorthPole) {
  DampedDiffeomorphism map(DampingProfile::power_law(1.0, 2.0));
  auto linear = [](const Vec<2>& z) { return Vec<2>{z[1], z[0]}; };
  double prev = kInf;
  for (double alpha = 0.1; alpha > 1e-6; alpha *= 0.5) {
    const Y3 y{std::sin(alpha) * std::cos(0.3), std::sin(alpha) * std::sin(0.3), std::cos(alpha)};
    const double c = sphere_norm(compactified_field<3>(map, y, linear));
    EXPECT_LE(c, prev * 1.0000001);
    prev = c;
  }
  EXPECT_LT(prev, 1e-5);
}

TEST(SphereIntegration, ZeroFieldIsStationary) {
  DampedDiffeomorphism map(DampingProfile::constant(1.0));
  auto zero = [](const Vec<2>&) { return Vec<2>{}; };
  const auto tr = integrate_on_sphere<2>(map, Vec<2>{0.4, -2.0}, zero, 0.01, 1.0);
  EXPECT_FALSE(tr.reached_north);
  for (const auto& y : tr.y)
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(y[k], tr.y.front()[k], 1e-15);
}

TEST(SphereIntegration, BoundedOrbitProjectsOntoEuclideanOrbit) {
  DampedDiffeomorphism map(DampingProfile::power_law(1.0, 2.0));
  const double dt = 1e-3;
  const auto tr = integrate_on_sphere<2>(map, Vec<2>{1.0, 0.0}, harmonic_field, dt, 1.0);
  ASSERT_FALSE(tr.reached_north);
  // Independent Euclidean RK4 on the same grid.
  Vec<2> z{1.0, 0.0};
  double worst = 0.0;
  for (std::size_t i = 1; i < tr.t.size(); ++i) {
    const double h = tr.t[i] - tr.t[i - 1];
    const auto k1 = harmonic_field(z);
    const auto k2 = harmonic_field(z + 0.5 * h * k1);
    const auto k3 = harmonic_field(z + 0.5 * h * k2);
    const auto k4 = harmonic_field(z + h * k3);
    z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    worst = std::max(worst, norm(map.from_sphere(tr.y[i]) - z));
  }
  EXPECT_LE(worst, 1e-6);
  EXPECT_NEAR(tr.t.back(), 1.0, 1e-12);
}

TEST(SphereIntegration, BlowupArrivalMatchesAdaptiveEuclideanEscape) {
  DampedDiffeomorphism map(DampingProfile::power_law(1.0, 2.0));
  const double arrival = 1e-2;
  const double R = map.radius_from_complement(arrival);
  const double t_oracle = euclidean_hitting_time(R);
  const auto tr = integrate_on_sphere<2>(map, Vec<2>{1.0, 0.0}, blowup_field, 1e-3, 10.0, arrival);
  ASSERT_TRUE(tr.reached_north);
  EXPECT_NEAR(tr.arrival_time, t_oracle, 1e-3 * t_oracle);
  EXPECT_EQ(tr.rejected_steps, 0u);
}

TEST(NoBlowupCertificate, EmptyAndMonotone) {
  ParticleEnsemble<1> ens;
  std::vector<Vec<1>> E;
  EXPECT_EQ(certificate_integrand<1>(ens, E), 0.0);
  ens.push_back({0.5}, {1.0}, 1.0, 1.0);
  E.push_back({0.2});
  const double one = certificate_integrand<1>(ens, E);
  ens.push_back({-2.0}, {0.3}, 0.5, 1.0);
  E.push_back({1.0});
  EXPECT_GT(certificate_integrand<1>(ens, E), one);
  const std::vector<double> t{0.0}, v{1.0};
  EXPECT_EQ(noblowup_certificate(t, v), 0.0);
}

TEST(NoBlowupCertificate, TrapezoidAndMidpointAgreeOnFreeStreaming) {
  // Zero field, compactly supported start: sum w |v| / ((1+|z|) log(2+|z|)).
  ParticleEnsemble<1> ens;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) ens.push_back({u(rng)}, {u(rng)}, 0.005, 1.0);
  const int steps = 2000;
  const double T = 4.0, dt = T / steps;
  std::vector<double> t, val;
  const std::vector<Vec<1>> zero(ens.size(), Vec<1>{});
  for (int s = 0; s <= steps; ++s) {
    t.push_back(s * dt);
    val.push_back(certificate_integrand<1>(ens, zero));
    for (std::size_t i = 0; i < ens.size(); ++i) ens.x[i][0] += dt * ens.v[i][0];
  }
  const double trap = noblowup_certificate(t, val, QuadratureRule::Trapezoid);
  const double mid = noblowup_certificate(t, val, QuadratureRule::Midpoint);
  EXPECT_NEAR(trap, mid, 1e-4 * trap);
  NoBlowupAccumulator acc;
  for (std::size_t i = 0; i < t.size(); ++i) acc.add(t[i], val[i]);
  EXPECT_NEAR(acc.value(), trap, 1e-13 * trap);
  EXPECT_THROW(noblowup_certificate(std::span(t).first(4), std::span(val).first(4), QuadratureRule::Midpoint),
               InputError);
}

TEST(NoBlowupCertificate, FluxIntegralsFeedDataDrivenProfile) {
  ParticleEnsemble<1> ens;
  ens.push_back({0.5}, {0.5}, 2.0, 1.0);
  ens.push_back({3.0}, {0.0}, 1.0, 1.0);
  const std::vector<Vec<1>> E{{0.0}, {4.0}};
  std::vector<double> C(3, 1.0);
  accumulate_flux_integrals<1>(ens, E, 0.5, C);
  EXPECT_NEAR(C[0], 1.0 + 0.5 * 2.0 * std::sqrt(0.25), 1e-15);  // |z| < 2
  EXPECT_NEAR(C[1], C[0] + 0.5 * 4.0, 1e-15);                 // |z| < 4
  EXPECT_EQ(C[2], C[1]);
  EXPECT_NO_THROW(DampedDiffeomorphism(DampingProfile::from_flux_integrals(C)));
}
