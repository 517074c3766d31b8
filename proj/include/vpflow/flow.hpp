#pragma once

// Lagrangian pusher for b(x, v) = (v, E(x)): kick-drift-kick leapfrog with
// per-particle exit times. Escaped particles are frozen and drop out of the
// deposit; their weight stays in the ensemble for the ledger.

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

#include "vpflow/core.hpp"
#include "vpflow/fields.hpp"
#include "vpflow/grid.hpp"
#include "vpflow/particles.hpp"

namespace vpflow {

/// Force from the particles' own density: deposit, solve, gather.
template <int D>
class SelfConsistentField {
 public:
  SelfConsistentField(const GridSpec<D>& grid, const KernelSpec& spec,
                      std::vector<double> background = {}, int pad = 2)
      : solver_(grid, spec, pad) {
    state_.grid = grid;
    state_.spec = spec;
    state_.background = std::move(background);
  }

  void accelerations(const ParticleEnsemble<D>& ens, std::vector<Vec<D>>& acc) {
    auto dep = deposit(ens, state_.grid);
    state_.rho = std::move(dep.rho);
    state_.E = solver_.solve(state_.rho, state_.background);
    acc.assign(ens.size(), Vec<D>{});
    for (std::size_t i = 0; i < ens.size(); ++i)
      if (ens.active(i)) acc[i] = gather<D>(state_.grid, state_.E, ens.x[i]);
  }

  void wrap(Vec<D>& x) const { state_.grid.wrap(x); }

  const FieldState<D>& state() const { return state_; }
  FieldSolver<D>& solver() { return solver_; }

 private:
  FieldSolver<D> solver_;
  FieldState<D> state_;
};

/// Prescribed time-independent force field E(x).
template <int D>
class FrozenField {
 public:
  using Function = std::function<Vec<D>(const Vec<D>&)>;

  explicit FrozenField(Function E) : E_(std::move(E)) {}

  void accelerations(const ParticleEnsemble<D>& ens, std::vector<Vec<D>>& acc) {
    acc.assign(ens.size(), Vec<D>{});
    for (std::size_t i = 0; i < ens.size(); ++i)
      if (ens.active(i)) acc[i] = E_(ens.x[i]);
  }

  void wrap(Vec<D>&) const {}

  const Function& function() const { return E_; }

 private:
  Function E_;
};

/// Leapfrog stepper that reuses the closing half-kick field as the next
/// opening one. Call invalidate() whenever the active set changes.
template <int D, class Field>
class LeapfrogStepper {
 public:
  explicit LeapfrogStepper(Field& field) : field_(field) {}

  /// One kick-drift-kick step; `clock_sign` = -1 runs the clock backward
  /// (used with reversed velocities for backward flows).
  void step(ParticleEnsemble<D>& ens, double dt, double clock_sign = 1.0) {
    if (!(dt > 0.0)) throw ConfigError("time step must be positive");
    if (!valid_) field_.accelerations(ens, acc_);
    const double half = 0.5 * dt;
    for (std::size_t i = 0; i < ens.size(); ++i) {
      if (!ens.active(i)) continue;
      for (int k = 0; k < D; ++k) ens.v[i][k] += half * acc_[i][k];
      for (int k = 0; k < D; ++k) ens.x[i][k] += dt * ens.v[i][k];
      field_.wrap(ens.x[i]);
    }
    field_.accelerations(ens, acc_);
    for (std::size_t i = 0; i < ens.size(); ++i) {
      if (!ens.active(i)) continue;
      for (int k = 0; k < D; ++k) ens.v[i][k] += half * acc_[i][k];
      if (!all_finite(ens.x[i]) || !all_finite(ens.v[i]))
        throw NumericalFault("non-finite particle state at step " + std::to_string(ens.step + 1) +
                             ", particle " + std::to_string(i));
    }
    ens.t += clock_sign * dt;
    ++ens.step;
    valid_ = true;
  }

  void invalidate() { valid_ = false; }
  const std::vector<Vec<D>>& accelerations() const { return acc_; }

 private:
  Field& field_;
  std::vector<Vec<D>> acc_;
  bool valid_ = false;
};

/// One self-contained leapfrog step (no field reuse).
template <int D, class Field>
void step(ParticleEnsemble<D>& ens, Field& field, double dt) {
  LeapfrogStepper<D, Field> stepper(field);
  stepper.step(ens, dt);
}

enum class TimeDirection { Forward, Backward };

/// Marks active particles with |x| > R or |v| > R as having left every
/// compact set: T+ (forward) or T- (backward) is the current time.
/// Returns the number of newly marked particles.
template <int D>
std::size_t detect_escape(ParticleEnsemble<D>& ens, double radius,
                          TimeDirection dir = TimeDirection::Forward) {
  if (!(radius > 0.0)) throw ConfigError("escape radius must be positive");
  std::size_t marked = 0;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    if (!ens.active(i)) continue;
    if (norm(ens.x[i]) > radius || norm(ens.v[i]) > radius) {
      if (dir == TimeDirection::Forward) {
        ens.status[i] = ParticleStatus::Escaped;
        ens.t_plus[i] = ens.t;
      } else {
        ens.status[i] = ParticleStatus::PreBirth;
        ens.t_minus[i] = ens.t;
      }
      ++marked;
    }
  }
  return marked;
}

/// Frozen-field one-step leapfrog map z = (x, v) -> z'.
template <int D>
Vec<2 * D> leapfrog_map(const typename FrozenField<D>::Function& E, double dt, const Vec<2 * D>& z) {
  Vec<D> x{}, v{};
  for (int k = 0; k < D; ++k) x[k] = z[k], v[k] = z[D + k];
  const Vec<D> a0 = E(x);
  for (int k = 0; k < D; ++k) v[k] += 0.5 * dt * a0[k];
  for (int k = 0; k < D; ++k) x[k] += dt * v[k];
  const Vec<D> a1 = E(x);
  for (int k = 0; k < D; ++k) v[k] += 0.5 * dt * a1[k];
  return phase_point<D>(x, v);
}

/// Jacobian determinant of the frozen-field one-step map at `probe` by
/// central differences with step `eps`.
template <int D>
double volume_check(const typename FrozenField<D>::Function& E, double dt, const Vec<2 * D>& probe,
                    double eps = 1e-5) {
  constexpr int M = 2 * D;
  Eigen::Matrix<double, M, M> J;
  for (int j = 0; j < M; ++j) {
    Vec<M> zp = probe, zm = probe;
    zp[j] += eps;
    zm[j] -= eps;
    const Vec<M> fp = leapfrog_map<D>(E, dt, zp);
    const Vec<M> fm = leapfrog_map<D>(E, dt, zm);
    for (int i = 0; i < M; ++i) J(i, j) = (fp[i] - fm[i]) / (2.0 * eps);
  }
  return J.determinant();
}

}  // namespace vpflow
