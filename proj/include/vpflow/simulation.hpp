#pragma once

// Run orchestration for the particle and phase-grid solvers: stepping,
// output cadence, diagnostics records and checkpoint restart.

#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "vpflow/compactify.hpp"
#include "vpflow/diagnostics.hpp"
#include "vpflow/eulerian.hpp"
#include "vpflow/fields.hpp"
#include "vpflow/flow.hpp"
#include "vpflow/io.hpp"
#include "vpflow/scenarios.hpp"

namespace vpflow {

namespace detail {

/// V with grad V = -sigma E on a periodic line, from the four-point cubic
/// rule; returns sum V q dx with q the source. This is int (H_n * q) q for
/// the kernel that produced E.
inline double periodic_potential_energy(const std::vector<double>& E, const std::vector<double>& q, double dx,
                                        int sigma) {
  const int n = static_cast<int>(E.size());
  auto e = [&](int i) { return E[static_cast<std::size_t>(wrap_index(i, n))]; };
  std::vector<double> V(E.size(), 0.0);
  for (int i = 0; i + 1 < n; ++i)
    V[static_cast<std::size_t>(i + 1)] =
        V[static_cast<std::size_t>(i)] - sigma * dx * (-e(i - 1) + 13.0 * e(i) + 13.0 * e(i + 1) - e(i + 2)) / 24.0;
  double mean = 0.0;
  for (double v : V) mean += v;
  mean /= n;
  double s = 0.0;
  for (std::size_t i = 0; i < V.size(); ++i) s += (V[i] - mean) * q[i] * dx;
  return s;
}

}  // namespace detail

/// Particle run of one configuration. Construct fresh (sampling from the
/// scenario) or from a checkpoint; step() advances one leapfrog step and
/// keeps the no-blow-up certificate running.
template <int D>
class LagrangianRun {
 public:
  explicit LagrangianRun(const RunConfig& config)
      : cfg_(config.resolved()),
        init_(build_initial<D>(cfg_.make_scenario(), cfg_.mollify_n, cfg_.grid_cells)),
        ens_(init_.sample(cfg_.particles, cfg_.seed)),
        background_(init_.background(ens_.total_mass())),
        field_(init_.grid, init_.kernel, background_),
        stepper_(field_) {
    start_certificate();
  }

  LagrangianRun(const RunConfig& config, Checkpoint<D> ckpt)
      : cfg_(config.resolved()),
        init_(build_initial<D>(cfg_.make_scenario(), cfg_.mollify_n, cfg_.grid_cells)),
        ens_(std::move(ckpt.ensemble)),
        background_(init_.background(ens_.total_mass())),
        field_(init_.grid, init_.kernel, background_),
        stepper_(field_) {
    if (ckpt.extras.size() != 4) throw IoError("checkpoint lacks certificate state");
    cert_.restore({ckpt.extras[0], ckpt.extras[1], ckpt.extras[2], ckpt.extras[3]});
  }

  const RunConfig& config() const { return cfg_; }
  const KernelSpec& kernel() const { return init_.kernel; }
  const GridSpec<D>& grid() const { return init_.grid; }
  const Scenario& scenario() const { return init_.scenario; }
  const ParticleEnsemble<D>& ensemble() const { return ens_; }
  ParticleEnsemble<D>& ensemble() { return ens_; }
  const std::vector<double>& background() const { return background_; }
  double certificate() const { return cert_.value(); }

  std::vector<int> bands() const {
    std::set<int> b(ens_.band.begin(), ens_.band.end());
    return {b.begin(), b.end()};
  }

  bool finished() const { return ens_.step >= cfg_.total_steps(); }

  void step() {
    stepper_.step(ens_, cfg_.dt);
    cert_.add(ens_.t, certificate_integrand<D>(ens_, std::span<const Vec<D>>(stepper_.accelerations())));
    if (detect_escape(ens_, cfg_.escape_radius) > 0) stepper_.invalidate();
  }

  bool at_output() const { return ens_.step % cfg_.output_every == 0 || finished(); }

  /// Diagnostics of the current state.
  DiagnosticsRecord measure() {
    DiagnosticsRecord r;
    r.t = ens_.t;
    r.step = ens_.step;
    r.mass_total = ens_.total_mass();
    r.mass_active = ens_.active_mass();
    r.mass_per_band = ens_.band_masses();
    r.kinetic = kinetic_energy(ens_);
    const auto dep = deposit(ens_, init_.grid);
    if constexpr (D == 1) {
      const auto E = field_.solver().solve(dep.rho, background_);
      std::vector<double> Ex(E.size()), q(dep.rho.size());
      double mean = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) {
        q[i] = dep.rho[i] - (background_.empty() ? 0.0 : background_[i]);
        mean += q[i];
      }
      mean /= static_cast<double>(q.size());
      for (std::size_t i = 0; i < q.size(); ++i) {
        q[i] -= mean;
        Ex[i] = E[i][0];
        r.potential_E2 += Ex[i] * Ex[i] * init_.grid.spacing;
      }
      r.potential_H = detail::periodic_potential_energy(Ex, q, init_.grid.spacing, init_.kernel.sigma);
    } else {
      const auto forms = potential_two_forms<D>(dep.rho, init_.grid, init_.kernel, background_);
      r.potential_H = forms.potential_H;
      r.potential_E2 = forms.potential_E2;
    }
    r.total_energy = r.kinetic + init_.kernel.sigma * r.potential_H;
    for (const auto& id : default_casimir_ids()) r.casimir_values[id] = casimir(ens_, id);
    r.noblowup_partial = cert_.value();
    return r;
  }

  Checkpoint<D> checkpoint() const {
    Checkpoint<D> c;
    c.ensemble = ens_;
    c.config_text = cfg_.serialize();
    c.kernel_text = init_.kernel.to_string();
    const auto s = cert_.state();
    c.extras.assign(s.begin(), s.end());
    return c;
  }

  /// Particle density and field on the grid at the current state.
  std::pair<std::vector<double>, std::vector<Vec<D>>> grid_fields() {
    auto dep = deposit(ens_, init_.grid);
    auto E = field_.solver().solve(dep.rho, background_);
    return {std::move(dep.rho), std::move(E)};
  }

 private:
  void start_certificate() {
    std::vector<Vec<D>> acc;
    field_.accelerations(ens_, acc);
    cert_.add(ens_.t, certificate_integrand<D>(ens_, std::span<const Vec<D>>(acc)));
  }

  RunConfig cfg_;
  InitialData<D> init_;
  ParticleEnsemble<D> ens_;
  std::vector<double> background_;
  SelfConsistentField<D> field_;
  LeapfrogStepper<D, SelfConsistentField<D>> stepper_;
  NoBlowupAccumulator cert_;
};

/// Phase-grid run of a 1D scenario.
class EulerianRun {
 public:
  explicit EulerianRun(const RunConfig& config)
      : cfg_(config.resolved()), scenario_(cfg_.make_scenario()), field_(cfg_.kernel()) {
    if (scenario_.dim != 1) throw ConfigError("run-eulerian needs a 1D scenario");
    const auto f0 = initial_density<1>(scenario_);
    g_ = PhaseGridFunction::sample(cfg_.grid_cells, cfg_.velocity_nodes, scenario_.x_lo,
                                   scenario_.x_hi - scenario_.x_lo, scenario_.v_hi,
                                   [&](double x, double v) { return f0(Vec<1>{x}, Vec<1>{v}); });
  }

  const RunConfig& config() const { return cfg_; }
  const KernelSpec& kernel() const { return field_.spec(); }
  const PhaseGridFunction& state() const { return g_; }
  PhaseGridFunction& state() { return g_; }
  std::int64_t steps() const { return steps_; }
  bool finished() const { return steps_ >= cfg_.total_steps(); }
  bool at_output() const { return steps_ % cfg_.output_every == 0 || finished(); }
  double clamped_mass() const { return clamped_; }

  void step() {
    clamped_ += sl_step(g_, field_, cfg_.dt).clamped_mass;
    ++steps_;
  }

  DiagnosticsRecord measure() const {
    DiagnosticsRecord r;
    r.t = g_.t;
    r.step = steps_;
    r.mass_total = r.mass_active = g_.mass();
    r.kinetic = kinetic_energy(g_);
    const auto rho = marginal_density(g_);
    const auto E = field_.solve(rho, g_.dx());
    std::vector<double> q(rho.size());
    double mean = 0.0;
    for (double v : rho) mean += v;
    mean /= static_cast<double>(rho.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
      q[i] = rho[i] - mean;
      r.potential_E2 += E[i] * E[i] * g_.dx();
    }
    r.potential_H = detail::periodic_potential_energy(E, q, g_.dx(), field_.spec().sigma);
    r.total_energy = r.kinetic + field_.spec().sigma * r.potential_H;
    for (const auto& id : default_casimir_ids()) r.casimir_values[id] = casimir(g_, id);
    return r;
  }

 private:
  RunConfig cfg_;
  Scenario scenario_;
  EulerianField field_;
  PhaseGridFunction g_;
  std::int64_t steps_ = 0;
  double clamped_ = 0.0;
};

/// Runs a particle configuration to its end time and writes config.txt,
/// diagnostics.csv, diagnostics.gnuplot, checkpoint.bin, rho.bin and
/// field.bin into cfg.out. On a numerical fault the CSV rows so far and a
/// FAILED marker are written before the exception propagates.
template <int D>
std::vector<DiagnosticsRecord> execute_lagrangian(LagrangianRun<D>& run) {
  namespace fs = std::filesystem;
  const auto& cfg = run.config();
  const fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
  const std::string hash = cfg.hash();
  write_text_file(dir / "config.txt", "# config_hash=" + hash + "\n# kernel=" + run.kernel().to_string() +
                                          "\n" + cfg.serialize());
  DiagnosticsCsv csv(run.bands(), default_casimir_ids());
  std::string text = csv.header(hash, run.kernel(), cfg.scenario);
  std::vector<DiagnosticsRecord> records;
  auto emit = [&] {
    records.push_back(run.measure());
    text += csv.row(records.back());
  };
  try {
    emit();
    while (!run.finished()) {
      run.step();
      if (run.at_output()) emit();
    }
  } catch (const Error& e) {
    write_text_file(dir / "diagnostics.csv", text);
    write_failure_marker(dir, e.what(), run.ensemble().t, run.ensemble().step);
    throw;
  }
  write_text_file(dir / "diagnostics.csv", text);
  write_text_file(dir / "diagnostics.gnuplot", gnuplot_script("diagnostics.csv", cfg.scenario));
  write_checkpoint(dir / "checkpoint.bin", run.checkpoint());
  const std::string header = output_header(hash, run.kernel(), cfg.scenario);
  auto [rho, E] = run.grid_fields();
  write_grid(dir / "rho.bin", grid_file<D>(run.grid(), 1, std::move(rho), header));
  std::vector<double> flat;
  flat.reserve(E.size() * D);
  for (const auto& e : E) flat.insert(flat.end(), e.begin(), e.end());
  write_grid(dir / "field.bin", grid_file<D>(run.grid(), D, std::move(flat), header));
  return records;
}

/// Phase-grid counterpart: config.txt, diagnostics.csv, diagnostics.gnuplot
/// and phase.bin (final lattice).
inline std::vector<DiagnosticsRecord> execute_eulerian(EulerianRun& run) {
  namespace fs = std::filesystem;
  const auto& cfg = run.config();
  const fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
  const std::string hash = cfg.hash();
  write_text_file(dir / "config.txt", "# config_hash=" + hash + "\n# kernel=" + run.kernel().to_string() +
                                          "\n" + cfg.serialize());
  DiagnosticsCsv csv({}, default_casimir_ids());
  std::string text = csv.header(hash, run.kernel(), cfg.scenario);
  std::vector<DiagnosticsRecord> records;
  auto emit = [&] {
    records.push_back(run.measure());
    text += csv.row(records.back());
  };
  try {
    emit();
    while (!run.finished()) {
      run.step();
      if (run.at_output()) emit();
    }
  } catch (const Error& e) {
    write_text_file(dir / "diagnostics.csv", text);
    write_failure_marker(dir, e.what(), run.state().t, run.steps());
    throw;
  }
  write_text_file(dir / "diagnostics.csv", text);
  write_text_file(dir / "diagnostics.gnuplot", gnuplot_script("diagnostics.csv", cfg.scenario));
  write_grid(dir / "phase.bin", grid_file(run.state(), output_header(hash, run.kernel(), cfg.scenario)));
  return records;
}

/// Configuration stored in a checkpoint, with optional overrides.
inline RunConfig config_from_checkpoint_text(const std::string& text) {
  std::string body;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line))
    if (!line.empty() && line[0] != '#') body += line + "\n";
  return RunConfig::parse(body);
}

}  // namespace vpflow
