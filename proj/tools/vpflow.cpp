// vpflow command-line driver.
//
// Exit codes: 0 ok, 1 usage, 2 configuration, 3 numerical fault, 4 I/O.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vpflow/vpflow.hpp"

namespace fs = std::filesystem;
using namespace vpflow;

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kNumerical = 3, kIo = 4 };

/// Flags shared by run and run-eulerian, kept as text so every value goes
/// through the config parser.
struct RunFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::vector<std::string> params;
  std::string restart;

  void attach(CLI::App* app, bool eulerian) {
    app->add_option("--config", config_file, "flat key = value configuration file");
    auto opt = [&](const char* flag, const char* key, const char* help) {
      app->add_option_function<std::string>(flag, [this, key](const std::string& v) { values[key] = v; }, help);
    };
    opt("--scenario", "scenario", "landau | two_stream | bump2d | bump3d");
    opt("--dt", "dt", "time step");
    opt("--t-end", "t_end", "final time");
    opt("--mollify-n", "mollify_n", "mollification level n (or inf)");
    opt("--seed", "seed", "sampling seed");
    opt("--out", "out", "output directory");
    opt("--output-every", "output_every", "diagnostics cadence in steps");
    opt("--grid-cells", "grid_cells", "cells per axis of the field grid");
    app->add_option("--param", params, "scenario parameter override name=value")->take_all();
    if (eulerian) {
      opt("--velocity-nodes", "velocity_nodes", "velocity nodes of the phase lattice");
    } else {
      opt("--particles", "particles", "particle count");
      opt("--escape-radius", "escape_radius", "phase-space escape radius");
      app->add_option("--restart", restart, "continue from a checkpoint");
    }
  }

  RunConfig build(RunConfig base = {}) const {
    if (!config_file.empty()) base = RunConfig::load(config_file, base);
    for (const auto& [k, v] : values) base.set(k, v);
    for (const auto& p : params) {
      const auto eq = p.find('=');
      if (eq == std::string::npos) throw ConfigError("--param expects name=value, got '" + p + "'");
      base.set("param." + p.substr(0, eq), p.substr(eq + 1));
    }
    return base;
  }
};

void print_summary(const std::vector<DiagnosticsRecord>& records, const fs::path& out) {
  if (records.empty()) return;
  const auto& a = records.front();
  const auto& b = records.back();
  std::printf("t=%.6g steps=%lld mass=%.17g energy %.10g -> %.10g certificate=%.6g\n", b.t,
              static_cast<long long>(b.step), b.mass_total, a.total_energy, b.total_energy, b.noblowup_partial);
  std::printf("outputs in %s\n", out.string().c_str());
}

template <int D>
int run_fresh(const RunConfig& cfg) {
  LagrangianRun<D> run(cfg);
  const auto records = execute_lagrangian(run);
  print_summary(records, run.config().out);
  return kOk;
}

template <int D>
int run_restart(const RunFlags& flags) {
  auto ckpt = read_checkpoint<D>(flags.restart);
  const RunConfig cfg = flags.build(config_from_checkpoint_text(ckpt.config_text));
  LagrangianRun<D> run(cfg, std::move(ckpt));
  const auto records = execute_lagrangian(run);
  print_summary(records, run.config().out);
  return kOk;
}

int cmd_run(const RunFlags& flags) {
  if (!flags.restart.empty()) {
    switch (checkpoint_dimension(flags.restart)) {
      case 1: return run_restart<1>(flags);
      case 2: return run_restart<2>(flags);
      case 3: return run_restart<3>(flags);
      default: throw IoError("checkpoint has unsupported dimension");
    }
  }
  const RunConfig cfg = flags.build();
  switch (cfg.make_scenario().dim) {
    case 1: return run_fresh<1>(cfg);
    case 2: return run_fresh<2>(cfg);
    case 3: return run_fresh<3>(cfg);
    default: throw ConfigError("unsupported scenario dimension");
  }
}

int cmd_run_eulerian(const RunFlags& flags) {
  EulerianRun run(flags.build());
  const auto records = execute_eulerian(run);
  print_summary(records, run.config().out);
  std::printf("clamped mass %.3g\n", run.clamped_mass());
  return kOk;
}

int cmd_compare(const std::string& ckpt_path, const std::string& grid_path, const std::string& out) {
  if (checkpoint_dimension(ckpt_path) != 1) throw InputError("compare needs a 1D particle checkpoint");
  const auto ckpt = read_checkpoint<1>(ckpt_path);
  const auto file = read_grid(grid_path);
  const auto lattice = phase_grid_from_file(file);
  const auto particle_spec = KernelSpec::parse(ckpt.kernel_text);
  const auto grid_kernel = file.header_value("kernel");
  if (grid_kernel.empty()) throw IoError("phase grid file has no kernel spec");
  const auto grid_spec = KernelSpec::parse(grid_kernel);
  if (std::abs(ckpt.ensemble.t - lattice.t) > 1e-9 * std::max(1.0, lattice.t))
    throw InputError("compare: particle time " + format_double(ckpt.ensemble.t) + " differs from grid time " +
                     format_double(lattice.t));
  const double d = cross_validate(ckpt.ensemble, particle_spec, lattice, grid_spec);
  std::printf("l1_distance=%.17g t=%.17g\n", d, lattice.t);
  if (!out.empty()) {
    std::ostringstream os;
    os << "# kernel=" << particle_spec.to_string() << "\nt,l1_distance\n"
       << format_double(lattice.t) << "," << format_double(d) << "\n";
    write_text_file(out, os.str());
  }
  return kOk;
}

template <int D>
void diagnose_one(const std::string& path, std::string& text, bool& first) {
  auto ckpt = read_checkpoint<D>(path);
  const RunConfig cfg = config_from_checkpoint_text(ckpt.config_text);
  LagrangianRun<D> run(cfg, std::move(ckpt));
  DiagnosticsCsv csv(run.bands(), default_casimir_ids());
  if (first) {
    text += csv.header(run.config().hash(), run.kernel(), run.config().scenario);
    first = false;
  }
  text += csv.row(run.measure());
}

int cmd_diagnose(const std::vector<std::string>& paths, const std::string& out) {
  std::string text;
  bool first = true;
  int dim = 0;
  for (const auto& p : paths) {
    const int d = checkpoint_dimension(p);
    if (dim != 0 && d != dim) throw InputError("diagnose: checkpoints of different dimensions");
    dim = d;
    switch (d) {
      case 1: diagnose_one<1>(p, text, first); break;
      case 2: diagnose_one<2>(p, text, first); break;
      case 3: diagnose_one<3>(p, text, first); break;
      default: throw IoError("checkpoint has unsupported dimension");
    }
  }
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text_file(out, text);
    std::printf("wrote %s\n", out.c_str());
  }
  return kOk;
}

DampingProfile profile_by_name(const std::string& name) {
  if (name == "constant") return DampingProfile::constant(1.0);
  if (name == "power") return DampingProfile::power_law(1.0, 2.0);
  if (name == "flux") return DampingProfile::from_flux_integrals({1.5, 3.0, 10.0, 40.0, 120.0, 500.0});
  throw ConfigError("unknown damping profile '" + name + "' (constant | power | flux)");
}

int cmd_compactify_demo(const std::string& profile, double dt, double t_end, const std::string& out) {
  if (!(dt > 0.0) || !(t_end > 0.0)) throw ConfigError("dt and t-end must be positive");
  DampedDiffeomorphism map(profile_by_name(profile));
  std::vector<Vec<2>> samples;
  for (int i = 0; i < 10000; ++i) {
    const double r = std::pow(10.0, -3.0 + 15.0 * i / 9999.0);
    const double a = 0.61803398875 * i * 2.0 * kPi;
    samples.push_back({r * std::cos(a), r * std::sin(a)});
  }
  const auto rep = gradient_bound_check<2>(map, samples);
  std::printf("profile %s: c0=%.12g r_lin=%.6g r0=%.6g\n", profile.c_str(), map.c0(), map.linear_radius(), map.r0());
  std::printf("gradient bound: global %s decay %s majorant %s (%zu samples)\n", rep.global_ok ? "ok" : "FAIL",
              rep.decay_ok ? "ok" : "FAIL", rep.majorant_ok ? "ok" : "FAIL", rep.checked);

  // z' = (v, x + x^3) from (1, 0) leaves every compact set in finite time.
  auto blowup = [](const Vec<2>& z) { return Vec<2>{z[1], z[0] + z[0] * z[0] * z[0]}; };
  const auto tr = integrate_on_sphere<2>(map, Vec<2>{1.0, 0.0}, blowup, dt, t_end);
  if (tr.reached_north)
    std::printf("trajectory reaches the north pole at t=%.12g (%zu rejected steps)\n", tr.arrival_time,
                tr.rejected_steps);
  else
    std::printf("trajectory stays away from the north pole up to t=%.6g\n", t_end);

  if (!out.empty()) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory '" + out + "'");
    std::ostringstream table;
    map.write_csv(table);
    write_text_file(fs::path(out) / "psi0.csv", table.str());
    std::ostringstream traj;
    traj << "# damping " << profile << "\nt,y0,y1,y2,north_distance\n";
    for (std::size_t i = 0; i < tr.t.size(); ++i)
      traj << format_double(tr.t[i]) << "," << format_double(tr.y[i][0]) << "," << format_double(tr.y[i][1]) << ","
           << format_double(tr.y[i][2]) << "," << format_double(distance_to_north(tr.y[i])) << "\n";
    write_text_file(fs::path(out) / "sphere_trajectory.csv", traj.str());
    std::printf("outputs in %s\n", out.c_str());
  }
  return kOk;
}

int cmd_kernel_check(const std::string& out) {
  bool all = true;
  auto report = [&](bool ok, const std::string& what, double err) {
    all = all && ok;
    std::printf("%s %s (error %.3e)\n", ok ? "PASS" : "FAIL", what.c_str(), err);
  };
  for (int d = 1; d <= 3; ++d) {
    for (int sigma : {1, -1}) {
      KernelSpec spec;
      spec.dim = d;
      spec.sigma = sigma;
      double err = 0.0;
      for (double r : {0.5, 1.0, 2.0}) err = std::max(err, std::abs(kernel_flux(spec, r) - sigma));
      report(err <= 1e-6, "flux d=" + std::to_string(d) + " sigma=" + std::to_string(sigma), err);
    }
    KernelSpec spec;
    spec.dim = d;
    spec.level = 4.0;
    KernelSpec exact = spec;
    exact.level = kInf;
    const KernelEvaluator kn(spec), k(exact);
    std::mt19937_64 rng(static_cast<std::uint64_t>(d));
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    double err = 0.0;
    for (int i = 0; i < 1000; ++i) {
      std::array<double, 3> x{u(rng), u(rng), u(rng)};
      double r2 = 0.0;
      for (int c = 0; c < d; ++c) r2 += x[static_cast<std::size_t>(c)] * x[static_cast<std::size_t>(c)];
      if (std::sqrt(r2) <= 0.25) continue;
      switch (d) {
        case 1: err = std::max(err, norm(kn(Vec<1>{x[0]}) - k(Vec<1>{x[0]}))); break;
        case 2: err = std::max(err, norm(kn(Vec<2>{x[0], x[1]}) - k(Vec<2>{x[0], x[1]}))); break;
        default: err = std::max(err, norm(kn(Vec<3>{x[0], x[1], x[2]}) - k(Vec<3>{x[0], x[1], x[2]}))); break;
      }
    }
    report(err <= 1e-8, "K_n = K outside 1/n, d=" + std::to_string(d) + " n=4", err);
    if (!out.empty()) {
      std::error_code ec;
      fs::create_directories(out, ec);
      if (ec) throw IoError("cannot create output directory '" + out + "'");
      std::ostringstream os;
      MollifiedKernel(spec).write_csv(os);
      write_text_file(fs::path(out) / ("kernel_d" + std::to_string(d) + ".csv"), os.str());
    }
  }
  return all ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vpflow: particle and phase-grid Vlasov-Poisson flows"};
  app.require_subcommand(1);

  RunFlags run_flags, eul_flags;
  auto* run = app.add_subcommand("run", "particle run");
  run_flags.attach(run, false);
  auto* run_e = app.add_subcommand("run-eulerian", "1D-1V phase-grid run");
  eul_flags.attach(run_e, true);

  std::string ckpt, grid, compare_out;
  auto* cmp = app.add_subcommand("compare", "L1 distance between a particle checkpoint and a phase grid");
  cmp->add_option("--checkpoint", ckpt, "particle checkpoint")->required();
  cmp->add_option("--phase-grid", grid, "phase grid file")->required();
  cmp->add_option("--out", compare_out, "CSV file for the result");

  std::vector<std::string> diag_paths;
  std::string diag_out;
  auto* diag = app.add_subcommand("diagnose", "recompute diagnostics from checkpoints");
  diag->add_option("checkpoints", diag_paths, "checkpoint files")->required();
  diag->add_option("--out", diag_out, "CSV output file (default stdout)");

  std::string profile = "power", demo_out;
  double demo_dt = 1e-3, demo_t = 10.0;
  auto* demo = app.add_subcommand("compactify-demo", "damped sphere map and a blow-up trajectory");
  demo->add_option("--profile", profile, "constant | power | flux");
  demo->add_option("--dt", demo_dt, "sphere time step");
  demo->add_option("--t-end", demo_t, "final time");
  demo->add_option("--out", demo_out, "output directory");

  std::string kc_out;
  auto* kc = app.add_subcommand("kernel-check", "flux and mollification oracles");
  kc->add_option("--out", kc_out, "directory for kernel profile CSVs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*run) return cmd_run(run_flags);
    if (*run_e) return cmd_run_eulerian(eul_flags);
    if (*cmp) return cmd_compare(ckpt, grid, compare_out);
    if (*diag) return cmd_diagnose(diag_paths, diag_out);
    if (*demo) return cmd_compactify_demo(profile, demo_dt, demo_t, demo_out);
    if (*kc) return cmd_kernel_check(kc_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kConfig;
  } catch (const InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kIo;
  } catch (const Error& e) {
    std::fprintf(stderr, "numerical fault: %s\n", e.what());
    return kNumerical;
  } catch (const std::bad_alloc&) {
    std::fprintf(stderr, "numerical fault: out of memory\n");
    return kNumerical;
  }
  return kUsage;
}
