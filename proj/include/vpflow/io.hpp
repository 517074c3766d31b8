#pragma once

// Run configuration, binary checkpoints and grids, diagnostics CSV and
// gnuplot scripts.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vpflow/core.hpp"
#include "vpflow/diagnostics.hpp"
#include "vpflow/kernels.hpp"
#include "vpflow/particles.hpp"
#include "vpflow/scenarios.hpp"

namespace vpflow {

/// Flat key = value run configuration. Zero for particles, mollify_n,
/// grid_cells or velocity_nodes means "scenario default".
struct RunConfig {
  std::string scenario = "landau";
  double dt = 0.1;
  double t_end = 10.0;
  std::size_t particles = 0;
  double mollify_n = 0.0;
  double escape_radius = 1e6;
  std::int64_t output_every = 10;
  std::uint64_t seed = 1;
  std::string out = "out";
  int grid_cells = 0;
  int velocity_nodes = 0;
  std::map<std::string, double> params;  ///< scenario overrides, key "param.<name>"

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  Scenario make_scenario() const { return Scenario::named(scenario, params); }

  /// Copy with scenario defaults filled in, validated.
  RunConfig resolved() const {
    RunConfig c = *this;
    const Scenario s = make_scenario();
    if (c.particles == 0) c.particles = s.particles;
    if (c.mollify_n == 0.0) c.mollify_n = s.mollify_n;
    if (c.grid_cells == 0) c.grid_cells = s.grid_cells;
    if (c.velocity_nodes == 0) c.velocity_nodes = 2 * c.grid_cells + 1;
    c.validate(s);
    return c;
  }

  void validate(const Scenario& s) const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ConfigError("t_end must be nonnegative");
    if (particles == 0) throw ConfigError("particle count must be positive");
    if (!(mollify_n >= 1.0)) throw ConfigError("mollify_n must be >= 1 or inf");
    if (!(escape_radius > 0.0)) throw ConfigError("escape_radius must be positive");
    if (output_every < 1) throw ConfigError("output_every must be >= 1");
    if (grid_cells < 4) throw ConfigError("grid_cells must be >= 4");
    if (velocity_nodes < 4) throw ConfigError("velocity_nodes must be >= 4");
    const double h = (s.x_hi - s.x_lo) / (s.periodic ? grid_cells : grid_cells - 1);
    if (std::isfinite(mollify_n) && mollify_n * h > 1.0 + 1e-12)
      throw ConfigError("mollify_n * grid spacing = " + format_double(mollify_n * h) + " exceeds 1");
  }

  KernelSpec kernel() const {
    const Scenario s = make_scenario();
    KernelSpec k;
    k.dim = s.dim;
    k.sigma = s.sigma;
    k.level = mollify_n == 0.0 ? s.mollify_n : mollify_n;
    return k;
  }

  std::int64_t total_steps() const { return static_cast<std::int64_t>(std::llround(t_end / dt)); }

  std::string serialize() const {
    std::ostringstream os;
    auto num = [](double v) { return std::isinf(v) ? std::string("inf") : format_double(v); };
    os << "scenario = " << scenario << "\n"
       << "dt = " << num(dt) << "\n"
       << "t_end = " << num(t_end) << "\n"
       << "particles = " << particles << "\n"
       << "mollify_n = " << num(mollify_n) << "\n"
       << "escape_radius = " << num(escape_radius) << "\n"
       << "output_every = " << output_every << "\n"
       << "seed = " << seed << "\n"
       << "out = " << out << "\n"
       << "grid_cells = " << grid_cells << "\n"
       << "velocity_nodes = " << velocity_nodes << "\n";
    for (const auto& [k, v] : params) os << "param." << k << " = " << num(v) << "\n";
    return os.str();
  }

  /// Hash of the resolved configuration, excluding the output path.
  std::string hash() const {
    RunConfig c = resolved();
    c.out.clear();
    return hex64(fnv1a64(c.serialize()));
  }

  /// Applies one key = value assignment.
  void set(const std::string& key, const std::string& value) {
    auto as_double = [&](const std::string& v) {
      if (v == "inf") return kInf;
      try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
      } catch (const std::exception&) {
        throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
      }
    };
    auto as_int = [&](const std::string& v) -> long long {
      try {
        std::size_t used = 0;
        const long long i = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
      } catch (const std::exception&) {
        throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
      }
    };
    if (key == "scenario") scenario = value;
    else if (key == "dt") dt = as_double(value);
    else if (key == "t_end") t_end = as_double(value);
    else if (key == "particles") {
      const long long n = as_int(value);
      if (n < 0) throw ConfigError("particles must be nonnegative");
      particles = static_cast<std::size_t>(n);
    } else if (key == "mollify_n") mollify_n = as_double(value);
    else if (key == "escape_radius") escape_radius = as_double(value);
    else if (key == "output_every") output_every = as_int(value);
    else if (key == "seed") {
      const long long n = as_int(value);
      if (n < 0) throw ConfigError("seed must be nonnegative");
      seed = static_cast<std::uint64_t>(n);
    } else if (key == "out") out = value;
    else if (key == "grid_cells") grid_cells = static_cast<int>(as_int(value));
    else if (key == "velocity_nodes") velocity_nodes = static_cast<int>(as_int(value));
    else if (key.rfind("param.", 0) == 0 && key.size() > 6) params[key.substr(6)] = as_double(value);
    else throw ConfigError("unknown configuration key '" + key + "'");
  }

  /// Parses "key = value" lines; '#' starts a comment.
  static RunConfig parse(const std::string& text) { return parse(text, RunConfig()); }
  static RunConfig parse(const std::string& text, RunConfig base) {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
  }

  static RunConfig load(const std::filesystem::path& path);
  static RunConfig load(const std::filesystem::path& path, RunConfig base);
};

// ---------------------------------------------------------------------------
// Binary helpers

namespace detail {

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path) : path_(path), os_(path, std::ios::binary) {
    if (!os_) throw IoError("cannot open '" + path.string() + "' for writing");
  }
  template <class T>
  void put(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  template <class T>
  void put_array(const std::vector<T>& v) {
    if (!v.empty()) os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void raw(const char* p, std::size_t n) { os_.write(p, static_cast<std::streamsize>(n)); }
  void close() {
    os_.close();
    if (!os_) throw IoError("write to '" + path_.string() + "' failed");
  }

 private:
  std::filesystem::path path_;
  std::ofstream os_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path) : path_(path), is_(path, std::ios::binary) {
    if (!is_) throw IoError("cannot open '" + path.string() + "'");
  }
  template <class T>
  T get() {
    T v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof v);
    check();
    return v;
  }
  template <class T>
  std::vector<T> get_array(std::size_t n) {
    if (n > (std::size_t{1} << 34)) throw IoError("'" + path_.string() + "': implausible array length");
    std::vector<T> v(n);
    if (n) is_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    check();
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    if (n > (1u << 24)) throw IoError("'" + path_.string() + "': implausible string length");
    std::string s(n, '\0');
    is_.read(s.data(), n);
    check();
    return s;
  }
  void expect_magic(const char (&magic)[9]) {
    char buf[8];
    is_.read(buf, 8);
    check();
    if (std::memcmp(buf, magic, 8) != 0) throw IoError("'" + path_.string() + "' is not a " + magic + " file");
  }
  void expect_end() {
    is_.peek();
    if (!is_.eof()) throw IoError("'" + path_.string() + "' has trailing bytes");
  }

 private:
  void check() {
    if (!is_) throw IoError("'" + path_.string() + "' is truncated");
  }
  std::filesystem::path path_;
  std::ifstream is_;
};

}  // namespace detail

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << text;
  os.close();
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

inline RunConfig RunConfig::load(const std::filesystem::path& path, RunConfig base) {
  return parse(read_text_file(path), std::move(base));
}

inline RunConfig RunConfig::load(const std::filesystem::path& path) { return load(path, RunConfig()); }

// ---------------------------------------------------------------------------
// Checkpoints

/// Ensemble plus the serialized configuration and any extra solver state
/// needed to continue bitwise.
template <int D>
struct Checkpoint {
  ParticleEnsemble<D> ensemble;
  std::string config_text;
  std::string kernel_text;
  std::vector<double> extras;
};

inline constexpr char kCheckpointMagic[9] = "VPFCKPT1";
inline constexpr char kGridMagic[9] = "VPFGRID1";

template <int D>
void write_checkpoint(const std::filesystem::path& path, const Checkpoint<D>& c) {
  const auto& e = c.ensemble;
  detail::BinaryWriter w(path);
  w.raw(kCheckpointMagic, 8);
  w.put(std::uint32_t{1});
  w.put(static_cast<std::uint32_t>(D));
  w.put(static_cast<std::uint64_t>(e.size()));
  w.put(e.t);
  w.put(e.step);
  w.put(e.band_offset);
  w.put(e.seed);
  w.put_string(c.config_text);
  w.put_string(c.kernel_text);
  w.put(static_cast<std::uint64_t>(c.extras.size()));
  w.put_array(c.extras);
  w.put_array(e.x);
  w.put_array(e.v);
  w.put_array(e.w);
  w.put_array(e.f0);
  std::vector<std::int32_t> band(e.band.begin(), e.band.end());
  w.put_array(band);
  w.put_array(e.status);
  w.put_array(e.t_plus);
  w.put_array(e.t_minus);
  w.close();
}

/// Dimension stored in a checkpoint header.
inline int checkpoint_dimension(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  r.expect_magic(kCheckpointMagic);
  if (r.get<std::uint32_t>() != 1) throw IoError("unsupported checkpoint version");
  return static_cast<int>(r.get<std::uint32_t>());
}

template <int D>
Checkpoint<D> read_checkpoint(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  r.expect_magic(kCheckpointMagic);
  if (r.get<std::uint32_t>() != 1) throw IoError("unsupported checkpoint version");
  if (r.get<std::uint32_t>() != static_cast<std::uint32_t>(D)) throw IoError("checkpoint dimension mismatch");
  Checkpoint<D> c;
  auto& e = c.ensemble;
  const auto n = static_cast<std::size_t>(r.get<std::uint64_t>());
  e.t = r.get<double>();
  e.step = r.get<std::int64_t>();
  e.band_offset = r.get<double>();
  e.seed = r.get<std::uint64_t>();
  c.config_text = r.get_string();
  c.kernel_text = r.get_string();
  c.extras = r.get_array<double>(static_cast<std::size_t>(r.get<std::uint64_t>()));
  e.x = r.get_array<Vec<D>>(n);
  e.v = r.get_array<Vec<D>>(n);
  e.w = r.get_array<double>(n);
  e.f0 = r.get_array<double>(n);
  const auto band = r.get_array<std::int32_t>(n);
  e.band.assign(band.begin(), band.end());
  e.status = r.get_array<ParticleStatus>(n);
  e.t_plus = r.get_array<double>(n);
  e.t_minus = r.get_array<double>(n);
  r.expect_end();
  return c;
}

// ---------------------------------------------------------------------------
// Flat-binary grids

/// Row-major lattice values (last axis fastest), `components` interleaved
/// per node. The header text carries the config hash and kernel spec.
struct GridFile {
  std::vector<int> dims;
  std::vector<double> origin;
  std::vector<double> spacing;
  int components = 1;
  std::string header;
  std::vector<double> data;

  std::size_t nodes() const {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    return n;
  }

  /// Value of `key=` in the header, or empty.
  std::string header_value(const std::string& key) const {
    std::istringstream is(header);
    std::string line;
    while (std::getline(is, line))
      if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
    return {};
  }
};

inline void write_grid(const std::filesystem::path& path, const GridFile& g) {
  if (g.dims.size() != g.origin.size() || g.dims.size() != g.spacing.size())
    throw InputError("grid file: rank mismatch");
  if (g.data.size() != g.nodes() * static_cast<std::size_t>(g.components))
    throw InputError("grid file: payload size mismatch");
  detail::BinaryWriter w(path);
  w.raw(kGridMagic, 8);
  w.put(static_cast<std::uint32_t>(g.dims.size()));
  for (int d : g.dims) w.put(static_cast<std::int32_t>(d));
  w.put(static_cast<std::uint32_t>(g.components));
  w.put_array(g.origin);
  w.put_array(g.spacing);
  w.put_string(g.header);
  w.put_array(g.data);
  w.close();
}

inline GridFile read_grid(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  r.expect_magic(kGridMagic);
  GridFile g;
  const auto rank = r.get<std::uint32_t>();
  if (rank == 0 || rank > 8) throw IoError("grid file: bad rank");
  for (std::uint32_t k = 0; k < rank; ++k) {
    const int d = r.get<std::int32_t>();
    if (d <= 0) throw IoError("grid file: bad extent");
    g.dims.push_back(d);
  }
  g.components = static_cast<int>(r.get<std::uint32_t>());
  g.origin = r.get_array<double>(rank);
  g.spacing = r.get_array<double>(rank);
  g.header = r.get_string();
  g.data = r.get_array<double>(g.nodes() * static_cast<std::size_t>(g.components));
  r.expect_end();
  return g;
}

template <int D>
GridFile grid_file(const GridSpec<D>& grid, int components, std::vector<double> data, std::string header) {
  GridFile g;
  for (int k = 0; k < D; ++k) {
    g.dims.push_back(grid.cells[k]);
    g.origin.push_back(grid.origin[k]);
    g.spacing.push_back(grid.spacing);
  }
  g.components = components;
  g.header = std::move(header);
  g.data = std::move(data);
  return g;
}

/// Phase lattice as a 2D payload (axes v, x).
inline GridFile grid_file(const PhaseGridFunction& f, std::string header) {
  GridFile g;
  g.dims = {f.nv, f.nx};
  g.origin = {-f.vmax, f.x0};
  g.spacing = {f.dv(), f.dx()};
  g.header = std::move(header) + "t=" + format_double(f.t) + "\n";
  g.data = f.f;
  return g;
}

inline PhaseGridFunction phase_grid_from_file(const GridFile& g) {
  if (g.dims.size() != 2 || g.components != 1) throw InputError("grid file is not a phase lattice");
  PhaseGridFunction f(g.dims[1], g.dims[0], g.origin[1], g.spacing[1] * g.dims[1], -g.origin[0]);
  f.f = g.data;
  const auto t = g.header_value("t");
  if (!t.empty()) f.t = std::stod(t);
  return f;
}

inline std::string output_header(const std::string& config_hash, const KernelSpec& kernel,
                                 const std::string& scenario) {
  return "config_hash=" + config_hash + "\nkernel=" + kernel.to_string() + "\nscenario=" + scenario + "\n";
}

// ---------------------------------------------------------------------------
// Diagnostics CSV

/// Fixed-schema CSV: '#' header lines with config hash and kernel spec,
/// then one column line and one row per record. Band columns are fixed by
/// the band set passed at construction.
class DiagnosticsCsv {
 public:
  DiagnosticsCsv(std::vector<int> bands, std::vector<std::string> casimirs)
      : bands_(std::move(bands)), casimirs_(std::move(casimirs)) {}

  std::vector<std::string> columns() const {
    std::vector<std::string> c{"t", "step", "mass_total", "mass_active", "kinetic", "potential_H",
                               "potential_E2", "total_energy"};
    for (const auto& id : casimirs_) c.push_back("casimir_" + id);
    c.push_back("noblowup_partial");
    c.push_back("phi_sep");
    for (int b : bands_) c.push_back("band_" + std::to_string(b));
    return c;
  }

  std::string header(const std::string& config_hash, const KernelSpec& kernel, const std::string& scenario) const {
    std::ostringstream os;
    os << "# vpflow diagnostics\n# config_hash=" << config_hash << "\n# kernel=" << kernel.to_string()
       << "\n# scenario=" << scenario << "\n";
    const auto cols = columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << "\n";
    return os.str();
  }

  std::string row(const DiagnosticsRecord& r) const {
    std::ostringstream os;
    os << format_double(r.t) << "," << r.step << "," << format_double(r.mass_total) << ","
       << format_double(r.mass_active) << "," << format_double(r.kinetic) << "," << format_double(r.potential_H)
       << "," << format_double(r.potential_E2) << "," << format_double(r.total_energy);
    for (const auto& id : casimirs_) {
      auto it = r.casimir_values.find(id);
      os << "," << (it == r.casimir_values.end() ? std::string() : format_double(it->second));
    }
    os << "," << format_double(r.noblowup_partial) << "," << (r.phi_sep ? format_double(*r.phi_sep) : "");
    for (int b : bands_) {
      auto it = r.mass_per_band.find(b);
      os << "," << format_double(it == r.mass_per_band.end() ? 0.0 : it->second);
    }
    os << "\n";
    return os.str();
  }

 private:
  std::vector<int> bands_;
  std::vector<std::string> casimirs_;
};

struct CsvTable {
  std::map<std::string, std::string> meta;  ///< from "# key=value" lines
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw InputError("CSV has no column '" + name + "'");
    const auto k = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r[k]);
    return out;
  }
};

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) t.meta[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    if (t.columns.empty()) {
      t.columns = split(line);
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != t.columns.size()) throw IoError("CSV row has wrong number of cells");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(c.empty() ? std::nan("") : std::stod(c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Gnuplot script plotting energies and masses from a diagnostics CSV.
inline std::string gnuplot_script(const std::string& csv_name, const std::string& title) {
  std::ostringstream os;
  os << "# gnuplot script for " << csv_name << "\n"
     << "set datafile separator ','\n"
     << "set datafile commentschars '#'\n"
     << "set key autotitle columnhead\n"
     << "set terminal pngcairo size 1000,700\n"
     << "set output '" << csv_name << ".energy.png'\n"
     << "set title '" << title << " energies'\n"
     << "set xlabel 't'\n"
     << "plot '" << csv_name << "' using 't':'kinetic' with lines, \\\n"
     << "     '' using 't':'potential_H' with lines, \\\n"
     << "     '' using 't':'total_energy' with lines\n"
     << "set output '" << csv_name << ".mass.png'\n"
     << "set title '" << title << " mass and certificate'\n"
     << "plot '" << csv_name << "' using 't':'mass_active' with lines, \\\n"
     << "     '' using 't':'noblowup_partial' with lines axes x1y2\n";
  return os.str();
}

/// Marker written next to partial outputs when a run aborts.
inline void write_failure_marker(const std::filesystem::path& dir, const std::string& what, double t,
                                 std::int64_t step) {
  std::ostringstream os;
  os << "status=failed\nt=" << format_double(t) << "\nstep=" << step << "\nreason=" << what << "\n";
  write_text_file(dir / "FAILED", os.str());
}

}  // namespace vpflow
