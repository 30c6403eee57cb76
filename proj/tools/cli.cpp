#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "kleinbox/config.hpp"
#include "kleinbox/dirac_continuum.hpp"
#include "kleinbox/export.hpp"
#include "kleinbox/pipeline.hpp"
#include "kleinbox/spectroscopy.hpp"
#include "kleinbox/ssh_lattice.hpp"

namespace kleinbox::cli {
namespace {

namespace fs = std::filesystem;
using io::Json;

constexpr const char* kVersion = "0.1.0";

struct Options {
  std::string command;
  std::string preset = "e1";
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> seeds;
  std::string out_dir = "kleinbox-out";
  std::string format = "csv";
  std::optional<double> gamma;
  std::optional<double> noise;
  std::optional<double> grid_step;
  std::optional<double> v0;
  bool symmetric_check = false;
  bool summary = false;
};

/// Failed in-run acceptance check.
struct AcceptanceFailure : Error {
  using Error::Error;
};

RunConfig assemble(const Options& o) {
  RunConfig run = run_config_for(preset(o.preset));
  if (!o.config_path.empty()) run = apply_config(run, KeyValueConfig::read(o.config_path));
  if (o.seed) run.seed = *o.seed;
  if (o.seeds) run.seeds = *o.seeds;
  if (o.gamma) run.gamma = *o.gamma;
  if (o.noise) run.noise_sigma = *o.noise;
  if (o.grid_step) run.grid_step = *o.grid_step;
  if (o.v0) run.step_height = *o.v0;
  // Re-run validation on the final values; also checks the Klein window.
  run = apply_config(run, KeyValueConfig{});
  try {
    (void)run.params();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return run;
}

/// Collects every file a command writes so the manifest can list them.
class Outputs {
 public:
  Outputs(fs::path dir, std::string format) : dir_(std::move(dir)), format_(std::move(format)) {}

  void text(const std::string& name, const std::string& content) {
    io::write_text(dir_ / name, content);
    files_.push_back(name);
  }
  /// Writes `stem`.csv or `stem`.json depending on --format.
  void table(const std::string& stem, const io::Table& t) {
    if (format_ == "json") {
      text(stem + ".json", t.to_json().dump(2) + "\n");
    } else {
      text(stem + ".csv", t.to_csv());
    }
  }
  void json(const std::string& name, const Json& j) { text(name, j.dump(2) + "\n"); }

  const std::vector<std::string>& files() const { return files_; }
  const std::string& format() const { return format_; }

 private:
  fs::path dir_;
  std::string format_;
  std::vector<std::string> files_;
};

void write_manifest(Outputs& out, const Options& o, const RunConfig& run) {
  const auto cfg = to_config(run);
  out.text("run.cfg", cfg.to_text());
  Json m = Json::object();
  m["tool"] = "kleinbox";
  m["version"] = kVersion;
  m["command"] = o.command;
  m["preset"] = run.preset;
  m["seed"] = run.seed;
  m["format"] = o.format;
  Json flags = Json::object();
  flags["symmetric_check"] = o.symmetric_check;
  flags["summary"] = o.summary;
  m["flags"] = flags;
  Json config = Json::object();
  for (const auto& [k, v] : cfg.entries()) config[k] = v;
  m["config"] = config;
  Json files = Json::array();
  for (const auto& f : out.files()) files.push_back(f);
  files.push_back("manifest.json");
  m["outputs"] = files;
  out.text("manifest.json", m.dump(2) + "\n");
}

lattice::LatticeEigensystem solve_chain(const lattice::ChainSpec& spec, const DiracParams& p) {
  return lattice::eigensolve(lattice::build_hamiltonian(spec), p.klein_window_frequency());
}

lattice::ChainSpec chain_of(const RunConfig& run, const DiracParams& p, std::uint64_t seed) {
  return lattice::chain_for(run.geometry, p, run.disorder_sigma, seed, run.permute);
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

io::Table levels_table(const continuum::LevelSet& cont, const lattice::LatticeEigensystem& eig,
                       const DiracParams& p) {
  io::Table t{{"n", "e_continuum_mhz", "f_continuum_mhz", "f_lattice_mhz", "delta_mhz"}, {}};
  const auto idx = eig.in_window();
  const std::size_t rows = std::max(cont.size(), idx.size());
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<std::string> r{io::num(static_cast<long long>(i + 1))};
    const bool has_c = i < cont.size();
    const bool has_l = i < idx.size();
    r.push_back(has_c ? io::num(cont.energies[i]) : "");
    r.push_back(has_c ? io::num(p.dirac_point + cont.energies[i]) : "");
    r.push_back(has_l ? io::num(eig.frequencies(idx[i])) : "");
    r.push_back(has_c && has_l
                    ? io::num(eig.frequencies(idx[i]) - p.dirac_point - cont.energies[i])
                    : "");
    t.add(std::move(r));
  }
  return t;
}

int cmd_levels(const Options& o, const RunConfig& run, Outputs& out, std::ostream& os) {
  const auto p = run.params();
  const auto cont = continuum::find_levels(p);
  const auto eig = solve_chain(chain_of(run, p, run.seed), p);
  const auto idx = eig.in_window();
  out.table("levels", levels_table(cont, eig, p));
  out.table("lattice_spectrum", io::eigensystem_table(eig));

  os << "preset " << run.preset << "  (N_L, N_R) = (" << run.geometry.n_left << ", "
     << run.geometry.n_right << ")  sigma = " << run.disorder_sigma << " MHz  seed "
     << run.seed << "\n";
  os << "continuum levels: " << cont.size() << "   lattice in-window: " << idx.size() << "\n";
  os << "   n   E_n [MHz]   f_lattice - f0   delta\n";
  for (std::size_t i = 0; i < std::max(cont.size(), idx.size()); ++i) {
    os << std::setw(4) << i + 1;
    os << std::setw(12) << (i < cont.size() ? fixed(cont.energies[i], 4) : "-");
    os << std::setw(17) << (i < idx.size() ? fixed(eig.frequencies(idx[i]) - p.dirac_point, 4) : "-");
    if (i < cont.size() && i < idx.size()) {
      os << std::setw(9) << fixed(eig.frequencies(idx[i]) - p.dirac_point - cont.energies[i], 4);
    }
    os << "\n";
  }
  if (cont.size() != idx.size()) os << "warning: level counts differ\n";

  int code = kOk;
  if (o.symmetric_check) {
    double worst = 0.0;
    const std::size_t n = cont.size();
    for (std::size_t i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(cont.energies[i] + cont.energies[n - 1 - i] - p.step_height));
    }
    if (std::abs(p.step_position - p.step_tail()) > 1e-12 * p.box_length) {
      os << "note: geometry is not symmetric (a != d - a)\n";
    }
    os << "symmetric check: max |E_n + E_(N+1-n) - V0| = " << std::scientific
       << std::setprecision(3) << worst << std::defaultfloat << " MHz\n";
    if (!(worst < 1e-8)) {
      os << "acceptance check failed: symmetric_check\n";
      code = kAcceptanceFailure;
    }
  }
  return code;
}

std::size_t count_ridges(const spectro::LdosMap& map, const Interval& window) {
  const auto dos = map.dos().slice(window);
  const auto y = dos.signal();
  const double top = y.empty() ? 0.0 : *std::max_element(y.begin(), y.end());
  return spectro::detect_peaks(dos, 0.05 * top).size();
}

int cmd_ldos(const Options&, const RunConfig& run, Outputs& out, std::ostream& os) {
  const auto p = run.params();
  const auto grid = pipeline::window_grid(p, run.freq_step);
  const auto window = p.klein_window_frequency();
  const auto full = chain_of(run, p, run.seed);
  const std::vector<io::Marker> edges{{window.lo, "f0+mc2"}, {window.hi, "f0+V0-mc2"}};

  struct Part {
    const char* name;
    lattice::ChainSpec spec;
  };
  const Part parts[] = {{"left", lattice::left_alone(full)},
                        {"right", lattice::right_alone(full)},
                        {"whole", full}};
  io::Table ridges{{"map", "ridge_count", "ridge_frequencies_mhz"}, {}};
  os << "LDOS maps, window (" << fixed(window.lo, 3) << ", " << fixed(window.hi, 3) << ") MHz\n";
  for (const auto& part : parts) {
    const auto eig = solve_chain(part.spec, p);
    std::vector<int> sites(static_cast<std::size_t>(part.spec.site_count()));
    for (std::size_t i = 0; i < sites.size(); ++i) sites[i] = static_cast<int>(i);
    const auto map = spectro::ldos_map(eig, sites, grid, run.ldos_gamma);
    const std::string stem = std::string("ldos_") + part.name;
    out.table(stem, io::ldos_table(map));
    out.text(stem + ".svg", io::svg_heatmap(map, std::string("LDOS, ") + part.name, edges));
    const auto n_ridges = count_ridges(map, window);
    std::string freqs;
    for (int n : eig.in_window()) {
      if (!freqs.empty()) freqs += ' ';
      freqs += io::num(eig.frequencies(n));
    }
    ridges.add({part.name, io::num(static_cast<long long>(n_ridges)), freqs});
    os << "  " << std::setw(6) << part.name << ": " << n_ridges << " ridges, "
       << eig.in_window().size() << " in-window eigenvalues\n";
  }
  out.table("ridges", ridges);
  return kOk;
}

/// One seed of the forward + inverse run. Writes detailed artifacts when
/// `detailed` is set and returns the names of failed in-run checks.
std::vector<std::string> pipeline_seed(const RunConfig& run, std::uint64_t seed, bool detailed,
                                       Outputs& out, io::Table& recovery_rows,
                                       std::vector<std::map<std::string, pipeline::Recovery>>& all) {
  const auto p = run.params();
  const auto spec = chain_of(run, p, seed);
  const auto eig = solve_chain(spec, p);
  const auto window = p.klein_window_frequency();
  const auto grid = pipeline::window_grid(p, run.freq_step);
  spectro::ReflectionOptions ro{run.gamma, run.coupling, run.noise_sigma, seed};

  std::vector<std::string> failed;
  constexpr int kMode = 2;  // 3rd in-window mode
  pipeline::RoundTrip rt;
  try {
    rt = pipeline::spectroscopy_round_trip(eig, window, grid, ro, kMode);
    if (!rt.counts_match) failed.push_back("resolved_level_count");
    if (!(rt.max_center_error < run.gamma / 10.0)) failed.push_back("center_recovery");
    if (!(rt.max_intensity_error < 0.05)) failed.push_back("intensity_recovery");
  } catch (const Error& e) {
    failed.push_back(std::string("spectroscopy (") + e.what() + ")");
  }

  const auto routes = pipeline::recover_parameters(spec, p);
  all.push_back(routes);
  if (!routes.at(pipeline::kPrimaryRoute).ok) failed.push_back("fit_converged");
  for (const auto& [name, r] : routes) {
    recovery_rows.add({io::num(static_cast<long long>(seed)), name, r.ok ? "true" : "false",
                       io::num(r.mass_energy()), io::num(r.hbar_c()), io::num(r.dirac_point()),
                       io::num(r.step_height())});
  }

  if (detailed) {
    const auto cont = continuum::find_levels(p);
    out.table("levels", levels_table(cont, eig, p));
    io::Table resolved{{"n", "center_mhz", "width_mhz", "amplitude", "flagged", "lattice_mhz"}, {}};
    for (std::size_t i = 0; i < rt.levels.size(); ++i) {
      const auto& pk = rt.levels[i];
      resolved.add({io::num(static_cast<long long>(i + 1)), io::num(pk.peak.center),
                    io::num(pk.peak.width), io::num(pk.peak.amplitude),
                    pk.flagged ? "true" : "false",
                    i < rt.true_levels.size() ? io::num(rt.true_levels[i]) : ""});
    }
    out.table("resolved_levels", resolved);
    for (const auto& t : rt.traces) {
      std::ostringstream name;
      name << "spectra/site_" << std::setw(3) << std::setfill('0') << t.probe_site;
      out.table(name.str(), io::trace_table(t));
    }

    // Intensities of the 3rd mode: extracted, lattice truth, continuum.
    const lattice::SiteMap map{spec.n_cells(), p.lattice_const};
    std::vector<double> continuum_i;
    if (!rt.profile.site.empty() && static_cast<std::size_t>(kMode) < cont.size()) {
      const auto idx = eig.in_window();
      const auto field = continuum::build_eigenstate(cont.energies[kMode], p, run.grid_step);
      continuum_i = lattice::compare_intensities(eig, idx[kMode], field, map).continuum;
      io::Table it{{"site", "sublattice", "x_mm", "extracted", "lattice", "continuum"}, {}};
      io::Series ex{"extracted", {}, {}}, la{"lattice", {}, {}}, co{"continuum", {}, {}};
      for (int s = 0; s < spec.site_count(); ++s) {
        const auto us = static_cast<std::size_t>(s);
        it.add({io::num(static_cast<long long>(s)), lattice::SiteMap::is_a(s) ? "A" : "B",
                io::num(map.x(s)), io::num(rt.profile.site[us]), io::num(rt.true_intensity[us]),
                io::num(continuum_i[us])});
        ex.x.push_back(map.x(s));
        ex.y.push_back(rt.profile.site[us]);
        la.x.push_back(map.x(s));
        la.y.push_back(rt.true_intensity[us]);
        co.x.push_back(map.x(s));
        co.y.push_back(continuum_i[us]);
      }
      out.table("intensity_mode3", it);
      out.text("intensity_mode3.svg",
               io::svg_lines({ex, la, co}, "3rd in-window mode", "x [mm]", "intensity",
                             {{p.step_position, "step"}}));
    }

    // DOS over the left region with the continuum levels marked.
    const auto dos = spectro::dos(eig, grid, run.ldos_gamma,
                                  spectro::left_region_sites(spec.n_left));
    std::vector<io::Marker> marks;
    for (double e : cont.energies) marks.push_back({p.dirac_point + e, ""});
    io::Series ds{"DOS (left region)", grid.values(), dos.signal()};
    out.table("dos", io::trace_table(dos));
    out.text("dos.svg", io::svg_lines({ds}, "DOS", "f [MHz]", "DOS", marks));
  }
  return failed;
}

int cmd_pipeline(const Options& o, const RunConfig& run, Outputs& out, std::ostream& os) {
  io::Table rows{{"seed", "route", "ok", "mc2_mhz", "hbar_c_mhz_mm", "f0_mhz", "df_mhz"}, {}};
  std::vector<std::map<std::string, pipeline::Recovery>> all;
  std::vector<std::string> failures;
  const bool detailed = run.seeds == 1;
  for (int i = 0; i < run.seeds; ++i) {
    const std::uint64_t seed = run.seed + static_cast<std::uint64_t>(i);
    for (const auto& f : pipeline_seed(run, seed, detailed, out, rows, all)) {
      failures.push_back(f + " (seed " + std::to_string(seed) + ")");
    }
  }
  out.table("recovery", rows);

  const auto p = run.params();
  const auto summary = pipeline::summarize(all);
  io::Table st{{"route", "runs", "failures", "median_mc2_mhz", "median_hbar_c_mhz_mm",
                "median_f0_mhz", "median_df_mhz"},
               {}};
  for (const auto& s : summary) {
    st.add({s.route, io::num(static_cast<long long>(s.runs)),
            io::num(static_cast<long long>(s.failures)), io::num(s.median_mass_energy),
            io::num(s.median_hbar_c), io::num(s.median_dirac_point), io::num(s.median_step_height)});
  }
  out.table("summary", st);

  os << "pipeline " << run.preset << ": " << run.seeds << " seed(s) from " << run.seed
     << ", sigma = " << run.disorder_sigma << " MHz, noise = " << run.noise_sigma << "\n";
  if (o.summary || run.seeds > 1) {
    os << "parameter recovery (medians; truth mc2 = " << p.mass_energy
       << ", hbar_c = " << p.hbar_c << ", f0 = " << p.dirac_point << ", df = " << p.step_height
       << ")\n";
    os << "  route                    fails   mc2      hbar_c     f0         df\n";
    for (const auto& s : summary) {
      os << "  " << std::left << std::setw(24) << s.route << std::right << std::setw(6)
         << s.failures << std::setw(9) << fixed(s.median_mass_energy, 3) << std::setw(11)
         << fixed(s.median_hbar_c, 2) << std::setw(11) << fixed(s.median_dirac_point, 3)
         << std::setw(9) << fixed(s.median_step_height, 3) << "\n";
    }
  }
  if (!failures.empty()) {
    for (const auto& f : failures) os << "acceptance check failed: " << f << "\n";
    return kAcceptanceFailure;
  }
  os << "all in-run checks passed\n";
  return kOk;
}

int dispatch(const Options& o, std::ostream& os) {
  if (o.format != "csv" && o.format != "json") throw ConfigError("--format must be csv or json");
  const RunConfig run = assemble(o);
  Outputs out(o.out_dir, o.format);
  int code = kOk;
  if (o.command == "levels") {
    code = cmd_levels(o, run, out, os);
  } else if (o.command == "ldos") {
    code = cmd_ldos(o, run, out, os);
  } else if (o.command == "pipeline") {
    code = cmd_pipeline(o, run, out, os);
  } else {
    throw ConfigError("unknown command " + o.command);
  }
  write_manifest(out, o, run);
  os << "wrote " << out.files().size() << " files to " << o.out_dir << "\n";
  return code;
}

/// Rebuilds the options of a previous run from its manifest.
Options from_manifest(const fs::path& path, const std::string& out_dir) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read manifest " + path.string());
  Json m;
  try {
    m = Json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  Options o;
  o.command = m.at("command").get<std::string>();
  o.format = m.at("format").get<std::string>();
  o.symmetric_check = m.at("flags").at("symmetric_check").get<bool>();
  o.summary = m.at("flags").at("summary").get<bool>();
  o.out_dir = out_dir;
  KeyValueConfig cfg;
  for (const auto& [k, v] : m.at("config").items()) cfg.set(k, v.get<std::string>());
  const fs::path tmp = fs::temp_directory_path() /
                       ("kleinbox-rerun-" + std::to_string(std::hash<std::string>{}(cfg.to_text())) + ".cfg");
  cfg.write(tmp);
  o.config_path = tmp.string();
  o.preset = m.at("preset").get<std::string>();
  return o;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--preset", o.preset, "experiment preset: e1, e2, e3, e4")->capture_default_str();
  sub->add_option("--config", o.config_path, "key=value config file");
  sub->add_option("--seed", o.seed, "disorder / noise seed");
  sub->add_option("--seeds", o.seeds, "number of consecutive seeds");
  sub->add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
  sub->add_option("--format", o.format, "table format: csv or json")->capture_default_str();
  sub->add_option("--gamma", o.gamma, "resonance width [MHz]");
  sub->add_option("--noise", o.noise, "reflection noise sigma");
  sub->add_option("--grid-step", o.grid_step, "spinor sampling step [mm]");
  sub->add_option("--v0", o.v0, "step height [MHz]");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"kleinbox: quantized Klein tunneling lab"};
  app.require_subcommand(1);
  Options o;
  std::string manifest;
  auto* levels = app.add_subcommand("levels", "continuum and lattice levels side by side");
  add_common(levels, o);
  levels->add_flag("--symmetric-check", o.symmetric_check,
                   "check E_n + E_(N+1-n) = V0 on the continuum levels");
  auto* ldos = app.add_subcommand("ldos", "LDOS maps of the left, right and whole chain");
  add_common(ldos, o);
  auto* pipe = app.add_subcommand("pipeline", "forward model, extraction and parameter fits");
  add_common(pipe, o);
  pipe->add_flag("--summary", o.summary, "print the parameter-recovery table");
  auto* rerun = app.add_subcommand("rerun", "repeat a run from its manifest.json");
  rerun->add_option("--manifest", manifest, "manifest of the run to repeat")->required();
  rerun->add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (rerun->parsed()) {
      const Options replay = from_manifest(manifest, o.out_dir);
      const int code = dispatch(replay, out);
      fs::remove(replay.config_path);
      return code;
    }
    for (auto* sub : {levels, ldos, pipe}) {
      if (sub->parsed()) o.command = sub->get_name();
    }
    return dispatch(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ConvergenceError& e) {
    err << "non-convergence: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const LevelCountMismatch& e) {
    err << "non-convergence: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const DomainError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace kleinbox::cli
