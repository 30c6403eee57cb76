// Python bindings for the kleinbox core. Arrays cross as NumPy via
// pybind11/eigen.h; library errors map onto Python exception classes.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.hpp"
#include "kleinbox/config.hpp"
#include "kleinbox/dirac_continuum.hpp"
#include "kleinbox/param_fit.hpp"
#include "kleinbox/pipeline.hpp"
#include "kleinbox/spectroscopy.hpp"
#include "kleinbox/ssh_lattice.hpp"

namespace py = pybind11;
using namespace kleinbox;

namespace {

std::vector<fit::DispersionPair> to_pairs(const std::vector<double>& f,
                                          const std::vector<double>& k) {
  if (f.size() != k.size()) throw DomainError("frequencies and wavevectors differ in length");
  std::vector<fit::DispersionPair> out;
  for (std::size_t i = 0; i < f.size(); ++i) out.push_back({f[i], k[i]});
  return out;
}

std::optional<fit::BandParams> band_from(const std::optional<std::array<double, 3>>& v) {
  if (!v) return std::nullopt;
  return fit::BandParams{(*v)[0], (*v)[1], (*v)[2]};
}

}  // namespace

PYBIND11_MODULE(_kleinbox, m) {
  m.doc() = "Quantized Klein tunneling lab: Dirac box and dimer chain";

  auto base = py::register_exception<Error>(m, "KleinboxError", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
  py::register_exception<LevelCountMismatch>(m, "LevelCountMismatch", base.ptr());

  // core
  py::class_<Interval>(m, "Interval")
      .def(py::init<double, double>(), py::arg("lo"), py::arg("hi"))
      .def_readwrite("lo", &Interval::lo)
      .def_readwrite("hi", &Interval::hi)
      .def("contains", &Interval::contains)
      .def("__repr__", [](const Interval& i) {
        std::ostringstream os;
        os << "Interval(" << i.lo << ", " << i.hi << ")";
        return os.str();
      });

  py::class_<Geometry>(m, "Geometry")
      .def(py::init<int, int>(), py::arg("n_left"), py::arg("n_right"))
      .def_readwrite("n_left", &Geometry::n_left)
      .def_readwrite("n_right", &Geometry::n_right);

  py::class_<DiracParams>(m, "DiracParams")
      .def_readonly("mass_energy", &DiracParams::mass_energy)
      .def_readonly("hbar_c", &DiracParams::hbar_c)
      .def_readonly("dirac_point", &DiracParams::dirac_point)
      .def_readonly("step_height", &DiracParams::step_height)
      .def_readonly("lattice_const", &DiracParams::lattice_const)
      .def_readonly("step_position", &DiracParams::step_position)
      .def_readonly("box_length", &DiracParams::box_length)
      .def("klein_window", &DiracParams::klein_window)
      .def("klein_window_frequency", &DiracParams::klein_window_frequency);

  m.def("make_params", &make_params, py::arg("geometry"), py::arg("mass_energy"),
        py::arg("hbar_c"), py::arg("dirac_point"), py::arg("step_height"),
        py::arg("lattice_const"));
  m.def("default_params", &default_params, py::arg("geometry"));

  py::class_<ExperimentPreset>(m, "ExperimentPreset")
      .def_property_readonly("name", [](const ExperimentPreset& p) { return to_string(p.id); })
      .def_readonly("geometry", &ExperimentPreset::geometry)
      .def_readonly("disorder_sigma", &ExperimentPreset::disorder_sigma)
      .def_readonly("seed", &ExperimentPreset::seed)
      .def_readonly("permute", &ExperimentPreset::permute);
  m.def("preset", py::overload_cast<std::string_view>(&preset), py::arg("name"));

  // continuum
  py::class_<continuum::LevelSet>(m, "LevelSet")
      .def_readonly("energies", &continuum::LevelSet::energies)
      .def_readonly("residuals", &continuum::LevelSet::residuals)
      .def_readonly("window", &continuum::LevelSet::window)
      .def("__len__", &continuum::LevelSet::size);
  m.def("find_levels", &continuum::find_levels, py::arg("params"));
  m.def("quantization_residual", &continuum::quantization_residual, py::arg("energy"),
        py::arg("params"));
  m.def("scattering_determinant", &continuum::scattering_determinant, py::arg("energy"),
        py::arg("params"));
  m.def("reflection_coefficient", [](double energy, const DiracParams& p) {
    return continuum::interface_coefficients(continuum::kinematics(energy, p)).r;
  }, py::arg("energy"), py::arg("params"));
  m.def("box_level_energy", &continuum::box_level_energy, py::arg("length"), py::arg("n"),
        py::arg("mass"), py::arg("hbar_c"));
  m.def(
      "eigenstate",
      [](double energy, const DiracParams& p, double step) {
        const auto f = continuum::build_eigenstate(energy, p, step);
        return py::make_tuple(f.x, f.comp1, f.comp2);
      },
      py::arg("energy"), py::arg("params"), py::arg("grid_step"),
      "Returns (x, psi1, psi2) sampled on a grid no coarser than grid_step.");

  // lattice
  py::class_<lattice::ChainSpec>(m, "ChainSpec")
      .def_readwrite("n_left", &lattice::ChainSpec::n_left)
      .def_readwrite("n_right", &lattice::ChainSpec::n_right)
      .def_readwrite("intra", &lattice::ChainSpec::intra)
      .def_readwrite("inter", &lattice::ChainSpec::inter)
      .def_readwrite("onsite_left", &lattice::ChainSpec::onsite_left)
      .def_readwrite("onsite_right", &lattice::ChainSpec::onsite_right)
      .def_readwrite("disorder_sigma", &lattice::ChainSpec::disorder_sigma)
      .def_readwrite("seed", &lattice::ChainSpec::seed)
      .def_readwrite("permute", &lattice::ChainSpec::permute)
      .def("site_count", &lattice::ChainSpec::site_count);
  m.def("chain_for",
        py::overload_cast<const Geometry&, const DiracParams&, double, std::uint64_t, bool>(
            &lattice::chain_for),
        py::arg("geometry"), py::arg("params"), py::arg("disorder_sigma") = 0.0,
        py::arg("seed") = 0, py::arg("permute") = false);
  m.def("left_alone", &lattice::left_alone, py::arg("full"));
  m.def("right_alone", &lattice::right_alone, py::arg("full"));

  py::class_<lattice::LatticeEigensystem>(m, "LatticeEigensystem")
      .def_readonly("frequencies", &lattice::LatticeEigensystem::frequencies)
      .def_readonly("vectors", &lattice::LatticeEigensystem::vectors)
      .def("in_window", &lattice::LatticeEigensystem::in_window);
  m.def(
      "solve_chain",
      [](const lattice::ChainSpec& spec, std::optional<Interval> window) {
        return lattice::eigensolve(lattice::build_hamiltonian(spec), window);
      },
      py::arg("spec"), py::arg("window") = std::nullopt);

  py::class_<lattice::WavevectorEstimate>(m, "WavevectorEstimate")
      .def_readonly("k", &lattice::WavevectorEstimate::k)
      .def_readonly("k_fourier", &lattice::WavevectorEstimate::k_fourier)
      .def_readonly("k_peak_count", &lattice::WavevectorEstimate::k_peak_count)
      .def_readonly("peak_count", &lattice::WavevectorEstimate::peak_count);
  m.def(
      "estimate_wavevector",
      [](const lattice::LatticeEigensystem& eig, int n, const DiracParams& p, int n_cells,
         bool left, double step) {
        const auto env = lattice::sublattice_envelopes(eig, n, {n_cells, p.lattice_const});
        return lattice::estimate_wavevector(
            env, left ? lattice::Segment::Left : lattice::Segment::Right, step);
      },
      py::arg("eig"), py::arg("n"), py::arg("params"), py::arg("n_cells"),
      py::arg("left") = true, py::arg("step") = std::numeric_limits<double>::infinity());

  // spectroscopy
  py::class_<spectro::FrequencyGrid>(m, "FrequencyGrid")
      .def_static("covering", &spectro::FrequencyGrid::covering, py::arg("range"),
                  py::arg("step"))
      .def_readonly("start", &spectro::FrequencyGrid::start)
      .def_readonly("step", &spectro::FrequencyGrid::step)
      .def_readonly("count", &spectro::FrequencyGrid::count)
      .def("values", &spectro::FrequencyGrid::values);
  py::class_<spectro::SpectrumTrace>(m, "SpectrumTrace")
      .def_readonly("probe_site", &spectro::SpectrumTrace::probe_site)
      .def_readonly("grid", &spectro::SpectrumTrace::grid)
      .def_readonly("values", &spectro::SpectrumTrace::values)
      .def("signal", &spectro::SpectrumTrace::signal);
  py::class_<spectro::ResonancePeak>(m, "ResonancePeak")
      .def_readonly("center", &spectro::ResonancePeak::center)
      .def_readonly("width", &spectro::ResonancePeak::width)
      .def_readonly("amplitude", &spectro::ResonancePeak::amplitude);
  py::class_<spectro::FittedPeak>(m, "FittedPeak")
      .def_readonly("peak", &spectro::FittedPeak::peak)
      .def_readonly("flagged", &spectro::FittedPeak::flagged);
  m.def(
      "synth_reflection",
      [](const lattice::LatticeEigensystem& eig, int site, const spectro::FrequencyGrid& grid,
         double gamma, double coupling, double noise_sigma, std::uint64_t seed) {
        return spectro::synth_reflection(eig, site, grid,
                                         {gamma, coupling, noise_sigma, seed});
      },
      py::arg("eig"), py::arg("site"), py::arg("grid"), py::arg("gamma") = 2.0,
      py::arg("coupling") = 1.0, py::arg("noise_sigma") = 0.0, py::arg("seed") = 0);
  m.def(
      "ldos_map",
      [](const lattice::LatticeEigensystem& eig, const std::vector<int>& sites,
         const spectro::FrequencyGrid& grid, double gamma) {
        const auto map = spectro::ldos_map(eig, sites, grid, gamma);
        return Eigen::MatrixXd(map.values);
      },
      py::arg("eig"), py::arg("sites"), py::arg("grid"), py::arg("gamma") = 2.0,
      "LDOS matrix, rows are sites and columns are frequencies.");
  m.def("detect_peaks", &spectro::detect_peaks, py::arg("trace"), py::arg("threshold"));

  // fits
  py::class_<fit::BandParams>(m, "BandParams")
      .def_readonly("mass_energy", &fit::BandParams::mass_energy)
      .def_readonly("hbar_c", &fit::BandParams::hbar_c)
      .def_readonly("center", &fit::BandParams::center);
  py::class_<fit::FitResult>(m, "FitResult")
      .def_readonly("params", &fit::FitResult::params)
      .def_readonly("residual_norm", &fit::FitResult::residual_norm)
      .def_readonly("iterations", &fit::FitResult::iterations)
      .def_readonly("converged", &fit::FitResult::converged)
      .def_readonly("covariance", &fit::FitResult::covariance);
  m.def(
      "fit_dispersion_particle",
      [](const std::vector<double>& f, const std::vector<double>& k,
         std::optional<std::array<double, 3>> init) {
        return fit::fit_dispersion_particle(to_pairs(f, k), band_from(init));
      },
      py::arg("frequencies"), py::arg("wavevectors"), py::arg("init") = std::nullopt);
  m.def(
      "fit_dispersion_hole",
      [](const std::vector<double>& f, const std::vector<double>& k,
         std::optional<std::array<double, 3>> init) {
        return fit::fit_dispersion_hole(to_pairs(f, k), band_from(init));
      },
      py::arg("frequencies"), py::arg("wavevectors"), py::arg("init") = std::nullopt);
  m.def(
      "fit_level_sequence",
      [](const std::vector<double>& levels, double length, bool particle,
         std::array<double, 3> init) {
        return fit::fit_level_sequence(
            levels, length, particle ? continuum::Branch::Particle : continuum::Branch::Hole,
            {init[0], init[1], init[2]});
      },
      py::arg("levels"), py::arg("length"), py::arg("particle"), py::arg("init"));
  m.def(
      "lm_minimize",
      [](const fit::ResidualFn& residual, const Eigen::VectorXd& init) {
        const auto r = fit::lm_minimize(residual, nullptr, init);
        return py::make_tuple(r.params, r.converged, r.iterations);
      },
      py::arg("residual"), py::arg("init"),
      "Minimizes 0.5 |r(x)|^2; returns (x, converged, iterations).");

  // pipeline
  py::class_<pipeline::Recovery>(m, "Recovery")
      .def_readonly("ok", &pipeline::Recovery::ok)
      .def_readonly("error", &pipeline::Recovery::error)
      .def_property_readonly("mass_energy", &pipeline::Recovery::mass_energy)
      .def_property_readonly("hbar_c", &pipeline::Recovery::hbar_c)
      .def_property_readonly("dirac_point", &pipeline::Recovery::dirac_point)
      .def_property_readonly("step_height", &pipeline::Recovery::step_height);
  m.def("recover_parameters", &pipeline::recover_parameters, py::arg("full"),
        py::arg("params"));
  m.def(
      "round_trip",
      [](const lattice::LatticeEigensystem& eig, const DiracParams& p, double gamma,
         double noise_sigma, std::uint64_t seed, int mode) {
        const auto rt = pipeline::spectroscopy_round_trip(
            eig, p.klein_window_frequency(), pipeline::window_grid(p, 0.05),
            {gamma, 1.0, noise_sigma, seed}, mode);
        py::dict d;
        std::vector<double> centers;
        for (const auto& l : rt.levels) centers.push_back(l.peak.center);
        d["centers"] = centers;
        d["true_levels"] = rt.true_levels;
        d["max_center_error"] = rt.max_center_error;
        d["intensity"] = rt.profile.site;
        d["true_intensity"] = rt.true_intensity;
        d["max_intensity_error"] = rt.max_intensity_error;
        return d;
      },
      py::arg("eig"), py::arg("params"), py::arg("gamma") = 2.0, py::arg("noise_sigma") = 0.0,
      py::arg("seed") = 0, py::arg("mode") = 2);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"kleinbox"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (code, stdout, stderr).");
}
