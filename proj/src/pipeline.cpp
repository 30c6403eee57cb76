#include "kleinbox/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "kleinbox/parallel.hpp"

namespace kleinbox::pipeline {
namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  return 0.5 * (upper + *std::max_element(v.begin(), mid));
}

/// Start values for the sequence fit from the data alone: the top spacing
/// of a box approaches c hbar pi / L.
fit::BandParams sequence_start(const std::vector<double>& levels, double length,
                               continuum::Branch branch) {
  const std::size_t n = levels.size();
  fit::BandParams init;
  init.mass_energy = 10.0;
  if (branch == continuum::Branch::Particle) {
    init.hbar_c = (levels[n - 1] - levels[n - 2]) * length / std::numbers::pi;
    init.center = levels.front() - 10.0;
  } else {
    init.hbar_c = (levels[1] - levels[0]) * length / std::numbers::pi;
    init.center = levels.back() + 10.0;
  }
  return init;
}

Recovery run_route(const std::function<fit::FitResult()>& particle,
                   const std::function<fit::FitResult()>& hole) {
  Recovery r;
  try {
    r.particle = particle();
    r.hole = hole();
    r.ok = r.particle.converged && r.hole.converged;
    if (!r.ok) r.error = "fit did not converge";
  } catch (const Error& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

}  // namespace

std::vector<fit::DispersionPair> HalfChainSample::pairs(Estimator e) const {
  std::vector<fit::DispersionPair> out;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& w = wavevectors[i];
    const double k = e == Estimator::Refined   ? w.k
                     : e == Estimator::Fourier ? w.k_fourier
                                               : w.k_peak_count;
    out.push_back({levels[i], k});
  }
  return out;
}

HalfChainSample half_chain_sample(const lattice::ChainSpec& half,
                                  const DiracParams& params) {
  const auto eig = lattice::eigensolve(lattice::build_hamiltonian(half),
                                       params.klein_window_frequency());
  const lattice::SiteMap map{half.n_cells(), params.lattice_const};
  HalfChainSample s;
  s.box_length = (half.n_cells() + 0.5) * params.lattice_const;
  for (int n : eig.in_window()) {
    const auto env = lattice::sublattice_envelopes(eig, n, map);
    s.levels.push_back(eig.frequencies(n));
    s.wavevectors.push_back(lattice::estimate_wavevector(
        env, lattice::Segment::Left, std::numeric_limits<double>::infinity()));
  }
  return s;
}

std::map<std::string, Recovery> recover_parameters(const lattice::ChainSpec& full,
                                                   const DiracParams& params) {
  const auto left = half_chain_sample(lattice::left_alone(full), params);
  const auto right = half_chain_sample(lattice::right_alone(full), params);
  using E = HalfChainSample::Estimator;
  std::map<std::string, Recovery> out;
  const std::pair<const char*, E> routes[] = {{"dispersion", E::Refined},
                                              {"dispersion_fourier", E::Fourier},
                                              {"dispersion_peak_count", E::PeakCount}};
  for (const auto& [name, est] : routes) {
    const auto lp = left.pairs(est);
    const auto rp = right.pairs(est);
    out[name] = run_route([&] { return fit::fit_dispersion_particle(lp); },
                          [&] { return fit::fit_dispersion_hole(rp); });
  }
  fit::SequenceOptions so;
  so.scan_window = params.klein_window_frequency();
  out["level_sequence"] = run_route(
      [&] {
        return fit::fit_level_sequence(
            left.levels, left.box_length, continuum::Branch::Particle,
            sequence_start(left.levels, left.box_length, continuum::Branch::Particle), so);
      },
      [&] {
        return fit::fit_level_sequence(
            right.levels, right.box_length, continuum::Branch::Hole,
            sequence_start(right.levels, right.box_length, continuum::Branch::Hole), so);
      });
  return out;
}

std::vector<std::map<std::string, Recovery>> recovery_ensemble(
    const Geometry& geometry, const DiracParams& params, double sigma,
    std::uint64_t seed0, int count) {
  return parallel_map(static_cast<std::size_t>(std::max(count, 0)), [&](std::size_t i) {
    const auto spec = lattice::chain_for(geometry, params, sigma, seed0 + i, false);
    return recover_parameters(spec, params);
  });
}

std::vector<RecoverySummary> summarize(
    const std::vector<std::map<std::string, Recovery>>& ensemble) {
  std::map<std::string, std::vector<const Recovery*>> by_route;
  for (const auto& run : ensemble) {
    for (const auto& [name, r] : run) by_route[name].push_back(&r);
  }
  std::vector<RecoverySummary> out;
  for (const auto& [name, runs] : by_route) {
    RecoverySummary s;
    s.route = name;
    s.runs = runs.size();
    std::vector<double> m, c, f, df;
    for (const auto* r : runs) {
      if (!r->ok) {
        ++s.failures;
        continue;
      }
      m.push_back(r->mass_energy());
      c.push_back(r->hbar_c());
      f.push_back(r->dirac_point());
      df.push_back(r->step_height());
    }
    s.median_mass_energy = median(m);
    s.median_hbar_c = median(c);
    s.median_dirac_point = median(f);
    s.median_step_height = median(df);
    out.push_back(s);
  }
  return out;
}

spectro::FrequencyGrid window_grid(const DiracParams& params, double step) {
  const auto w = params.klein_window_frequency();
  return spectro::FrequencyGrid::covering({w.lo - 15.0, w.hi + 15.0}, step);
}

RoundTrip spectroscopy_round_trip(const lattice::LatticeEigensystem& eig,
                                  const Interval& window,
                                  const spectro::FrequencyGrid& grid,
                                  const spectro::ReflectionOptions& options,
                                  int mode) {
  RoundTrip rt;
  rt.mode = mode;
  rt.traces = spectro::synth_all_sites(eig, grid, options);
  rt.levels = spectro::resolve_levels(spectro::sum_signals(rt.traces), window);
  for (Eigen::Index n = 0; n < eig.size(); ++n) {
    if (window.contains(eig.frequencies(n))) rt.true_levels.push_back(eig.frequencies(n));
  }
  rt.counts_match = rt.levels.size() == rt.true_levels.size();
  const std::size_t pairs = std::min(rt.levels.size(), rt.true_levels.size());
  for (std::size_t i = 0; i < pairs; ++i) {
    rt.max_center_error = std::max(
        rt.max_center_error, std::abs(rt.levels[i].peak.center - rt.true_levels[i]));
  }
  if (mode < 0 || static_cast<std::size_t>(mode) >= pairs) {
    throw DomainError("mode " + std::to_string(mode) + " was not resolved");
  }
  rt.profile = spectro::extract_intensities(rt.traces, rt.levels[static_cast<std::size_t>(mode)].peak);
  Eigen::Index column = 0;
  for (Eigen::Index n = 0, seen = 0; n < eig.size(); ++n) {
    if (!window.contains(eig.frequencies(n))) continue;
    if (seen++ == mode) column = n;
  }
  for (Eigen::Index s = 0; s < eig.vectors.rows(); ++s) {
    const double v = eig.vectors(s, column);
    rt.true_intensity.push_back(v * v);
    rt.max_intensity_error = std::max(
        rt.max_intensity_error,
        std::abs(rt.profile.site[static_cast<std::size_t>(s)] - v * v));
  }
  return rt;
}

}  // namespace kleinbox::pipeline
