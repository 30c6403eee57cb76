#pragma once

// Forward + inverse runs shared by the CLI, the acceptance binary and the
// Python module: simulate the chain, synthesize spectra, extract levels and
// intensities, then fit the band parameters back.

#include <map>
#include <string>
#include <vector>

#include "kleinbox/config.hpp"
#include "kleinbox/param_fit.hpp"
#include "kleinbox/spectroscopy.hpp"
#include "kleinbox/ssh_lattice.hpp"

namespace kleinbox::pipeline {

/// In-window levels of a half chain with one wavevector estimate per level.
struct HalfChainSample {
  std::vector<double> levels;  // MHz, ascending
  std::vector<lattice::WavevectorEstimate> wavevectors;
  double box_length = 0.0;  // (n + 1/2) a0

  /// Pairs using the refined, DFT-peak or peak-count wavevector.
  enum class Estimator { Refined, Fourier, PeakCount };
  std::vector<fit::DispersionPair> pairs(Estimator e = Estimator::Refined) const;
};

HalfChainSample half_chain_sample(const lattice::ChainSpec& half,
                                  const DiracParams& params);

/// Particle fit on the left half, hole fit on the right half.
struct Recovery {
  fit::FitResult particle;
  fit::FitResult hole;
  bool ok = false;
  std::string error;  // set when a fit threw

  double mass_energy() const { return particle.params.mass_energy; }
  double hbar_c() const { return particle.params.hbar_c; }
  double dirac_point() const { return particle.params.center; }
  double step_height() const { return hole.params.center - particle.params.center; }
};

/// Route names: "dispersion" (refined k, the primary route),
/// "dispersion_fourier", "dispersion_peak_count", "level_sequence".
std::map<std::string, Recovery> recover_parameters(const lattice::ChainSpec& full,
                                                   const DiracParams& params);

inline constexpr const char* kPrimaryRoute = "dispersion";

struct RecoverySummary {
  std::string route;
  std::size_t runs = 0;
  std::size_t failures = 0;
  double median_mass_energy = 0.0;
  double median_hbar_c = 0.0;
  double median_dirac_point = 0.0;
  double median_step_height = 0.0;
};

/// Ensemble over seeds seed0 .. seed0 + count - 1, run in parallel.
std::vector<std::map<std::string, Recovery>> recovery_ensemble(
    const Geometry& geometry, const DiracParams& params, double sigma,
    std::uint64_t seed0, int count);

std::vector<RecoverySummary> summarize(
    const std::vector<std::map<std::string, Recovery>>& ensemble);

/// Synthesize -> resolve levels -> extract one mode's intensities.
struct RoundTrip {
  std::vector<spectro::SpectrumTrace> traces;
  std::vector<spectro::FittedPeak> levels;  // resolved in-window resonances
  std::vector<double> true_levels;          // in-window eigenfrequencies
  double max_center_error = 0.0;            // MHz, paired by order
  bool counts_match = false;
  int mode = 0;                             // 0-based in-window index
  spectro::IntensityProfile profile;
  std::vector<double> true_intensity;       // |v_n(site)|^2
  double max_intensity_error = 0.0;
};

RoundTrip spectroscopy_round_trip(const lattice::LatticeEigensystem& eig,
                                  const Interval& window,
                                  const spectro::FrequencyGrid& grid,
                                  const spectro::ReflectionOptions& options,
                                  int mode);

/// Frequency grid covering the window with 15 MHz of margin on both sides.
spectro::FrequencyGrid window_grid(const DiracParams& params, double step);

}  // namespace kleinbox::pipeline
