#pragma once

// Synthetic reflection spectroscopy of the resonator chain. Each eigenmode
// shows up as a Breit-Wigner resonance weighted by its intensity at the
// probe site:
//
//   S(nu) = 1 - i c sum_n |psi_n(site)|^2 (G/2) / (nu - f_n + i G/2).
//
// Re(1 - S) is then a sum of Lorentzians of FWHM G and peak height
// c |psi_n(site)|^2, which is what the peak finder and the fits work on.

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kleinbox/core.hpp"
#include "kleinbox/param_fit.hpp"
#include "kleinbox/ssh_lattice.hpp"

namespace kleinbox::spectro {

struct FrequencyGrid {
  double start = 0.0;  // MHz
  double step = 0.0;   // MHz
  std::size_t count = 0;

  double at(std::size_t i) const { return start + step * static_cast<double>(i); }
  double stop() const { return at(count == 0 ? 0 : count - 1); }
  std::vector<double> values() const;

  /// Uniform grid from lo to at least hi with the given step.
  static FrequencyGrid covering(const Interval& range, double step);
};

enum class TraceKind { Reflection, Ldos };

struct SpectrumTrace {
  int probe_site = -1;  // -1 for sums over sites
  FrequencyGrid grid;
  TraceKind kind = TraceKind::Reflection;
  std::vector<std::complex<double>> values;  // S, or LDOS in the real part

  /// Re(1 - S) for reflection traces, the LDOS otherwise.
  std::vector<double> signal() const;
  /// Restriction to grid points inside [range.lo, range.hi].
  SpectrumTrace slice(const Interval& range) const;
};

struct ResonancePeak {
  double center = 0.0;     // MHz
  double width = 0.0;      // FWHM, MHz
  double amplitude = 0.0;  // peak height of the signal
};

struct ReflectionOptions {
  double gamma = 2.0;       // MHz
  double coupling = 1.0;
  double noise_sigma = 0.0;  // per real and imaginary part
  std::uint64_t seed = 0;
};

/// Throws DomainError unless gamma > 0. The noise stream depends only on
/// (seed, site).
SpectrumTrace synth_reflection(const lattice::LatticeEigensystem& eig,
                               int site, const FrequencyGrid& grid,
                               const ReflectionOptions& options);

/// One trace per site, computed in parallel.
std::vector<SpectrumTrace> synth_all_sites(const lattice::LatticeEigensystem& eig,
                                           const FrequencyGrid& grid,
                                           const ReflectionOptions& options);

/// Pointwise sum of the signals of several traces (probe_site = -1).
SpectrumTrace sum_signals(std::span<const SpectrumTrace> traces);

/// Normalized Lorentzian (G/2pi) / (x^2 + G^2/4).
double lorentzian_density(double detuning, double gamma);

struct LdosMap {
  FrequencyGrid grid;
  std::vector<int> sites;
  Eigen::MatrixXd values;  // rows: sites, columns: frequencies

  /// Sum over the map's sites.
  SpectrumTrace dos() const;
  SpectrumTrace row(std::size_t i) const;
};

/// LDOS(site, nu) = sum_n |psi_n(site)|^2 L_gamma(nu - f_n).
LdosMap ldos_map(const lattice::LatticeEigensystem& eig,
                 std::span<const int> sites, const FrequencyGrid& grid,
                 double gamma);

/// Sites of the left region of a chain with n_left dimers.
std::vector<int> left_region_sites(int n_left);

/// DOS over a site subset, by default the left region where the hole band
/// has no weight.
SpectrumTrace dos(const lattice::LatticeEigensystem& eig, const FrequencyGrid& grid,
                  double gamma, std::span<const int> sites);

/// Local maxima of the signal whose topographic prominence exceeds the
/// threshold. Centers by parabolic interpolation, widths from the
/// half-prominence crossings, amplitude = signal at the maximum.
std::vector<ResonancePeak> detect_peaks(const SpectrumTrace& trace,
                                        double prominence_threshold);

/// Robust white-noise estimate of the signal from the median absolute first
/// difference. Smooth resonances contribute little when the grid resolves
/// them.
double noise_floor(const SpectrumTrace& trace);

struct LorentzianFitOptions {
  bool linear_baseline = true;
  /// Per peak: hold center and width at their start values and fit only
  /// the amplitude. Empty means every peak is free.
  std::vector<bool> fixed_shape;
  fit::LmOptions lm;
};

struct FittedPeak {
  ResonancePeak peak;
  bool flagged = false;  // fit failed or drifted; `peak` holds the start value
};

struct LorentzianFit {
  std::vector<FittedPeak> peaks;
  double residual_norm = 0.0;
  double baseline_offset = 0.0;  // at the trace's mid frequency
  double baseline_slope = 0.0;
  bool converged = false;
  Eigen::MatrixXd covariance;  // over the free parameters, in peak order, then baseline
  fit::LmResult engine;
};

/// Multi-Lorentzian least squares on the trace's signal with an analytic
/// Jacobian. A peak whose center moves by more than its initial width, or
/// whose width turns non-positive, is flagged and keeps its initial values.
LorentzianFit fit_lorentzians(const SpectrumTrace& trace,
                              std::span<const ResonancePeak> initial,
                              const LorentzianFitOptions& options = {});

/// Model value of a peak list plus baseline.
double lorentzian_model(std::span<const ResonancePeak> peaks, double nu);

struct LevelSearchOptions {
  double margin = 8.0;                // MHz fitted beyond each window edge
  double relative_prominence = 0.05;  // of the largest signal
  double noise_prominence = 6.0;      // in units of noise_floor
  LorentzianFitOptions fit;
};

/// Resonances of a site-summed spectrum inside `window` (absolute MHz):
/// peaks are detected on window +- margin with a noise-aware prominence
/// threshold, fitted jointly, and those whose centers fall inside the window
/// are returned in ascending order.
std::vector<FittedPeak> resolve_levels(const SpectrumTrace& summed,
                                       const Interval& window,
                                       const LevelSearchOptions& options = {});

struct ExtractionOptions {
  double half_window = 0.0;  // MHz; default (0) means 4 x level width
  double relative_prominence = 1e-3;  // of the local signal range
  double noise_prominence = 6.0;      // in units of noise_floor
};

struct IntensityProfile {
  std::vector<double> site;     // unit sum, site order
  std::vector<double> a;        // A sublattice (even sites)
  std::vector<double> b;        // B sublattice (odd sites)
  std::vector<double> raw_amplitude;
  std::vector<bool> converged;
  std::size_t converged_count = 0;
};

/// Fits the level's resonance at every site (neighbors within the local
/// window are fitted jointly). Sites whose fit fails fall back to a linear
/// amplitude fit with fixed centers and widths. Throws ConvergenceError if
/// fewer than half the sites converge.
IntensityProfile extract_intensities(std::span<const SpectrumTrace> traces,
                                     const ResonancePeak& level,
                                     const ExtractionOptions& options = {});

}  // namespace kleinbox::spectro
