#pragma once

// Shared domain types for the bounded Dirac box and its dimer-chain analog.
//
// Units: frequencies and energies in MHz, lengths in mm. Absolute frequencies
// (lattice eigenvalues, spectra) are stored as-is; continuum energies E are
// measured relative to the Dirac point f0, so f = f0 + E.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kleinbox {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain where an operation is defined
/// (e.g. an energy outside the Klein window).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or parameter combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed to converge or lost internal consistency.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Two level lists that should pair one-to-one have different lengths.
class LevelCountMismatch : public Error {
 public:
  LevelCountMismatch(std::size_t expected, std::size_t actual,
                     const std::string& what);
  std::size_t expected() const { return expected_; }
  std::size_t actual() const { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

/// Open interval (lo, hi) of frequencies or energies.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double x) const { return x > lo && x < hi; }
  Interval shifted(double offset) const { return {lo + offset, hi + offset}; }
};

/// Dimer counts on each side of the step.
struct Geometry {
  int n_left = 0;
  int n_right = 0;

  int n_cells() const { return n_left + n_right; }
};

/// Continuum constants and box geometry.
struct DiracParams {
  double mass_energy = 0.0;    // mc^2 [MHz]
  double hbar_c = 0.0;         // c*hbar [MHz mm]
  double dirac_point = 0.0;    // f0 [MHz]
  double step_height = 0.0;    // V0 = delta f [MHz]
  double lattice_const = 0.0;  // a0 [mm]
  double step_position = 0.0;  // a [mm]
  double box_length = 0.0;     // d [mm]

  /// Length of the region behind the step, b = d - a.
  double step_tail() const { return box_length - step_position; }

  /// Klein window (mc^2, V0 - mc^2) in energy relative to f0.
  Interval klein_window() const {
    return {mass_energy, step_height - mass_energy};
  }

  /// Klein window in absolute frequency.
  Interval klein_window_frequency() const {
    return klein_window().shifted(dirac_point);
  }

  /// Margin that keeps window scans off the singular band edges.
  double window_margin() const { return 1e-6 * step_height; }

  /// Klein window shrunk by the margin on both sides.
  Interval scan_window() const {
    const auto w = klein_window();
    return {w.lo + window_margin(), w.hi - window_margin()};
  }
};

/// Throws ConfigError if any DiracParams invariant is violated.
void validate(const DiracParams& params);

/// Builds validated parameters. The step sits at a = (N_L + 1/4) a0 and the
/// box ends at d = (N_L + N_R + 1/2) a0, the positions of the ghost sites
/// that close the dimer chain.
DiracParams make_params(const Geometry& geometry, double mass_energy,
                        double hbar_c, double dirac_point, double step_height,
                        double lattice_const);

/// Extracted experimental constants of the resonator chain.
namespace constants {
inline constexpr double kMassEnergy = 12.894;      // MHz
inline constexpr double kHbarCPerA0 = 61.325;      // MHz (c*hbar / a0)
inline constexpr double kDiracPoint = 6713.0;      // MHz
inline constexpr double kStepHeight = 81.5;        // MHz
inline constexpr double kLatticeConst = 20.5;      // mm
inline constexpr double kDisorderSigma = 2.7;      // MHz, bare-frequency scatter
inline constexpr double kHbarC = kHbarCPerA0 * kLatticeConst;  // MHz mm
}  // namespace constants

/// make_params with the extracted experimental constants.
DiracParams default_params(const Geometry& geometry);

enum class PresetId { E1, E2, E3, E4 };

struct ExperimentPreset {
  PresetId id = PresetId::E1;
  Geometry geometry;
  double disorder_sigma = 0.0;  // MHz
  std::uint64_t seed = 0;
  bool permute = false;
};

/// E1/E2/E3 are (15,15); E4 is (15,9). E2 is E1 with another seed; E3 reuses
/// E1's seed (hence its disorder draws) and permutes them.
ExperimentPreset preset(PresetId id);

/// Case-insensitive lookup ("e1", "E4", ...). Throws ConfigError.
ExperimentPreset preset(std::string_view name);

std::string to_string(PresetId id);

std::vector<ExperimentPreset> all_presets();

}  // namespace kleinbox
