#pragma once

// Dimer chain of coupled resonators (SSH model). Sites alternate A, B; site
// s = 2(j-1) is A_j and s = 2(j-1)+1 is B_j for cells j = 1..N. Couplings
// alternate v (inside a dimer) and w (between dimers), starting with v.
// Open ends act as ghost sites B_0 (x = 0) and A_{N+1} (x = d) with zero
// amplitude.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kleinbox/core.hpp"
#include "kleinbox/dirac_continuum.hpp"

namespace kleinbox::lattice {

struct ChainSpec {
  int n_left = 0;
  int n_right = 0;
  double intra = 0.0;         // v [MHz]
  double inter = 0.0;         // w [MHz]
  double onsite_left = 0.0;   // MHz
  double onsite_right = 0.0;  // MHz
  double disorder_sigma = 0.0;  // MHz
  std::uint64_t seed = 0;
  bool permute = false;

  int n_cells() const { return n_left + n_right; }
  int site_count() const { return 2 * n_cells(); }
};

/// Throws ConfigError unless v > w > 0 and the chain has at least one cell.
void validate(const ChainSpec& spec);

/// Chain equivalent to the continuum box: w = c hbar / a0, v = w + mc^2,
/// on-site f0 on the left and f0 + V0 on the right.
ChainSpec chain_for(const Geometry& geometry, const DiracParams& params,
                    double disorder_sigma = 0.0, std::uint64_t seed = 0,
                    bool permute = false);
ChainSpec chain_for(const ExperimentPreset& preset, const DiracParams& params);

/// The left N_L dimers alone (all on-site f0) and the right N_R dimers alone
/// (all on-site f0 + V0). Disorder draws are those of the corresponding
/// sites of the full chain.
ChainSpec left_alone(const ChainSpec& full);
ChainSpec right_alone(const ChainSpec& full);

/// On-site disorder offsets for every site, before permutation. Left and
/// right groups use separate streams so a half chain sees the same draws as
/// the full chain.
std::vector<double> disorder_draws(const ChainSpec& spec);

struct Tridiagonal {
  Eigen::VectorXd diagonal;
  Eigen::VectorXd off_diagonal;

  Eigen::Index size() const { return diagonal.size(); }
  Eigen::MatrixXd dense() const;
  /// Max absolute row sum.
  double norm() const;
};

Tridiagonal build_hamiltonian(const ChainSpec& spec);

enum class LevelClass { BelowWindow, InWindow, AboveWindow };

struct LatticeEigensystem {
  Eigen::VectorXd frequencies;  // ascending, MHz
  Eigen::MatrixXd vectors;      // column n is eigenvector n
  std::vector<LevelClass> classes;

  Eigen::Index size() const { return frequencies.size(); }
  /// Indices of InWindow levels, ascending.
  std::vector<int> in_window() const;
};

/// Full eigendecomposition. Checks every pair against
/// ||H v - f v|| < 1e-9 ||H|| and throws ConvergenceError naming the first
/// failing index. Levels are classified when a window is given.
LatticeEigensystem eigensolve(const Tridiagonal& h,
                              std::optional<Interval> window = std::nullopt);

/// Reclassifies levels against an absolute-frequency window.
void classify(LatticeEigensystem& eig, const Interval& window);

/// Continuum coordinates of the sites: A_j at (j - 1/2) a0, B_j at j a0.
struct SiteMap {
  int n_cells = 0;
  double lattice_const = 0.0;

  double x(int site) const;
  static bool is_a(int site) { return site % 2 == 0; }
  double ghost_b0() const { return 0.0; }
  double ghost_a_end() const { return (n_cells + 0.5) * lattice_const; }
};

/// Sublattice amplitudes of one eigenvector. `amp_*` are in the Bloch gauge
/// (alternating sign (-1)^j removed), so they vary slowly along the chain.
struct Envelope {
  std::vector<double> x_a;
  std::vector<double> amp_a;
  std::vector<double> x_b;
  std::vector<double> amp_b;

  std::vector<double> intensity_a() const;
  std::vector<double> intensity_b() const;
};

Envelope sublattice_envelopes(const LatticeEigensystem& eig, int n,
                              const SiteMap& map);

/// Extension of the B envelope to the ghost B_0 and of the A envelope to the
/// ghost A_{N+1}, relative to the largest amplitude. Uses the three-term
/// recurrence a uniform region imposes on each sublattice, with its
/// coefficient fitted to the eight samples nearest the wall.
struct BoundaryExtrapolation {
  double b_at_left_wall = 0.0;
  double a_at_right_wall = 0.0;
};

BoundaryExtrapolation boundary_extrapolation(const Envelope& env,
                                             const SiteMap& map);

/// The same for sign-free intensity profiles (e.g. extracted from spectra),
/// per sublattice in cell order: a squared sinusoid obeys
/// I[j-1] + I[j+1] = c I[j] + d, fitted near each wall.
BoundaryExtrapolation boundary_extrapolation(std::span<const double> a_intensity,
                                             std::span<const double> b_intensity);

enum class Segment { Left, Right };

struct WavevectorEstimate {
  double k = 0.0;            // refined dominant wavenumber [1/mm]
  double k_fourier = 0.0;    // zero-padded DFT peak, parabolic interpolation
  double k_peak_count = 0.0; // n_peaks pi / L
  int peak_count = 0;
  double segment_length = 0.0;  // mm
};

/// Dominant spatial frequency of uniformly spaced samples. The zero-padded
/// DFT peak (with parabolic interpolation) seeds a least-squares fit of
/// c1 cos(kx) + c2 sin(kx), which removes the short-window bias of the DFT.
/// Also counts intensity maxima. Needs at least 4 samples.
WavevectorEstimate estimate_wavevector(std::span<const double> x,
                                       std::span<const double> amplitude);

/// A-sublattice envelope restricted to one side of the step.
WavevectorEstimate estimate_wavevector(const Envelope& env, Segment segment,
                                       double step_position);

struct LevelPair {
  double lattice = 0.0;    // f_n - f0
  double continuum = 0.0;  // E_n
  double delta = 0.0;      // lattice - continuum
};

struct LevelComparison {
  std::vector<LevelPair> pairs;
  double max_abs_delta = 0.0;
};

/// Pairs in-window lattice levels with a continuum level set by ascending
/// order. Throws LevelCountMismatch when the counts differ.
LevelComparison compare_levels(const LatticeEigensystem& eig,
                               const continuum::LevelSet& reference,
                               double dirac_point);

/// Against find_levels(params), classifying with the params' Klein window.
LevelComparison compare_levels(const LatticeEigensystem& eig,
                               const DiracParams& params);

struct IntensityComparison {
  std::vector<double> lattice;    // site order, unit sum
  std::vector<double> continuum;  // |psi1|^2 at A sites, |psi2|^2 at B sites
  double max_abs = 0.0;
  double l2 = 0.0;
};

/// Compares |v_n(site)|^2 with the continuum intensities of psi = U Psi
/// interpolated from `field` (Dirac frame) at the site coordinates.
IntensityComparison compare_intensities(const LatticeEigensystem& eig, int n,
                                        const continuum::SpinorField& field,
                                        const SiteMap& map);

}  // namespace kleinbox::lattice
