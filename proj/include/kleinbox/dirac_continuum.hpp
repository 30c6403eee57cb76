#pragma once

// Bounded 1D Dirac particle with a potential step:
//
//   H = -i c hbar sigma_x d/dx + m c^2 sigma_z + V(x),
//   V = 0 on [0, a), V = V0 on [a, d],
//
// closed by infinite-mass walls, Psi2/Psi1 = -i at x = 0 and +i at x = d.
// Inside the Klein window mc^2 < E < V0 - mc^2 the left region carries
// particle waves and the right region hole waves; the bound states follow
// from the four-channel scattering matrix.

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "kleinbox/core.hpp"

namespace kleinbox::continuum {

using Complex = std::complex<double>;
using Spinor = Eigen::Vector2cd;

/// Wavenumbers and spinor ratios at energy E (relative to f0).
struct ChannelKinematics {
  double energy = 0.0;      // MHz
  double k_particle = 0.0;  // k, 1/mm
  double k_hole = 0.0;      // kappa, 1/mm
  double xi = 0.0;          // c hbar k / (E + mc^2)
  double zeta = 0.0;        // c hbar kappa / (V0 - E + mc^2)
};

/// Throws DomainError unless mc^2 + eps <= E <= V0 - mc^2 - eps with
/// eps = 1e-6 V0.
ChannelKinematics kinematics(double energy, const DiracParams& params);

/// Scattering amplitudes at the step and off the walls.
struct InterfaceCoefficients {
  double r = 0.0;  // r_pp = r_hh
  double t = 0.0;  // sqrt(1 - r^2)
  Complex r_left_wall;
  Complex r_right_wall;
  /// t_ph = e^{i pi} t_hp; stored as t_hp = transmission_sign * t_ph.
  double transmission_sign = -1.0;

  double t_ph() const { return t; }
  double t_hp() const { return transmission_sign * t; }
};

InterfaceCoefficients interface_coefficients(const ChannelKinematics& kin);

/// g(E) = cos(phi_a - phi_b) + r cos(phi_a + phi_b) with
/// phi_a = k a + atan(xi), phi_b = kappa b + atan(zeta). Bound states are
/// the roots of g.
double quantization_residual(double energy, const DiracParams& params);

/// The 4x4 scattering matrix over the channels (particle left-moving,
/// particle right-moving, hole left-moving, hole right-moving).
Eigen::Matrix4cd scattering_matrix(double energy, const DiracParams& params);

/// det(1 - S). Independent of quantization_residual; used to cross-check it.
Complex scattering_determinant(double energy, const DiracParams& params);

/// Golden-section search for the minimum of |det(1 - S)| on
/// [guess - half_width, guess + half_width].
double locate_determinant_minimum(double guess, const DiracParams& params,
                                  double half_width);

/// Sorted energies (relative to f0) with their residuals |g(E_n)|.
struct LevelSet {
  std::vector<double> energies;
  std::vector<double> residuals;
  Interval window;
  std::size_t scan_points = 0;

  std::size_t size() const { return energies.size(); }
};

/// All roots of g in the Klein window: sign changes on a uniform scan, then
/// bisection. The scan is repeated 4x finer until the root count is stable
/// (at most three escalations, else ConvergenceError).
LevelSet find_levels(const DiracParams& params);

enum class Branch { Particle, Hole };

/// n-th level (n >= 1) of a uniform box of the given length, as the
/// excitation energy above the band center: the root eps > mass of
/// k L + 2 atan(xi) = n pi, k = sqrt(eps^2 - mass^2) / hbar_c.
double box_level_energy(double length, int n, double mass, double hbar_c);

/// Levels of a uniform box with infinite-mass walls that fall in the Klein
/// window. Particle branch: V = 0, E = eps_n. Hole branch: V = V0,
/// E = V0 - eps_n. Sorted ascending.
LevelSet single_box_levels(double length, const DiracParams& params,
                           Branch branch);

/// Sampled two-component wavefunction.
struct SpinorField {
  std::vector<double> x;  // mm, strictly increasing
  std::vector<Complex> comp1;
  std::vector<Complex> comp2;

  std::size_t size() const { return x.size(); }
  /// Trapezoid rule for the integral of |comp1|^2 + |comp2|^2.
  double norm() const;
};

/// c_f e^{ik(x-o)} forward + c_b e^{-ik(x-o)} backward on [begin, end].
struct PlaneWaveRegion {
  double begin = 0.0;
  double end = 0.0;
  double origin = 0.0;
  double wavenumber = 0.0;
  Spinor forward;
  Spinor backward;
  Complex c_forward;
  Complex c_backward;

  Spinor value(double x) const;
  Spinor derivative(double x) const;
  /// Exact integral of |value|^2 over the region.
  double weight() const;
};

/// Piecewise plane-wave eigenfunction, normalized exactly and phased so that
/// Psi1(0) is real and positive.
class Eigenstate {
 public:
  Eigenstate(double energy, std::vector<PlaneWaveRegion> regions);

  double energy() const { return energy_; }
  const std::vector<PlaneWaveRegion>& regions() const { return regions_; }
  double length() const { return regions_.back().end; }

  Spinor operator()(double x) const;
  /// One-sided values at a region boundary.
  Spinor left_limit(double x) const;
  Spinor right_limit(double x) const;

  /// Samples on a grid of spacing <= grid_step that contains every region
  /// boundary, renormalized so the trapezoid norm is exactly one.
  SpinorField sample(double grid_step) const;

 private:
  const PlaneWaveRegion& region_at(double x) const;

  double energy_;
  std::vector<PlaneWaveRegion> regions_;
};

/// Bound state of the stepped box at a root E of g. Throws DomainError if
/// |g(E)| >= 1e-8 and ConvergenceError if the matching system is not
/// singular.
Eigenstate solve_eigenstate(double energy, const DiracParams& params);

/// solve_eigenstate(...).sample(grid_step).
SpinorField build_eigenstate(double energy, const DiracParams& params,
                             double grid_step);
SpinorField build_eigenstate(double energy, const DiracParams& params);

/// Bound state of a uniform box of the given length (particle: V = 0,
/// hole: V = V0) at one of its single_box_levels energies.
Eigenstate solve_box_eigenstate(double energy, double length,
                                const DiracParams& params, Branch branch);

/// psi = U Psi with U = (1/sqrt 2)[1, i; 1, -i]: components on the A and B
/// sublattices of the dimer chain.
Spinor to_lattice_frame(const Spinor& psi);
SpinorField to_lattice_frame(const SpinorField& field);

/// j(x) = Psi^dagger sigma_x Psi.
std::vector<double> probability_current(const SpinorField& field);

struct EigenstateDiagnostics {
  double norm_error = 0.0;         // |trapezoid norm - 1|
  double left_wall_residual = 0.0;   // |Psi2/Psi1 + i| at x = 0
  double right_wall_residual = 0.0;  // |Psi2/Psi1 - i| at x = d
  double interface_jump = 0.0;     // max component jump at x = a, relative
  double max_current = 0.0;        // max |j(x)| on the sample grid
};

EigenstateDiagnostics diagnose(const Eigenstate& state,
                               const SpinorField& field);

/// Slope discontinuity of a lattice-frame intensity |psi_c|^2 at the step.
/// The first-order equation makes psi continuous but its derivative jumps
/// by (i V0 / c hbar) sigma_y psi, so the intensity slopes jump by
/// +-(2 V0 / c hbar) Re(conj(psi1) psi2).
struct KinkProbe {
  double slope_left = 0.0;
  double slope_right = 0.0;
  double expected_jump = 0.0;
  double second_difference = 0.0;            // centered on x = a
  double neighbor_second_difference = 0.0;   // max |.| at a +- h
  bool detected() const;
};

/// component: 1 (A sublattice) or 2 (B sublattice).
KinkProbe probe_interface_kink(const Eigenstate& state,
                               const DiracParams& params, int component,
                               double grid_step);

}  // namespace kleinbox::continuum
