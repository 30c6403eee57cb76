#include "kleinbox/dirac_continuum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace kleinbox::continuum {
namespace {

constexpr Complex kI{0.0, 1.0};

double wavenumber(double excitation, double mass, double hbar_c) {
  // (eps - m)(eps + m) keeps precision near the band edge.
  const double q = (excitation - mass) * (excitation + mass);
  return std::sqrt(std::max(q, 0.0)) / hbar_c;
}

double box_phase(double excitation, double length, double mass,
                 double hbar_c) {
  const double k = wavenumber(excitation, mass, hbar_c);
  const double xi = hbar_c * k / (excitation + mass);
  return k * length + 2.0 * std::atan(xi);
}

/// Bisects f on [lo, hi] (opposite signs) down to floating-point resolution.
template <class F>
double bisect(F&& f, double lo, double hi) {
  double flo = f(lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  const double a = std::abs(f(lo));
  const double b = std::abs(f(hi));
  return a <= b ? lo : hi;
}

std::vector<double> scan_roots(const DiracParams& p, std::size_t points) {
  const Interval w = p.scan_window();
  std::vector<double> roots;
  auto g = [&](double e) { return quantization_residual(e, p); };
  double prev_e = w.lo;
  double prev_g = g(prev_e);
  for (std::size_t i = 1; i < points; ++i) {
    const double e = (i + 1 == points)
                         ? w.hi
                         : w.lo + w.width() * static_cast<double>(i) /
                                      static_cast<double>(points - 1);
    const double ge = g(e);
    if (prev_g == 0.0) {
      roots.push_back(prev_e);
    } else if ((ge < 0.0) != (prev_g < 0.0) && ge != 0.0) {
      roots.push_back(bisect(g, prev_e, e));
    }
    prev_e = e;
    prev_g = ge;
  }
  if (prev_g == 0.0) roots.push_back(prev_e);
  return roots;
}

Spinor particle_forward(double xi) { return Spinor(1.0, xi); }
Spinor particle_backward(double xi) { return Spinor(1.0, -xi); }
Spinor hole_forward(double zeta) { return Spinor(-zeta, 1.0); }
Spinor hole_backward(double zeta) { return Spinor(zeta, 1.0); }

PlaneWaveRegion particle_region(double begin, double end, double k,
                                double xi) {
  PlaneWaveRegion r;
  r.begin = begin;
  r.end = end;
  r.origin = 0.0;
  r.wavenumber = k;
  r.forward = particle_forward(xi);
  r.backward = particle_backward(xi);
  return r;
}

PlaneWaveRegion hole_region(double begin, double end, double kappa,
                            double zeta) {
  PlaneWaveRegion r;
  r.begin = begin;
  r.end = end;
  r.origin = end;
  r.wavenumber = kappa;
  r.forward = hole_forward(zeta);
  r.backward = hole_backward(zeta);
  return r;
}

/// Basis values of region coefficient `which` (0 forward, 1 backward) at x.
Spinor basis_value(const PlaneWaveRegion& r, int which, double x) {
  const double phase = r.wavenumber * (x - r.origin);
  return which == 0 ? Spinor(std::exp(kI * phase) * r.forward)
                    : Spinor(std::exp(-kI * phase) * r.backward);
}

/// Null vector of a square complex matrix, checked to be a genuine null
/// direction.
Eigen::VectorXcd null_vector(const Eigen::MatrixXcd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  if (!(smin <= 1e-6 * smax)) {
    std::ostringstream os;
    os << "matching system is not singular (sigma_min/sigma_max = "
       << smin / smax << "); energy is not an eigenvalue";
    throw ConvergenceError(os.str());
  }
  return svd.matrixV().col(s.size() - 1);
}

}  // namespace

ChannelKinematics kinematics(double energy, const DiracParams& p) {
  const Interval w = p.scan_window();
  if (!(energy >= w.lo)) {
    std::ostringstream os;
    os << "energy " << energy << " MHz is below the Klein window lower bound mc2 + eps = "
       << w.lo << " MHz";
    throw DomainError(os.str());
  }
  if (!(energy <= w.hi)) {
    std::ostringstream os;
    os << "energy " << energy << " MHz is above the Klein window upper bound V0 - mc2 - eps = "
       << w.hi << " MHz";
    throw DomainError(os.str());
  }
  ChannelKinematics kin;
  kin.energy = energy;
  const double m = p.mass_energy;
  const double hole = p.step_height - energy;
  kin.k_particle = wavenumber(energy, m, p.hbar_c);
  kin.k_hole = wavenumber(hole, m, p.hbar_c);
  kin.xi = p.hbar_c * kin.k_particle / (energy + m);
  kin.zeta = p.hbar_c * kin.k_hole / (hole + m);
  return kin;
}

InterfaceCoefficients interface_coefficients(const ChannelKinematics& kin) {
  InterfaceCoefficients c;
  const double xz = kin.xi * kin.zeta;
  c.r = (xz - 1.0) / (xz + 1.0);
  c.t = std::sqrt(std::max(0.0, (1.0 - c.r) * (1.0 + c.r)));
  c.r_left_wall = -std::exp(2.0 * kI * std::atan(kin.xi));
  c.r_right_wall = -std::exp(-2.0 * kI * std::atan(kin.zeta));
  return c;
}

double quantization_residual(double energy, const DiracParams& p) {
  const auto kin = kinematics(energy, p);
  const auto coeff = interface_coefficients(kin);
  const double phi_a = kin.k_particle * p.step_position + std::atan(kin.xi);
  const double phi_b = kin.k_hole * p.step_tail() + std::atan(kin.zeta);
  return std::cos(phi_a - phi_b) + coeff.r * std::cos(phi_a + phi_b);
}

Eigen::Matrix4cd scattering_matrix(double energy, const DiracParams& p) {
  const auto kin = kinematics(energy, p);
  const auto c = interface_coefficients(kin);
  const Complex ea = std::exp(kI * (kin.k_particle * p.step_position));
  const Complex eb = std::exp(-kI * (kin.k_hole * p.step_tail()));
  Eigen::Matrix4cd s = Eigen::Matrix4cd::Zero();
  s(0, 1) = c.r * ea;
  s(0, 2) = c.t_ph() * ea;
  s(1, 0) = c.r_left_wall * ea;
  s(2, 3) = c.r_right_wall * eb;
  s(3, 1) = c.t_hp() * eb;
  s(3, 2) = c.r * eb;
  return s;
}

Complex scattering_determinant(double energy, const DiracParams& p) {
  const Eigen::Matrix4cd m =
      Eigen::Matrix4cd::Identity() - scattering_matrix(energy, p);
  return m.determinant();
}

double locate_determinant_minimum(double guess, const DiracParams& p,
                                  double half_width) {
  const Interval w = p.scan_window();
  double lo = std::max(w.lo, guess - half_width);
  double hi = std::min(w.hi, guess + half_width);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&](double e) { return std::abs(scattering_determinant(e, p)); };
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  while (hi - lo > 1e-12 * std::max(1.0, std::abs(guess))) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    }
  }
  return 0.5 * (lo + hi);
}

LevelSet find_levels(const DiracParams& p) {
  validate(p);
  const double m = p.mass_energy;
  const double k_max = wavenumber(p.step_height - m, m, p.hbar_c);
  const double kappa_max = k_max;  // kappa at E = mc2 mirrors k at V0 - mc2
  const double estimate =
      (k_max * p.step_position + kappa_max * p.step_tail()) / std::numbers::pi;
  std::size_t points =
      64 * static_cast<std::size_t>(std::max(1.0, std::ceil(estimate)));

  auto coarse = scan_roots(p, points);
  for (int escalation = 0; escalation <= 3; ++escalation) {
    auto fine = scan_roots(p, 4 * points);
    if (fine.size() == coarse.size()) {
      LevelSet set;
      set.window = p.klein_window();
      set.scan_points = 4 * points;
      set.energies = std::move(fine);
      for (double e : set.energies) {
        set.residuals.push_back(std::abs(quantization_residual(e, p)));
      }
      return set;
    }
    if (escalation == 3) break;
    points *= 4;
    coarse = std::move(fine);
  }
  throw ConvergenceError(
      "find_levels: root count did not stabilize after 3 scan escalations");
}

double box_level_energy(double length, int n, double mass, double hbar_c) {
  if (n < 1) throw DomainError("box level index must be >= 1");
  if (!(length > 0.0)) throw DomainError("box length must be positive");
  const double target = n * std::numbers::pi;
  // At eps = sqrt(m^2 + (hbar_c n pi / L)^2) the phase already exceeds n pi.
  const double kn = target / length;
  const double hi = std::sqrt(mass * mass + hbar_c * hbar_c * kn * kn);
  return bisect(
      [&](double e) { return box_phase(e, length, mass, hbar_c) - target; },
      mass, hi);
}

LevelSet single_box_levels(double length, const DiracParams& p,
                           Branch branch) {
  if (!(length > 0.0)) throw DomainError("box length must be positive");
  const Interval w = p.scan_window();
  // Excitation above the band center: particle eps = E, hole eps = V0 - E.
  const double eps_max = branch == Branch::Particle ? w.hi : p.step_height - w.lo;
  const double eps_min = branch == Branch::Particle ? w.lo : p.step_height - w.hi;
  LevelSet set;
  set.window = p.klein_window();
  for (int n = 1;; ++n) {
    if (box_phase(eps_max, length, p.mass_energy, p.hbar_c) <=
        n * std::numbers::pi) {
      break;
    }
    const double eps = box_level_energy(length, n, p.mass_energy, p.hbar_c);
    if (eps < eps_min) continue;
    const double e = branch == Branch::Particle ? eps : p.step_height - eps;
    set.energies.push_back(e);
    set.residuals.push_back(std::abs(
        box_phase(eps, length, p.mass_energy, p.hbar_c) - n * std::numbers::pi));
  }
  if (branch == Branch::Hole) {
    std::reverse(set.energies.begin(), set.energies.end());
    std::reverse(set.residuals.begin(), set.residuals.end());
  }
  return set;
}

double SpinorField::norm() const {
  double sum = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double a = std::norm(comp1[i - 1]) + std::norm(comp2[i - 1]);
    const double b = std::norm(comp1[i]) + std::norm(comp2[i]);
    sum += 0.5 * (a + b) * (x[i] - x[i - 1]);
  }
  return sum;
}

Spinor PlaneWaveRegion::value(double x) const {
  const double phase = wavenumber * (x - origin);
  return c_forward * std::exp(kI * phase) * forward +
         c_backward * std::exp(-kI * phase) * backward;
}

Spinor PlaneWaveRegion::derivative(double x) const {
  const double phase = wavenumber * (x - origin);
  return kI * wavenumber *
         (c_forward * std::exp(kI * phase) * forward -
          c_backward * std::exp(-kI * phase) * backward);
}

double PlaneWaveRegion::weight() const {
  const double len = end - begin;
  double w = len * (std::norm(c_forward) * forward.squaredNorm() +
                    std::norm(c_backward) * backward.squaredNorm());
  const Complex overlap = backward.dot(forward);  // backward^dagger forward
  const Complex cross = c_forward * std::conj(c_backward) * overlap;
  Complex integral;
  if (wavenumber * len < 1e-8) {
    integral = len;
  } else {
    integral = (std::exp(2.0 * kI * wavenumber * (end - origin)) -
                std::exp(2.0 * kI * wavenumber * (begin - origin))) /
               (2.0 * kI * wavenumber);
  }
  w += 2.0 * std::real(cross * integral);
  return w;
}

Eigenstate::Eigenstate(double energy, std::vector<PlaneWaveRegion> regions)
    : energy_(energy), regions_(std::move(regions)) {
  double total = 0.0;
  for (const auto& r : regions_) total += r.weight();
  const Spinor at0 = regions_.front().value(regions_.front().begin);
  const Complex phase = std::conj(at0(0)) / std::abs(at0(0));
  const Complex scale = phase / std::sqrt(total);
  for (auto& r : regions_) {
    r.c_forward *= scale;
    r.c_backward *= scale;
  }
}

const PlaneWaveRegion& Eigenstate::region_at(double x) const {
  for (const auto& r : regions_) {
    if (x < r.end) return r;
  }
  return regions_.back();
}

Spinor Eigenstate::operator()(double x) const { return region_at(x).value(x); }

Spinor Eigenstate::left_limit(double x) const {
  for (const auto& r : regions_) {
    if (x <= r.end) return r.value(x);
  }
  return regions_.back().value(x);
}

Spinor Eigenstate::right_limit(double x) const {
  for (auto it = regions_.rbegin(); it != regions_.rend(); ++it) {
    if (x >= it->begin) return it->value(x);
  }
  return regions_.front().value(x);
}

SpinorField Eigenstate::sample(double grid_step) const {
  if (!(grid_step > 0.0)) throw DomainError("grid step must be positive");
  SpinorField field;
  auto push = [&](double x, const Spinor& v) {
    field.x.push_back(x);
    field.comp1.push_back(v(0));
    field.comp2.push_back(v(1));
  };
  for (const auto& r : regions_) {
    const double len = r.end - r.begin;
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(len / grid_step - 1e-9)));
    const std::size_t first = field.x.empty() ? 0 : 1;
    for (std::size_t i = first; i <= n; ++i) {
      const double x = i == n ? r.end : r.begin + len * static_cast<double>(i) / static_cast<double>(n);
      push(x, r.value(x));
    }
  }
  const double scale = 1.0 / std::sqrt(field.norm());
  for (auto& c : field.comp1) c *= scale;
  for (auto& c : field.comp2) c *= scale;
  return field;
}

Eigenstate solve_eigenstate(double energy, const DiracParams& p) {
  const double residual = quantization_residual(energy, p);
  if (!(std::abs(residual) < 1e-8)) {
    std::ostringstream os;
    os << "energy " << energy << " MHz is not a level: |g(E)| = "
       << std::abs(residual);
    throw DomainError(os.str());
  }
  const auto kin = kinematics(energy, p);
  const double a = p.step_position;
  const double d = p.box_length;
  std::vector<PlaneWaveRegion> regions{
      particle_region(0.0, a, kin.k_particle, kin.xi),
      hole_region(a, d, kin.k_hole, kin.zeta)};

  // Unknowns: left forward/backward, right forward/backward.
  Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
  for (int j = 0; j < 2; ++j) {
    const Spinor at0 = basis_value(regions[0], j, 0.0);
    m(0, j) = at0(1) + kI * at0(0);  // Psi2 = -i Psi1 at x = 0
    const Spinor left = basis_value(regions[0], j, a);
    const Spinor right = basis_value(regions[1], j, a);
    m(1, j) = left(0);
    m(2, j) = left(1);
    m(1, 2 + j) = -right(0);
    m(2, 2 + j) = -right(1);
    const Spinor atd = basis_value(regions[1], j, d);
    m(3, 2 + j) = atd(1) - kI * atd(0);  // Psi2 = +i Psi1 at x = d
  }
  const auto c = null_vector(m);
  regions[0].c_forward = c(0);
  regions[0].c_backward = c(1);
  regions[1].c_forward = c(2);
  regions[1].c_backward = c(3);
  return Eigenstate(energy, std::move(regions));
}

SpinorField build_eigenstate(double energy, const DiracParams& p,
                             double grid_step) {
  return solve_eigenstate(energy, p).sample(grid_step);
}

SpinorField build_eigenstate(double energy, const DiracParams& p) {
  return build_eigenstate(energy, p, p.lattice_const / 40.0);
}

Eigenstate solve_box_eigenstate(double energy, double length,
                                const DiracParams& p, Branch branch) {
  const auto kin = kinematics(energy, p);
  PlaneWaveRegion region = branch == Branch::Particle
                               ? particle_region(0.0, length, kin.k_particle, kin.xi)
                               : hole_region(0.0, length, kin.k_hole, kin.zeta);
  Eigen::Matrix2cd m;
  for (int j = 0; j < 2; ++j) {
    const Spinor at0 = basis_value(region, j, 0.0);
    const Spinor atl = basis_value(region, j, length);
    m(0, j) = at0(1) + kI * at0(0);
    m(1, j) = atl(1) - kI * atl(0);
  }
  const auto c = null_vector(m);
  region.c_forward = c(0);
  region.c_backward = c(1);
  return Eigenstate(energy, {region});
}

Spinor to_lattice_frame(const Spinor& psi) {
  const double s = std::numbers::sqrt2 / 2.0;
  return Spinor(s * (psi(0) + kI * psi(1)), s * (psi(0) - kI * psi(1)));
}

SpinorField to_lattice_frame(const SpinorField& field) {
  SpinorField out;
  out.x = field.x;
  out.comp1.resize(field.size());
  out.comp2.resize(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    const Spinor v = to_lattice_frame(Spinor(field.comp1[i], field.comp2[i]));
    out.comp1[i] = v(0);
    out.comp2[i] = v(1);
  }
  return out;
}

std::vector<double> probability_current(const SpinorField& field) {
  std::vector<double> j(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    j[i] = 2.0 * std::real(std::conj(field.comp1[i]) * field.comp2[i]);
  }
  return j;
}

EigenstateDiagnostics diagnose(const Eigenstate& state,
                               const SpinorField& field) {
  EigenstateDiagnostics d;
  d.norm_error = std::abs(field.norm() - 1.0);
  const Spinor at0 = state(0.0);
  const Spinor atd = state.left_limit(state.length());
  d.left_wall_residual = std::abs(at0(1) / at0(0) + kI);
  d.right_wall_residual = std::abs(atd(1) / atd(0) - kI);
  double scale = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    scale = std::max({scale, std::abs(field.comp1[i]), std::abs(field.comp2[i])});
  }
  const auto& regions = state.regions();
  for (std::size_t r = 0; r + 1 < regions.size(); ++r) {
    const double x = regions[r].end;
    const Spinor jump = regions[r].value(x) - regions[r + 1].value(x);
    d.interface_jump = std::max(d.interface_jump, jump.cwiseAbs().maxCoeff() / scale);
  }
  for (double j : probability_current(field)) {
    d.max_current = std::max(d.max_current, std::abs(j));
  }
  return d;
}

bool KinkProbe::detected() const {
  return std::abs(second_difference) > 10.0 * neighbor_second_difference &&
         std::abs(slope_right - slope_left) > 0.0;
}

KinkProbe probe_interface_kink(const Eigenstate& state, const DiracParams& p,
                               int component, double h) {
  if (component != 1 && component != 2) {
    throw DomainError("component must be 1 or 2");
  }
  const int idx = component - 1;
  const double a = p.step_position;
  auto intensity = [&](double x) {
    return std::norm(to_lattice_frame(state(x))(idx));
  };
  auto slope = [&](const Spinor& value, const Spinor& deriv) {
    const Spinor v = to_lattice_frame(value);
    const Spinor dv = to_lattice_frame(deriv);
    return 2.0 * std::real(std::conj(v(idx)) * dv(idx));
  };
  const auto& regions = state.regions();
  const PlaneWaveRegion* left = nullptr;
  const PlaneWaveRegion* right = nullptr;
  for (std::size_t r = 0; r + 1 < regions.size(); ++r) {
    if (std::abs(regions[r].end - a) < 1e-9 * p.box_length) {
      left = &regions[r];
      right = &regions[r + 1];
    }
  }
  if (left == nullptr) throw DomainError("state has no interface at x = a");

  KinkProbe k;
  k.slope_left = slope(left->value(a), left->derivative(a));
  k.slope_right = slope(right->value(a), right->derivative(a));
  const Spinor psi = to_lattice_frame(left->value(a));
  const double base = 2.0 * p.step_height / p.hbar_c *
                      std::real(std::conj(psi(0)) * psi(1));
  k.expected_jump = component == 1 ? base : -base;
  auto d2 = [&](double x) {
    return intensity(x + h) - 2.0 * intensity(x) + intensity(x - h);
  };
  k.second_difference = d2(a);
  k.neighbor_second_difference = std::max(std::abs(d2(a - h)), std::abs(d2(a + h)));
  return k;
}

}  // namespace kleinbox::continuum
