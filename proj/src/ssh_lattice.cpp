#include "kleinbox/ssh_lattice.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>

namespace kleinbox::lattice {
namespace {

enum Stream : std::uint64_t {
  kLeftDraws = 0,
  kRightDraws = 1,
  kLeftPermutation = 2,
  kRightPermutation = 3,
};

std::mt19937_64 stream_engine(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

std::vector<double> group_draws(std::size_t count, double sigma,
                                std::uint64_t seed, Stream stream) {
  std::vector<double> out(count, 0.0);
  if (sigma <= 0.0) return out;
  auto engine = stream_engine(seed, stream);
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto& v : out) v = normal(engine);
  return out;
}

void permute_group(std::vector<double>& values, std::uint64_t seed,
                   Stream stream) {
  auto engine = stream_engine(seed, stream);
  std::shuffle(values.begin(), values.end(), engine);
}

/// Projected least-squares residual of c1 cos(kx) + c2 sin(kx).
double sinusoid_residual(std::span<const double> x, std::span<const double> y,
                         double k) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd basis(n, 2);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    basis(i, 0) = std::cos(k * x[i]);
    basis(i, 1) = std::sin(k * x[i]);
    rhs(i) = y[i];
  }
  const Eigen::VectorXd c = basis.colPivHouseholderQr().solve(rhs);
  return (basis * c - rhs).squaredNorm();
}

double interpolate(const std::vector<double>& x, const std::vector<double>& y,
                   double at) {
  if (at <= x.front()) return y.front();
  if (at >= x.back()) return y.back();
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  const auto i = static_cast<std::size_t>(it - x.begin());
  const double t = (at - x[i - 1]) / (x[i] - x[i - 1]);
  return (1.0 - t) * y[i - 1] + t * y[i];
}

}  // namespace

void validate(const ChainSpec& s) {
  if (s.n_left < 0 || s.n_right < 0 || s.n_cells() < 1) {
    throw ConfigError("chain needs at least one dimer");
  }
  if (!(s.inter > 0.0 && s.intra > s.inter)) {
    throw ConfigError("couplings must satisfy v > w > 0");
  }
  if (s.disorder_sigma < 0.0) throw ConfigError("disorder sigma must be >= 0");
}

ChainSpec chain_for(const Geometry& geometry, const DiracParams& p,
                    double disorder_sigma, std::uint64_t seed, bool permute) {
  ChainSpec s;
  s.n_left = geometry.n_left;
  s.n_right = geometry.n_right;
  s.inter = p.hbar_c / p.lattice_const;
  s.intra = s.inter + p.mass_energy;
  s.onsite_left = p.dirac_point;
  s.onsite_right = p.dirac_point + p.step_height;
  s.disorder_sigma = disorder_sigma;
  s.seed = seed;
  s.permute = permute;
  validate(s);
  return s;
}

ChainSpec chain_for(const ExperimentPreset& preset, const DiracParams& p) {
  return chain_for(preset.geometry, p, preset.disorder_sigma, preset.seed,
                   preset.permute);
}

ChainSpec left_alone(const ChainSpec& full) {
  ChainSpec s = full;
  s.n_right = 0;
  return s;
}

ChainSpec right_alone(const ChainSpec& full) {
  ChainSpec s = full;
  s.n_left = 0;
  return s;
}

std::vector<double> disorder_draws(const ChainSpec& s) {
  auto left = group_draws(2 * static_cast<std::size_t>(s.n_left),
                          s.disorder_sigma, s.seed, kLeftDraws);
  auto right = group_draws(2 * static_cast<std::size_t>(s.n_right),
                           s.disorder_sigma, s.seed, kRightDraws);
  left.insert(left.end(), right.begin(), right.end());
  return left;
}

Eigen::MatrixXd Tridiagonal::dense() const {
  const auto n = size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = diagonal(i);
    if (i + 1 < n) {
      m(i, i + 1) = off_diagonal(i);
      m(i + 1, i) = off_diagonal(i);
    }
  }
  return m;
}

double Tridiagonal::norm() const {
  double best = 0.0;
  const auto n = size();
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = std::abs(diagonal(i));
    if (i > 0) row += std::abs(off_diagonal(i - 1));
    if (i + 1 < n) row += std::abs(off_diagonal(i));
    best = std::max(best, row);
  }
  return best;
}

Tridiagonal build_hamiltonian(const ChainSpec& s) {
  validate(s);
  const int n = s.site_count();
  const int n_left_sites = 2 * s.n_left;
  auto left = group_draws(static_cast<std::size_t>(n_left_sites),
                          s.disorder_sigma, s.seed, kLeftDraws);
  auto right = group_draws(static_cast<std::size_t>(n - n_left_sites),
                           s.disorder_sigma, s.seed, kRightDraws);
  if (s.permute) {
    permute_group(left, s.seed, kLeftPermutation);
    permute_group(right, s.seed, kRightPermutation);
  }
  Tridiagonal h;
  h.diagonal.resize(n);
  h.off_diagonal.resize(std::max(0, n - 1));
  for (int i = 0; i < n; ++i) {
    h.diagonal(i) = i < n_left_sites
                        ? s.onsite_left + left[static_cast<std::size_t>(i)]
                        : s.onsite_right +
                              right[static_cast<std::size_t>(i - n_left_sites)];
    if (i + 1 < n) h.off_diagonal(i) = i % 2 == 0 ? s.intra : s.inter;
  }
  return h;
}

std::vector<int> LatticeEigensystem::in_window() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == LevelClass::InWindow) out.push_back(static_cast<int>(i));
  }
  return out;
}

void classify(LatticeEigensystem& eig, const Interval& window) {
  eig.classes.resize(static_cast<std::size_t>(eig.size()));
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    const double f = eig.frequencies(i);
    eig.classes[static_cast<std::size_t>(i)] =
        f <= window.lo   ? LevelClass::BelowWindow
        : f >= window.hi ? LevelClass::AboveWindow
                         : LevelClass::InWindow;
  }
}

LatticeEigensystem eigensolve(const Tridiagonal& h,
                              std::optional<Interval> window) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(h.diagonal, h.off_diagonal,
                                Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("tridiagonal eigensolver did not converge");
  }
  LatticeEigensystem eig;
  eig.frequencies = solver.eigenvalues();
  eig.vectors = solver.eigenvectors();

  const double tol = 1e-9 * h.norm();
  const auto n = h.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto v = eig.vectors.col(k);
    double residual = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double hv = h.diagonal(i) * v(i);
      if (i > 0) hv += h.off_diagonal(i - 1) * v(i - 1);
      if (i + 1 < n) hv += h.off_diagonal(i) * v(i + 1);
      const double r = hv - eig.frequencies(k) * v(i);
      residual += r * r;
    }
    if (!(std::sqrt(residual) < tol)) {
      throw ConvergenceError("eigenpair " + std::to_string(k) +
                             " fails the residual check");
    }
  }
  if (window) classify(eig, *window);
  return eig;
}

double SiteMap::x(int site) const {
  const int cell = site / 2 + 1;
  return is_a(site) ? (cell - 0.5) * lattice_const : cell * lattice_const;
}

std::vector<double> Envelope::intensity_a() const {
  std::vector<double> out(amp_a.size());
  std::transform(amp_a.begin(), amp_a.end(), out.begin(),
                 [](double v) { return v * v; });
  return out;
}

std::vector<double> Envelope::intensity_b() const {
  std::vector<double> out(amp_b.size());
  std::transform(amp_b.begin(), amp_b.end(), out.begin(),
                 [](double v) { return v * v; });
  return out;
}

Envelope sublattice_envelopes(const LatticeEigensystem& eig, int n,
                              const SiteMap& map) {
  if (n < 0 || n >= eig.size()) throw DomainError("level index out of range");
  if (2 * map.n_cells != eig.vectors.rows()) {
    throw DomainError("site map does not match the eigensystem");
  }
  Envelope env;
  const auto v = eig.vectors.col(n);
  for (int site = 0; site < 2 * map.n_cells; ++site) {
    const int cell = site / 2 + 1;
    const double gauge = cell % 2 == 0 ? 1.0 : -1.0;
    if (SiteMap::is_a(site)) {
      env.x_a.push_back(map.x(site));
      env.amp_a.push_back(gauge * v(site));
    } else {
      env.x_b.push_back(map.x(site));
      env.amp_b.push_back(gauge * v(site));
    }
  }
  return env;
}

namespace {

// Continues y[0], y[1], ... one spacing before y[0]. Inside a uniform region
// each sublattice obeys y[j-1] + y[j+1] = c y[j]; c is fitted by least
// squares over the first `count` samples and the recurrence is run once
// backwards.
double recurrence_extrapolation(const std::vector<double>& y, std::size_t count) {
  double num = 0.0, den = 0.0;
  for (std::size_t j = 1; j + 1 < count; ++j) {
    num += y[j] * (y[j - 1] + y[j + 1]);
    den += y[j] * y[j];
  }
  const double c = den > 0.0 ? num / den : 0.0;
  return c * y[0] - y[1];
}

// Same for a squared sinusoid, which obeys I[j-1] + I[j+1] = c I[j] + d.
double intensity_extrapolation(const std::vector<double>& y, std::size_t count) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(count - 2), 2);
  Eigen::VectorXd rhs(m.rows());
  for (std::size_t j = 1; j + 1 < count; ++j) {
    const auto r = static_cast<Eigen::Index>(j - 1);
    m(r, 0) = y[j];
    m(r, 1) = 1.0;
    rhs(r) = y[j - 1] + y[j + 1];
  }
  const Eigen::Vector2d cd = m.colPivHouseholderQr().solve(rhs);
  return cd(0) * y[0] + cd(1) - y[1];
}

}  // namespace

BoundaryExtrapolation boundary_extrapolation(const Envelope& env,
                                             const SiteMap& map) {
  const std::size_t n = env.amp_a.size();
  if (n < 4 || env.amp_b.size() != n) throw DomainError("envelope too short");
  if (static_cast<std::size_t>(map.n_cells) != n) throw DomainError("site map does not match envelope");
  double scale = 0.0;
  for (double v : env.amp_a) scale = std::max(scale, std::abs(v));
  for (double v : env.amp_b) scale = std::max(scale, std::abs(v));
  // Eight cells stay clear of the step for every preset geometry.
  const std::size_t count = std::min<std::size_t>(8, n);
  std::vector<double> a(env.amp_a.rbegin(), env.amp_a.rend());
  BoundaryExtrapolation out;
  out.b_at_left_wall = recurrence_extrapolation(env.amp_b, count) / scale;
  out.a_at_right_wall = recurrence_extrapolation(a, count) / scale;
  return out;
}

BoundaryExtrapolation boundary_extrapolation(std::span<const double> a_intensity,
                                             std::span<const double> b_intensity) {
  const std::size_t n = a_intensity.size();
  if (n < 5 || b_intensity.size() != n) throw DomainError("intensity profile too short");
  double scale = 0.0;
  for (double v : a_intensity) scale = std::max(scale, v);
  for (double v : b_intensity) scale = std::max(scale, v);
  const std::size_t count = std::min<std::size_t>(8, n);
  const std::vector<double> b(b_intensity.begin(), b_intensity.end());
  const std::vector<double> a(a_intensity.rbegin(), a_intensity.rend());
  return {intensity_extrapolation(b, count) / scale, intensity_extrapolation(a, count) / scale};
}

WavevectorEstimate estimate_wavevector(std::span<const double> x,
                                       std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("sample size mismatch");
  if (x.size() < 4) throw DomainError("segment too short: need at least 4 sites");
  const std::size_t n = x.size();
  const double h = (x[n - 1] - x[0]) / static_cast<double>(n - 1);
  const double k_nyquist = std::numbers::pi / h;

  // Zero-padded DFT magnitude on [0, Nyquist].
  const std::size_t pad = std::max<std::size_t>(4096, 64 * n);
  const std::size_t half = pad / 2;
  std::vector<double> mag(half + 1);
  for (std::size_t b = 0; b <= half; ++b) {
    std::complex<double> acc = 0.0;
    const double w = -2.0 * std::numbers::pi * static_cast<double>(b) /
                     static_cast<double>(pad);
    for (std::size_t j = 0; j < n; ++j) {
      acc += y[j] * std::polar(1.0, w * static_cast<double>(j));
    }
    mag[b] = std::abs(acc);
  }
  const auto peak = static_cast<std::size_t>(
      std::max_element(mag.begin(), mag.end()) - mag.begin());
  double offset = 0.0;
  if (peak > 0 && peak < half) {
    const double y0 = mag[peak - 1];
    const double y1 = mag[peak];
    const double y2 = mag[peak + 1];
    const double den = y0 - 2.0 * y1 + y2;
    if (den != 0.0) offset = 0.5 * (y0 - y2) / den;
  }
  WavevectorEstimate est;
  est.k_fourier = 2.0 * std::numbers::pi * (static_cast<double>(peak) + offset) /
                  (static_cast<double>(pad) * h);

  // Refine with a projected sinusoid fit: coarse scan, then golden section.
  constexpr int kScan = 512;
  const double dk = k_nyquist / kScan;
  double best_k = est.k_fourier > 0.0 ? est.k_fourier : dk;
  double best_r = sinusoid_residual(x, y, best_k);
  for (int i = 1; i <= kScan; ++i) {
    const double k = dk * i;
    const double r = sinusoid_residual(x, y, k);
    if (r < best_r) {
      best_r = r;
      best_k = k;
    }
  }
  double lo = std::max(0.25 * dk, best_k - 1.5 * dk);
  double hi = std::min(k_nyquist, best_k + 1.5 * dk);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double k1 = hi - inv_phi * (hi - lo);
  double k2 = lo + inv_phi * (hi - lo);
  double r1 = sinusoid_residual(x, y, k1);
  double r2 = sinusoid_residual(x, y, k2);
  for (int it = 0; it < 100 && hi - lo > 1e-12 * k_nyquist; ++it) {
    if (r1 < r2) {
      hi = k2;
      k2 = k1;
      r2 = r1;
      k1 = hi - inv_phi * (hi - lo);
      r1 = sinusoid_residual(x, y, k1);
    } else {
      lo = k1;
      k1 = k2;
      r1 = r2;
      k2 = lo + inv_phi * (hi - lo);
      r2 = sinusoid_residual(x, y, k2);
    }
  }
  est.k = 0.5 * (lo + hi);

  // Intensity maxima, endpoints included.
  std::vector<double> in(n);
  for (std::size_t i = 0; i < n; ++i) in[i] = y[i] * y[i];
  int peaks = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool left_ok = i == 0 || in[i] > in[i - 1];
    const bool right_ok = i + 1 == n || in[i] >= in[i + 1];
    if (left_ok && right_ok) ++peaks;
  }
  est.peak_count = peaks;
  est.segment_length = static_cast<double>(n) * h;
  est.k_peak_count = peaks * std::numbers::pi / est.segment_length;
  return est;
}

WavevectorEstimate estimate_wavevector(const Envelope& env, Segment segment,
                                       double step_position) {
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < env.x_a.size(); ++i) {
    const bool left = env.x_a[i] < step_position;
    if (left == (segment == Segment::Left)) {
      x.push_back(env.x_a[i]);
      y.push_back(env.amp_a[i]);
    }
  }
  return estimate_wavevector(x, y);
}

LevelComparison compare_levels(const LatticeEigensystem& eig,
                               const continuum::LevelSet& reference,
                               double dirac_point) {
  const auto idx = eig.in_window();
  if (idx.size() != reference.size()) {
    throw LevelCountMismatch(reference.size(), idx.size(),
                             "in-window lattice levels vs continuum levels");
  }
  LevelComparison out;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    LevelPair pair;
    pair.lattice = eig.frequencies(idx[i]) - dirac_point;
    pair.continuum = reference.energies[i];
    pair.delta = pair.lattice - pair.continuum;
    out.max_abs_delta = std::max(out.max_abs_delta, std::abs(pair.delta));
    out.pairs.push_back(pair);
  }
  return out;
}

LevelComparison compare_levels(const LatticeEigensystem& eig,
                               const DiracParams& params) {
  LatticeEigensystem classified = eig;
  classify(classified, params.klein_window_frequency());
  return compare_levels(classified, continuum::find_levels(params),
                        params.dirac_point);
}

IntensityComparison compare_intensities(const LatticeEigensystem& eig, int n,
                                        const continuum::SpinorField& field,
                                        const SiteMap& map) {
  if (n < 0 || n >= eig.size()) throw DomainError("unmatched level index");
  if (2 * map.n_cells != eig.vectors.rows()) {
    throw DomainError("site map does not match the eigensystem");
  }
  const auto frame = continuum::to_lattice_frame(field);
  std::vector<double> i1(frame.size());
  std::vector<double> i2(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    i1[i] = std::norm(frame.comp1[i]);
    i2[i] = std::norm(frame.comp2[i]);
  }
  IntensityComparison out;
  const int sites = 2 * map.n_cells;
  double lat_sum = 0.0;
  double cont_sum = 0.0;
  for (int s = 0; s < sites; ++s) {
    const double v = eig.vectors(s, n);
    out.lattice.push_back(v * v);
    out.continuum.push_back(SiteMap::is_a(s) ? interpolate(frame.x, i1, map.x(s))
                                             : interpolate(frame.x, i2, map.x(s)));
    lat_sum += out.lattice.back();
    cont_sum += out.continuum.back();
  }
  double sq = 0.0;
  for (int s = 0; s < sites; ++s) {
    auto& l = out.lattice[static_cast<std::size_t>(s)];
    auto& c = out.continuum[static_cast<std::size_t>(s)];
    l /= lat_sum;
    c /= cont_sum;
    const double d = std::abs(l - c);
    out.max_abs = std::max(out.max_abs, d);
    sq += d * d;
  }
  out.l2 = std::sqrt(sq);
  return out;
}

}  // namespace kleinbox::lattice
