#include "kleinbox/spectroscopy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "kleinbox/parallel.hpp"

namespace kleinbox::spectro {
namespace {

using Complex = std::complex<double>;

std::mt19937_64 site_engine(std::uint64_t seed, int site) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(site), 0x5eedu};
  return std::mt19937_64(seq);
}

double lorentz_shape(double detuning, double width) {
  const double h2 = 0.25 * width * width;
  return h2 / (detuning * detuning + h2);
}

double interpolate_crossing(const std::vector<double>& x,
                            const std::vector<double>& y, std::size_t i,
                            std::size_t j, double level) {
  const double t = (level - y[i]) / (y[j] - y[i]);
  return x[i] + t * (x[j] - x[i]);
}

}  // namespace

std::vector<double> FrequencyGrid::values() const {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = at(i);
  return out;
}

FrequencyGrid FrequencyGrid::covering(const Interval& range, double step) {
  if (!(step > 0.0) || !(range.hi > range.lo)) {
    throw DomainError("frequency grid needs a positive step and range");
  }
  FrequencyGrid g;
  g.start = range.lo;
  g.step = step;
  g.count = static_cast<std::size_t>(std::ceil(range.width() / step - 1e-9)) + 1;
  return g;
}

std::vector<double> SpectrumTrace::signal() const {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = kind == TraceKind::Reflection ? 1.0 - values[i].real() : values[i].real();
  }
  return out;
}

SpectrumTrace SpectrumTrace::slice(const Interval& range) const {
  SpectrumTrace out;
  out.probe_site = probe_site;
  out.kind = kind;
  out.grid.step = grid.step;
  bool started = false;
  for (std::size_t i = 0; i < grid.count; ++i) {
    const double f = grid.at(i);
    if (f < range.lo || f > range.hi) continue;
    if (!started) {
      out.grid.start = f;
      started = true;
    }
    out.values.push_back(values[i]);
  }
  out.grid.count = out.values.size();
  return out;
}

SpectrumTrace synth_reflection(const lattice::LatticeEigensystem& eig, int site,
                               const FrequencyGrid& grid,
                               const ReflectionOptions& opt) {
  if (!(opt.gamma > 0.0)) throw DomainError("resonance width must be positive");
  if (site < 0 || site >= eig.vectors.rows()) throw DomainError("probe site out of range");
  SpectrumTrace trace;
  trace.probe_site = site;
  trace.grid = grid;
  trace.kind = TraceKind::Reflection;
  trace.values.assign(grid.count, Complex(1.0, 0.0));
  const double half = 0.5 * opt.gamma;
  for (Eigen::Index n = 0; n < eig.size(); ++n) {
    const double w = eig.vectors(site, n) * eig.vectors(site, n);
    const double fn = eig.frequencies(n);
    for (std::size_t i = 0; i < grid.count; ++i) {
      trace.values[i] -= Complex(0.0, opt.coupling * w) * half /
                         Complex(grid.at(i) - fn, half);
    }
  }
  if (opt.noise_sigma > 0.0) {
    auto engine = site_engine(opt.seed, site);
    std::normal_distribution<double> normal(0.0, opt.noise_sigma);
    for (auto& v : trace.values) {
      const double re = normal(engine);
      const double im = normal(engine);
      v += Complex(re, im);
    }
  }
  return trace;
}

std::vector<SpectrumTrace> synth_all_sites(const lattice::LatticeEigensystem& eig,
                                           const FrequencyGrid& grid,
                                           const ReflectionOptions& options) {
  return parallel_map(static_cast<std::size_t>(eig.vectors.rows()),
                      [&](std::size_t s) {
                        return synth_reflection(eig, static_cast<int>(s), grid, options);
                      });
}

SpectrumTrace sum_signals(std::span<const SpectrumTrace> traces) {
  if (traces.empty()) throw DomainError("no traces to sum");
  SpectrumTrace out;
  out.grid = traces.front().grid;
  out.kind = TraceKind::Ldos;
  out.values.assign(out.grid.count, 0.0);
  for (const auto& t : traces) {
    if (t.grid.count != out.grid.count) throw DomainError("traces use different grids");
    const auto s = t.signal();
    for (std::size_t i = 0; i < s.size(); ++i) out.values[i] += s[i];
  }
  return out;
}

double lorentzian_density(double detuning, double gamma) {
  return gamma / (2.0 * std::numbers::pi) /
         (detuning * detuning + 0.25 * gamma * gamma);
}

SpectrumTrace LdosMap::row(std::size_t i) const {
  SpectrumTrace t;
  t.probe_site = sites.at(i);
  t.grid = grid;
  t.kind = TraceKind::Ldos;
  t.values.resize(grid.count);
  for (std::size_t j = 0; j < grid.count; ++j) {
    t.values[j] = values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  return t;
}

SpectrumTrace LdosMap::dos() const {
  SpectrumTrace t;
  t.grid = grid;
  t.kind = TraceKind::Ldos;
  const Eigen::VectorXd sum = values.colwise().sum().transpose();
  t.values.resize(grid.count);
  for (std::size_t j = 0; j < grid.count; ++j) {
    t.values[j] = sum(static_cast<Eigen::Index>(j));
  }
  return t;
}

LdosMap ldos_map(const lattice::LatticeEigensystem& eig, std::span<const int> sites,
                 const FrequencyGrid& grid, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("broadening must be positive");
  LdosMap map;
  map.grid = grid;
  map.sites.assign(sites.begin(), sites.end());
  const auto n_sites = static_cast<Eigen::Index>(sites.size());
  const auto n_freq = static_cast<Eigen::Index>(grid.count);
  // Lorentzian kernel (levels x frequencies), shared by every site.
  Eigen::MatrixXd kernel(eig.size(), n_freq);
  for (Eigen::Index n = 0; n < eig.size(); ++n) {
    for (Eigen::Index j = 0; j < n_freq; ++j) {
      kernel(n, j) = lorentzian_density(
          grid.at(static_cast<std::size_t>(j)) - eig.frequencies(n), gamma);
    }
  }
  Eigen::MatrixXd weights(n_sites, eig.size());
  for (Eigen::Index i = 0; i < n_sites; ++i) {
    const int s = sites[static_cast<std::size_t>(i)];
    if (s < 0 || s >= eig.vectors.rows()) throw DomainError("site out of range");
    weights.row(i) = eig.vectors.row(s).cwiseAbs2();
  }
  map.values = weights * kernel;
  return map;
}

std::vector<int> left_region_sites(int n_left) {
  std::vector<int> out(static_cast<std::size_t>(2 * n_left));
  for (int i = 0; i < 2 * n_left; ++i) out[static_cast<std::size_t>(i)] = i;
  return out;
}

SpectrumTrace dos(const lattice::LatticeEigensystem& eig, const FrequencyGrid& grid,
                  double gamma, std::span<const int> sites) {
  return ldos_map(eig, sites, grid, gamma).dos();
}

std::vector<ResonancePeak> detect_peaks(const SpectrumTrace& trace,
                                        double prominence_threshold) {
  const auto y = trace.signal();
  const auto x = trace.grid.values();
  const std::size_t n = y.size();
  std::vector<ResonancePeak> peaks;
  if (n < 3) return peaks;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(y[i] > y[i - 1] && y[i] >= y[i + 1])) continue;
    // Prominence: walk each way until a higher sample or the trace end,
    // tracking the lowest point; the higher of the two minima is the base.
    double left_min = y[i];
    for (std::size_t j = i; j-- > 0;) {
      if (y[j] > y[i]) break;
      left_min = std::min(left_min, y[j]);
    }
    double right_min = y[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      if (y[j] > y[i]) break;
      right_min = std::min(right_min, y[j]);
    }
    const double base = std::max(left_min, right_min);
    const double prominence = y[i] - base;
    if (!(prominence > prominence_threshold)) continue;

    ResonancePeak p;
    const double den = y[i - 1] - 2.0 * y[i] + y[i + 1];
    const double offset = den != 0.0 ? 0.5 * (y[i - 1] - y[i + 1]) / den : 0.0;
    p.center = x[i] + offset * trace.grid.step;
    p.amplitude = y[i];
    const double level = y[i] - 0.5 * prominence;
    std::size_t l = i;
    while (l > 0 && y[l] > level) --l;
    std::size_t r = i;
    while (r + 1 < n && y[r] > level) ++r;
    const double xl = y[l] <= level ? interpolate_crossing(x, y, l, l + 1, level) : x[l];
    const double xr = y[r] <= level ? interpolate_crossing(x, y, r - 1, r, level) : x[r];
    p.width = std::max(xr - xl, 2.0 * trace.grid.step);
    peaks.push_back(p);
  }
  return peaks;
}

double noise_floor(const SpectrumTrace& trace) {
  const auto y = trace.signal();
  if (y.size() < 3) return 0.0;
  std::vector<double> d(y.size() - 1);
  for (std::size_t i = 0; i + 1 < y.size(); ++i) d[i] = std::abs(y[i + 1] - y[i]);
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  // Median absolute difference of white noise is 0.6745 sqrt(2) sigma.
  return *mid / (0.6745 * std::sqrt(2.0));
}

double lorentzian_model(std::span<const ResonancePeak> peaks, double nu) {
  double sum = 0.0;
  for (const auto& p : peaks) sum += p.amplitude * lorentz_shape(nu - p.center, p.width);
  return sum;
}

LorentzianFit fit_lorentzians(const SpectrumTrace& trace,
                              std::span<const ResonancePeak> initial,
                              const LorentzianFitOptions& options) {
  const auto y = trace.signal();
  const auto x = trace.grid.values();
  const auto m = static_cast<Eigen::Index>(y.size());
  const auto k = static_cast<Eigen::Index>(initial.size());
  const Eigen::Index nb = options.linear_baseline ? 2 : 0;
  const double mid = m > 0 ? 0.5 * (x.front() + x.back()) : 0.0;
  if (!options.fixed_shape.empty() &&
      options.fixed_shape.size() != initial.size()) {
    throw DomainError("fixed_shape must have one entry per peak");
  }
  auto fixed = [&](Eigen::Index j) {
    return !options.fixed_shape.empty() &&
           options.fixed_shape[static_cast<std::size_t>(j)];
  };

  LorentzianFit out;
  if (k == 0) {
    out.converged = true;
    return out;
  }

  // Full layout: (center, width, amplitude) per peak, then the baseline.
  // `free` lists the entries the optimizer moves.
  Eigen::VectorXd full(3 * k + nb);
  std::vector<Eigen::Index> free;
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& p = initial[static_cast<std::size_t>(j)];
    full.segment<3>(3 * j) << p.center, p.width, p.amplitude;
    if (!fixed(j)) {
      free.push_back(3 * j);
      free.push_back(3 * j + 1);
    }
    free.push_back(3 * j + 2);
  }
  for (Eigen::Index b = 0; b < nb; ++b) {
    full(3 * k + b) = 0.0;
    free.push_back(3 * k + b);
  }
  const auto nf = static_cast<Eigen::Index>(free.size());
  if (m < nf) throw DomainError("too few samples for the number of peaks");

  auto expand = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd p = full;
    for (Eigen::Index i = 0; i < nf; ++i) p(free[static_cast<std::size_t>(i)]) = v(i);
    return p;
  };
  fit::ResidualFn residual = [&](const Eigen::VectorXd& v) {
    const Eigen::VectorXd p = expand(v);
    Eigen::VectorXd r(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double nu = x[static_cast<std::size_t>(i)];
      double model = nb > 0 ? p(3 * k) + p(3 * k + 1) * (nu - mid) : 0.0;
      for (Eigen::Index j = 0; j < k; ++j) {
        model += p(3 * j + 2) * lorentz_shape(nu - p(3 * j), p(3 * j + 1));
      }
      r(i) = model - y[static_cast<std::size_t>(i)];
    }
    return r;
  };
  fit::JacobianFn jacobian = [&](const Eigen::VectorXd& v) {
    const Eigen::VectorXd p = expand(v);
    Eigen::MatrixXd full_j(m, 3 * k + nb);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double nu = x[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < k; ++j) {
        const double c = p(3 * j);
        const double g = p(3 * j + 1);
        const double a = p(3 * j + 2);
        const double d = nu - c;
        const double h2 = 0.25 * g * g;
        const double den = d * d + h2;
        full_j(i, 3 * j) = a * 2.0 * d * h2 / (den * den);
        full_j(i, 3 * j + 1) = a * 0.5 * g * d * d / (den * den);
        full_j(i, 3 * j + 2) = h2 / den;
      }
      if (nb > 0) {
        full_j(i, 3 * k) = 1.0;
        full_j(i, 3 * k + 1) = nu - mid;
      }
    }
    Eigen::MatrixXd J(m, nf);
    for (Eigen::Index i = 0; i < nf; ++i) J.col(i) = full_j.col(free[static_cast<std::size_t>(i)]);
    return J;
  };

  Eigen::VectorXd x0(nf);
  for (Eigen::Index i = 0; i < nf; ++i) x0(i) = full(free[static_cast<std::size_t>(i)]);
  const auto res = fit::lm_minimize(residual, jacobian, x0, options.lm);
  const Eigen::VectorXd p = expand(res.params);
  out.residual_norm = res.residual_norm;
  out.converged = res.converged;
  out.covariance = res.covariance;
  out.engine = res;
  if (nb > 0) {
    out.baseline_offset = p(3 * k);
    out.baseline_slope = p(3 * k + 1);
  }
  double scale = 0.0;
  for (double v : y) scale = std::max(scale, std::abs(v));
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& start = initial[static_cast<std::size_t>(j)];
    ResonancePeak peak{p(3 * j), std::abs(p(3 * j + 1)), p(3 * j + 2)};
    const bool drifted = std::abs(peak.center - start.center) > start.width;
    const bool bad = !res.converged || !(p(3 * j + 1) > 0.0) ||
                     !std::isfinite(peak.amplitude) ||
                     peak.amplitude < -1e-9 * scale;
    if (drifted || bad) {
      out.peaks.push_back({start, true});
    } else {
      peak.amplitude = std::max(peak.amplitude, 0.0);
      out.peaks.push_back({peak, false});
    }
  }
  return out;
}

std::vector<FittedPeak> resolve_levels(const SpectrumTrace& summed,
                                       const Interval& window,
                                       const LevelSearchOptions& options) {
  const auto local = summed.slice({window.lo - options.margin, window.hi + options.margin});
  const auto y = local.signal();
  if (y.empty()) throw DomainError("spectrum does not cover the window");
  const double y_max = *std::max_element(y.begin(), y.end());
  const double threshold = std::max(options.relative_prominence * y_max,
                                    options.noise_prominence * noise_floor(local));
  const auto peaks = detect_peaks(local, threshold);
  const auto fit = fit_lorentzians(local, peaks, options.fit);
  std::vector<FittedPeak> out;
  for (const auto& p : fit.peaks) {
    if (window.contains(p.peak.center)) out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.peak.center < b.peak.center;
  });
  return out;
}

namespace {

/// Linear least squares for the amplitudes (and baseline) with centers and
/// widths held fixed.
Eigen::VectorXd fixed_shape_amplitudes(const SpectrumTrace& trace,
                                       std::span<const ResonancePeak> peaks) {
  const auto y = trace.signal();
  const auto x = trace.grid.values();
  const auto m = static_cast<Eigen::Index>(y.size());
  const auto k = static_cast<Eigen::Index>(peaks.size());
  const double mid = 0.5 * (x.front() + x.back());
  Eigen::MatrixXd A(m, k + 2);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double nu = x[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto& p = peaks[static_cast<std::size_t>(j)];
      A(i, j) = lorentz_shape(nu - p.center, p.width);
    }
    A(i, k) = 1.0;
    A(i, k + 1) = nu - mid;
    b(i) = y[static_cast<std::size_t>(i)];
  }
  return A.colPivHouseholderQr().solve(b);
}

struct SiteAmplitude {
  double amplitude = 0.0;
  bool converged = false;
};

SiteAmplitude fit_site(const SpectrumTrace& trace, const ResonancePeak& level,
                       const ExtractionOptions& opt) {
  const double half = opt.half_window > 0.0 ? opt.half_window : 4.0 * level.width;
  // Window edges sit at signal minima near center -+ half, so no peak is cut
  // in two by the window boundary.
  const auto full = trace.signal();
  auto edge = [&](double target) {
    const double lo = target - level.width;
    const double hi = target + level.width;
    std::size_t best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < full.size(); ++i) {
      const double f = trace.grid.at(i);
      if (f < lo || f > hi) continue;
      if (full[i] < best_v) {
        best_v = full[i];
        best = i;
      }
    }
    return trace.grid.at(best);
  };
  const auto local = trace.slice({edge(level.center - half) - 1e-9,
                                  edge(level.center + half) + 1e-9});
  const auto y = local.signal();
  const double y_max = *std::max_element(y.begin(), y.end());
  const double y_min = *std::min_element(y.begin(), y.end());
  const double threshold = std::max(opt.relative_prominence * std::max(y_max - y_min, 1e-300),
                                    opt.noise_prominence * noise_floor(local));

  // Target first, then the neighbors found in the window.
  std::vector<ResonancePeak> start;
  const auto nearest = static_cast<std::size_t>(std::clamp(
      std::round((level.center - local.grid.start) / local.grid.step), 0.0,
      static_cast<double>(y.size() - 1)));
  start.push_back({level.center, level.width, std::max(y[nearest] - y_min, 0.0)});
  for (const auto& p : detect_peaks(local, threshold)) {
    if (std::abs(p.center - level.center) < 0.5 * level.width) continue;
    start.push_back(p);
  }

  SiteAmplitude out;
  try {
    LorentzianFitOptions fo;
    fo.fixed_shape.assign(start.size(), false);
    fo.fixed_shape.front() = true;
    const auto fit = fit_lorentzians(local, start, fo);
    if (!fit.peaks.front().flagged) {
      out.amplitude = std::max(fit.peaks.front().peak.amplitude, 0.0);
      out.converged = true;
      return out;
    }
  } catch (const Error&) {
    // fall through to the fixed-shape fit
  }
  out.amplitude = std::max(fixed_shape_amplitudes(local, start)(0), 0.0);
  return out;
}

}  // namespace

IntensityProfile extract_intensities(std::span<const SpectrumTrace> traces,
                                     const ResonancePeak& level,
                                     const ExtractionOptions& options) {
  if (traces.empty()) throw DomainError("no traces");
  if (!(level.width > 0.0)) throw DomainError("level width must be positive");
  const auto fits = parallel_map(traces.size(), [&](std::size_t i) {
    return fit_site(traces[i], level, options);
  });
  IntensityProfile out;
  double total = 0.0;
  for (const auto& f : fits) {
    out.raw_amplitude.push_back(f.amplitude);
    out.converged.push_back(f.converged);
    if (f.converged) ++out.converged_count;
    total += f.amplitude;
  }
  if (2 * out.converged_count < traces.size()) {
    throw ConvergenceError("intensity extraction: only " +
                           std::to_string(out.converged_count) + " of " +
                           std::to_string(traces.size()) + " site fits converged");
  }
  if (!(total > 0.0)) throw ConvergenceError("intensity extraction found no signal");
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const double v = fits[i].amplitude / total;
    out.site.push_back(v);
    const int site = traces[i].probe_site;
    (site % 2 == 0 ? out.a : out.b).push_back(v);
  }
  return out;
}

}  // namespace kleinbox::spectro
