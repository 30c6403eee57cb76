#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "kleinbox/dirac_continuum.hpp"
#include "kleinbox/pipeline.hpp"
#include "kleinbox/spectroscopy.hpp"
#include "kleinbox/ssh_lattice.hpp"

using namespace kleinbox;
using namespace kleinbox::spectro;

namespace {

const DiracParams kE1 = default_params({15, 15});

lattice::LatticeEigensystem single_level(double f) {
  lattice::LatticeEigensystem eig;
  eig.frequencies = Eigen::VectorXd::Constant(1, f);
  eig.vectors = Eigen::MatrixXd::Identity(1, 1);
  eig.classes = {lattice::LevelClass::InWindow};
  return eig;
}

lattice::LatticeEigensystem e1_clean() {
  return lattice::eigensolve(lattice::build_hamiltonian(lattice::chain_for(Geometry{15, 15}, kE1)),
                             kE1.klein_window_frequency());
}

SpectrumTrace synthetic(const std::vector<ResonancePeak>& peaks, const FrequencyGrid& grid,
                        double noise = 0.0, std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, noise);
  SpectrumTrace t;
  t.grid = grid;
  t.kind = TraceKind::Ldos;
  for (std::size_t i = 0; i < grid.count; ++i) {
    const double v = lorentzian_model(peaks, grid.at(i)) + (noise > 0.0 ? n(rng) : 0.0);
    t.values.emplace_back(v, 0.0);
  }
  return t;
}

// Width at half maximum of a sampled curve, from linear interpolation.
double sampled_fwhm(const std::vector<double>& x, const std::vector<double>& y) {
  const auto top = std::max_element(y.begin(), y.end()) - y.begin();
  const double half = 0.5 * y[static_cast<std::size_t>(top)];
  auto cross = [&](int dir) {
    for (auto i = top; i + dir >= 0 && i + dir < static_cast<long>(y.size()); i += dir) {
      const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(i + dir);
      if (y[b] < half) return x[a] + (half - y[a]) / (y[b] - y[a]) * (x[b] - x[a]);
    }
    return std::nan("");
  };
  return cross(1) - cross(-1);
}

}  // namespace

TEST_SUITE("spectroscopy") {

TEST_CASE("frequency grid") {
  const auto g = FrequencyGrid::covering({10.0, 20.0}, 0.5);
  CHECK(g.count == 21);
  CHECK(g.stop() == doctest::Approx(20.0));
  CHECK_THROWS_AS(FrequencyGrid::covering({10.0, 20.0}, 0.0), DomainError);
}

TEST_CASE("decoupled antenna reflects everything") {
  const auto g = FrequencyGrid::covering({6700.0, 6800.0}, 0.1);
  const auto t = synth_reflection(e1_clean(), 7, g, {2.0, 0.0, 0.0, 0});
  for (auto s : t.values) CHECK(s == std::complex<double>(1.0, 0.0));
}

TEST_CASE("single resonance line shapes") {
  const double gamma = 2.0, c = 0.7, f = 100.0;
  const auto g = FrequencyGrid::covering({80.0, 120.0}, 0.001);
  const auto t = synth_reflection(single_level(f), 0, g, {gamma, c, 0.0, 0});
  std::vector<double> re, sq, mag;
  for (auto s : t.values) {
    re.push_back(std::real(1.0 - s));
    sq.push_back(std::norm(1.0 - s));
    mag.push_back(std::abs(1.0 - s));
  }
  const auto x = g.values();
  for (std::size_t i = 0; i < x.size(); i += 97) {
    const double d = x[i] - f;
    const double lor = 0.25 * gamma * gamma / (d * d + 0.25 * gamma * gamma);
    CHECK(re[i] == doctest::Approx(c * lor).epsilon(1e-12));
    CHECK(sq[i] == doctest::Approx(c * c * lor).epsilon(1e-12));
  }
  CHECK(sampled_fwhm(x, re) == doctest::Approx(gamma).epsilon(1e-5));
  CHECK(sampled_fwhm(x, sq) == doctest::Approx(gamma).epsilon(1e-5));
  // |1 - S| is the square root of a Lorentzian and is wider by sqrt(3).
  CHECK(sampled_fwhm(x, mag) == doctest::Approx(std::sqrt(3.0) * gamma).epsilon(1e-5));
}

TEST_CASE("reflection noise is seeded per site") {
  const auto g = FrequencyGrid::covering({6720.0, 6790.0}, 0.05);
  const auto eig = e1_clean();
  const auto a = synth_reflection(eig, 3, g, {2.0, 1.0, 0.01, 5});
  const auto b = synth_reflection(eig, 3, g, {2.0, 1.0, 0.01, 5});
  const auto c = synth_reflection(eig, 4, g, {2.0, 1.0, 0.01, 5});
  CHECK(a.values == b.values);
  const auto all = synth_all_sites(eig, g, {2.0, 1.0, 0.01, 5});
  CHECK(all[3].values == a.values);
  CHECK(all[4].values == c.values);
}

TEST_CASE("peaks at the wall site recover the levels") {
  const auto eig = e1_clean();
  const auto g = pipeline::window_grid(kE1, 0.05);
  const auto t = synth_reflection(eig, 0, g, {2.0, 1.0, 0.0, 0});
  const auto w = kE1.klein_window_frequency();
  const auto peaks = detect_peaks(t.slice(w), 1e-4);
  const auto idx = eig.in_window();
  CHECK(peaks.size() == idx.size());
  for (const auto& p : peaks) {
    double best = 1e9;
    for (int n : idx) best = std::min(best, std::abs(eig.frequencies(n) - p.center));
    CHECK(best < 0.2);
  }
}

TEST_CASE("mid-chain site resolves at most the window levels") {
  const auto eig = e1_clean();
  const auto t = synth_reflection(eig, 29, pipeline::window_grid(kE1, 0.05), {2.0, 1.0, 0.0, 0});
  const auto peaks = detect_peaks(t.slice(kE1.klein_window_frequency()), 1e-3);
  CHECK(peaks.size() <= 10);
}

TEST_CASE("LDOS") {
  const auto eig = e1_clean();
  SUBCASE("integrates to one") {
    const auto g = FrequencyGrid::covering({6300.0, 7200.0}, 0.02);
    const std::vector<int> sites{0, 17, 59};
    const auto map = ldos_map(eig, sites, g, 2.0);
    for (Eigen::Index r = 0; r < map.values.rows(); ++r) {
      CHECK(map.values.row(r).sum() * g.step == doctest::Approx(1.0).epsilon(0.01));
      CHECK(map.values.row(r).minCoeff() >= 0.0);
    }
  }
  SUBCASE("linear in the intensity weights") {
    const auto g = FrequencyGrid::covering({6720.0, 6790.0}, 0.1);
    auto twice = eig;
    twice.vectors *= std::sqrt(2.0);
    const std::vector<int> sites{4, 40};
    const auto one = ldos_map(eig, sites, g, 2.0);
    const auto two = ldos_map(twice, sites, g, 2.0);
    CHECK((two.values - 2.0 * one.values).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("ten ridges near the continuum levels") {
    const auto w = kE1.klein_window_frequency();
    std::vector<int> sites(60);
    for (int i = 0; i < 60; ++i) sites[static_cast<std::size_t>(i)] = i;
    const auto map = ldos_map(eig, sites, pipeline::window_grid(kE1, 0.05), 2.0);
    const auto dos = map.dos().slice(w);
    const auto ys = dos.signal();
    const auto peaks = detect_peaks(dos, 0.05 * *std::max_element(ys.begin(), ys.end()));
    const auto levels = continuum::find_levels(kE1);
    REQUIRE(peaks.size() == levels.size());
    for (std::size_t n = 0; n < peaks.size(); ++n) {
      CHECK(std::abs(peaks[n].center - kE1.dirac_point - levels.energies[n]) <
            0.05 * kE1.step_height);
    }
  }
  SUBCASE("left-region DOS peaks sit on the eigenfrequencies") {
    const auto w = kE1.klein_window_frequency();
    const auto d = dos(eig, pipeline::window_grid(kE1, 0.05), 2.0, left_region_sites(15));
    const auto peaks = detect_peaks(d.slice(w), 1e-3);
    const auto idx = eig.in_window();
    REQUIRE(peaks.size() == idx.size());
    for (std::size_t n = 0; n < idx.size(); ++n) {
      CHECK(std::abs(peaks[n].center - eig.frequencies(idx[n])) < 1.0);
    }
  }
}

TEST_CASE("peak detection resolution") {
  const double gamma = 2.0;
  const auto g = FrequencyGrid::covering({0.0, 60.0}, 0.01);
  const auto far = synthetic({{25.0, gamma, 1.0}, {25.0 + 5 * gamma, gamma, 0.8}}, g);
  CHECK(detect_peaks(far, 0.05).size() == 2);
  const auto near = synthetic({{25.0, gamma, 1.0}, {25.0 + gamma / 4, gamma, 0.8}}, g);
  CHECK(detect_peaks(near, 0.05).size() == 1);
}

TEST_CASE("noise floor estimate") {
  const auto g = FrequencyGrid::covering({0.0, 100.0}, 0.01);
  const auto t = synthetic({{50.0, 2.0, 1.0}}, g, 0.01, 3);
  CHECK(noise_floor(t) == doctest::Approx(0.01).epsilon(0.1));
}

TEST_CASE("Lorentzian fits") {
  const double gamma = 2.0;
  const auto g = FrequencyGrid::covering({30.0, 70.0}, 0.02);

  SUBCASE("exact recovery without noise") {
    const ResonancePeak truth{50.3, gamma, 0.8};
    const auto t = synthetic({truth}, g);
    const std::vector<ResonancePeak> start{{50.0, 2.5, 0.7}};
    const auto fit = fit_lorentzians(t, start);
    REQUIRE(fit.converged);
    const auto& p = fit.peaks[0].peak;
    CHECK(p.center == doctest::Approx(truth.center).epsilon(1e-6));
    CHECK(p.width == doctest::Approx(truth.width).epsilon(1e-6));
    CHECK(p.amplitude == doctest::Approx(truth.amplitude).epsilon(1e-6));
    CHECK(std::abs(fit.baseline_offset) < 1e-8);
  }

  SUBCASE("center scatter at 1% noise") {
    double sq = 0.0;
    const int seeds = 100;
    for (int s = 0; s < seeds; ++s) {
      const auto t = synthetic({{50.0, gamma, 1.0}}, g, 0.01, static_cast<std::uint64_t>(s));
      const std::vector<ResonancePeak> start{detect_peaks(t, 0.5).front()};
      const auto fit = fit_lorentzians(t, start);
      const double e = fit.peaks[0].peak.center - 50.0;
      sq += e * e;
    }
    const double rms = std::sqrt(sq / seeds);
    MESSAGE("center RMS error " << rms << " MHz");
    CHECK(rms < gamma / 20.0);
  }

  SUBCASE("overlapping pair at 2 gamma") {
    int ok = 0;
    const int seeds = 50;
    for (int s = 0; s < seeds; ++s) {
      const auto t = synthetic({{48.0, gamma, 1.0}, {52.0, gamma, 0.7}}, g, 0.01,
                               static_cast<std::uint64_t>(100 + s));
      const std::vector<ResonancePeak> start{{47.5, 1.5, 0.9}, {52.5, 1.5, 0.6}};
      const auto fit = fit_lorentzians(t, start);
      ok += std::abs(fit.peaks[0].peak.center - 48.0) < gamma / 5 &&
            std::abs(fit.peaks[1].peak.center - 52.0) < gamma / 5;
    }
    CHECK(ok == seeds);
  }

  SUBCASE("a runaway peak is flagged") {
    const auto t = synthetic({{50.0, gamma, 1.0}}, g);
    const std::vector<ResonancePeak> start{{50.0, gamma, 1.0}, {40.0, 0.5, 0.3}};
    const auto fit = fit_lorentzians(t, start);
    CHECK(fit.peaks[1].flagged);
    CHECK(fit.peaks[1].peak.center == 40.0);
  }
}

TEST_CASE("level resolution on the summed spectrum") {
  const auto eig = e1_clean();
  const auto traces = synth_all_sites(eig, pipeline::window_grid(kE1, 0.05), {2.0, 1.0, 0.0, 0});
  const auto levels = resolve_levels(sum_signals(traces), kE1.klein_window_frequency());
  const auto idx = eig.in_window();
  REQUIRE(levels.size() == idx.size());
  for (std::size_t n = 0; n < idx.size(); ++n) {
    CHECK(std::abs(levels[n].peak.center - eig.frequencies(idx[n])) < 0.2);
    CHECK(levels[n].peak.width == doctest::Approx(2.0).epsilon(0.05));
  }
}

TEST_CASE("intensity extraction") {
  const auto eig = e1_clean();
  const auto grid = pipeline::window_grid(kE1, 0.05);
  const auto w = kE1.klein_window_frequency();

  SUBCASE("noise-free inversion of the forward model") {
    const auto rt = pipeline::spectroscopy_round_trip(eig, w, grid, {2.0, 1.0, 0.0, 0}, 2);
    CHECK(rt.max_intensity_error < 0.01);
    CHECK(rt.profile.converged_count >= 54);
    double sum = 0.0;
    for (double v : rt.profile.site) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    // B vanishes at the left ghost site and A at the right one.
    const auto ext = lattice::boundary_extrapolation(rt.profile.a, rt.profile.b);
    MESSAGE("ghost-site intensities: B_0 " << ext.b_at_left_wall << ", A_N+1 "
                                           << ext.a_at_right_wall);
    CHECK(std::abs(ext.b_at_left_wall) < 0.05);
    CHECK(std::abs(ext.a_at_right_wall) < 0.05);
  }

  SUBCASE("default noise, seed ensemble") {
    const int seeds = 20;
    int ok = 0;
    for (int s = 0; s < seeds; ++s) {
      const auto rt = pipeline::spectroscopy_round_trip(
          eig, w, grid, {2.0, 1.0, 1e-3, static_cast<std::uint64_t>(s + 1)}, 2);
      ok += rt.max_intensity_error < 0.05;
    }
    MESSAGE("seeds within 0.05: " << ok << "/" << seeds);
    CHECK(ok >= 19);
  }
}

}  // TEST_SUITE
