#include "doctest.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "kleinbox/dirac_continuum.hpp"
#include "kleinbox/pipeline.hpp"
#include "kleinbox/param_fit.hpp"
#include "kleinbox/spectroscopy.hpp"

using namespace kleinbox;
using namespace kleinbox::fit;

namespace {

constexpr double kMass = 12.894;
constexpr double kHbarC = 61.325 * 20.5;
constexpr double kF0 = 6713.0;
constexpr double kDf = 81.5;

const DiracParams kE1 = default_params({15, 15});

struct Synthetic {
  std::vector<double> levels;
  std::vector<DispersionPair> pairs;
};

// Exact box levels of length L on either branch, with their wavenumbers.
Synthetic box_data(double length, continuum::Branch branch, int count) {
  Synthetic s;
  for (int n = 1; n <= count; ++n) {
    const double eps = continuum::box_level_energy(length, n, kMass, kHbarC);
    const double k = std::sqrt(eps * eps - kMass * kMass) / kHbarC;
    const double f = branch == continuum::Branch::Particle ? kF0 + eps : kF0 + kDf - eps;
    s.levels.push_back(f);
    s.pairs.push_back({f, k});
  }
  std::sort(s.levels.begin(), s.levels.end());
  return s;
}

double spread(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto q = [&](double p) { return v[static_cast<std::size_t>(p * (v.size() - 1))]; };
  return q(0.75) - q(0.25);
}

}  // namespace

TEST_SUITE("param_fit") {

TEST_CASE("linear least squares") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a(30, 3);
  Eigen::VectorXd b(30);
  for (int i = 0; i < 30; ++i) {
    a.row(i) << 1.0, i * 0.1, std::sin(i * 0.3);
    b(i) = 2.0 - 0.5 * i * 0.1 + 3.0 * std::sin(i * 0.3) + 0.1 * n(rng);
  }
  const auto r = lm_minimize([&](const Eigen::VectorXd& x) { return Eigen::VectorXd(a * x - b); },
                             [&](const Eigen::VectorXd&) { return a; }, Eigen::Vector3d::Zero());
  const Eigen::VectorXd normal = (a.transpose() * a).ldlt().solve(a.transpose() * b);
  CHECK(r.converged);
  CHECK(r.iterations <= 2);
  CHECK((r.params - normal).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("Rosenbrock valley") {
  const auto res = [](const Eigen::VectorXd& x) {
    return Eigen::Vector2d(10.0 * (x(1) - x(0) * x(0)), 1.0 - x(0));
  };
  const auto r = lm_minimize(res, nullptr, Eigen::Vector2d(-1.2, 1.0));
  CHECK(r.converged);
  CHECK(r.params(0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.params(1) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("numeric Jacobian matches the analytic one") {
  const auto res = [](const Eigen::VectorXd& x) {
    return Eigen::Vector3d(std::sin(x(0)) * x(1), x(0) * x(0) - x(1), std::exp(0.1 * x(1)));
  };
  const Eigen::Vector2d x(0.7, -1.3);
  Eigen::Matrix<double, 3, 2> j;
  j << std::cos(x(0)) * x(1), std::sin(x(0)), 2 * x(0), -1, 0, 0.1 * std::exp(0.1 * x(1));
  CHECK((numeric_jacobian(res, x) - j).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("engine guards and determinism") {
  const auto res = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, x.sum()); };
  CHECK_THROWS_AS(lm_minimize(res, nullptr, Eigen::Vector2d(1.0, 2.0)), DomainError);

  const auto data = box_data(kE1.step_position, continuum::Branch::Particle, 5);
  LmOptions o;
  o.record_trace = true;
  const auto a = fit_dispersion_particle(data.pairs, std::nullopt, o);
  const auto b = fit_dispersion_particle(data.pairs, std::nullopt, o);
  REQUIRE(a.engine.trace.size() == b.engine.trace.size());
  for (std::size_t i = 0; i < a.engine.trace.size(); ++i) {
    CHECK(a.engine.trace[i].params == b.engine.trace[i].params);
    CHECK(a.engine.trace[i].cost == b.engine.trace[i].cost);
  }
}

TEST_CASE("Lorentzian fit against a brute-force grid minimum") {
  const auto grid = spectro::FrequencyGrid::covering({40.0, 60.0}, 0.02);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.02);
  spectro::SpectrumTrace t;
  t.grid = grid;
  t.kind = spectro::TraceKind::Ldos;
  const std::vector<spectro::ResonancePeak> truth{{50.2, 2.0, 1.0}};
  for (double f : grid.values()) {
    t.values.emplace_back(spectro::lorentzian_model(truth, f) + noise(rng), 0.0);
  }
  const auto x = grid.values();
  const auto y = t.signal();
  const auto sse = [&](double c, double w, double a) {
    double s = 0.0;
    const std::vector<spectro::ResonancePeak> p{{c, w, a}};
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = spectro::lorentzian_model(p, x[i]) - y[i];
      s += r * r;
    }
    return s;
  };
  // Zooming 11^3 grid search.
  double c = 50.0, w = 2.0, a = 1.0, hc = 1.0, hw = 1.0, ha = 0.5;
  for (int round = 0; round < 24; ++round) {
    double best = sse(c, w, a), bc = c, bw = w, ba = a;
    for (int i = -5; i <= 5; ++i)
      for (int j = -5; j <= 5; ++j)
        for (int k = -5; k <= 5; ++k) {
          const double cc = c + hc * i / 5, ww = w + hw * j / 5, aa = a + ha * k / 5;
          const double v = sse(cc, ww, aa);
          if (v < best) best = v, bc = cc, bw = ww, ba = aa;
        }
    c = bc, w = bw, a = ba;
    hc *= 0.3, hw *= 0.3, ha *= 0.3;
  }
  spectro::LorentzianFitOptions o;
  o.linear_baseline = false;
  const std::vector<spectro::ResonancePeak> start{{50.0, 2.5, 0.8}};
  const auto fit = spectro::fit_lorentzians(t, start, o);
  REQUIRE(fit.converged);
  CHECK(std::abs(fit.peaks[0].peak.center - c) < 1e-6);
  CHECK(std::abs(fit.peaks[0].peak.width - w) < 1e-6);
  CHECK(std::abs(fit.peaks[0].peak.amplitude - a) < 1e-6);
}

TEST_CASE("dispersion fits invert exact data") {
  const auto left = box_data(kE1.step_position, continuum::Branch::Particle, 5);
  const auto right = box_data(kE1.step_tail(), continuum::Branch::Hole, 5);
  const auto p = fit_dispersion_particle(left.pairs);
  const auto h = fit_dispersion_hole(right.pairs);
  REQUIRE(p.converged);
  REQUIRE(h.converged);
  CHECK(p.params.mass_energy == doctest::Approx(kMass).epsilon(1e-6));
  CHECK(p.params.hbar_c == doctest::Approx(kHbarC).epsilon(1e-6));
  CHECK(p.params.center == doctest::Approx(kF0).epsilon(1e-6));
  CHECK(h.params.mass_energy == doctest::Approx(kMass).epsilon(1e-6));
  CHECK(h.params.hbar_c == doctest::Approx(kHbarC).epsilon(1e-6));
  CHECK(h.params.center == doctest::Approx(kF0 + kDf).epsilon(1e-6));
  CHECK(h.params.center - p.params.center == doctest::Approx(kDf).epsilon(1e-6));
  CHECK(p.covariance.allFinite());
}

TEST_CASE("dispersion fit input checks") {
  std::vector<DispersionPair> two{{6730.0, 0.01}, {6740.0, 0.02}};
  CHECK_THROWS_AS(fit_dispersion_particle(two), DomainError);
  std::vector<DispersionPair> bad{{6790.0, 0.01}, {6780.0, -0.02}, {6770.0, 0.03}};
  CHECK_THROWS_AS(fit_dispersion_hole(bad), DomainError);

  std::vector<DispersionPair> same{{6730.0, 0.02}, {6735.0, 0.02}, {6741.0, 0.02}, {6744.0, 0.02}};
  FitResult r;
  CHECK_NOTHROW(r = fit_dispersion_particle(same));
  CHECK_FALSE(r.converged);
}

TEST_CASE("fits follow a uniform frequency shift") {
  const auto data = box_data(kE1.step_position, continuum::Branch::Particle, 5);
  auto shifted = data.pairs;
  for (auto& p : shifted) p.frequency += 17.25;
  const auto a = fit_dispersion_particle(data.pairs);
  const auto b = fit_dispersion_particle(shifted);
  CHECK(std::abs(b.params.center - a.params.center - 17.25) < 1e-8);
  CHECK(std::abs(b.params.mass_energy - a.params.mass_energy) < 1e-8);
  CHECK(std::abs(b.params.hbar_c - a.params.hbar_c) < 1e-8 * kHbarC);
}

TEST_CASE("level sequence fit") {
  const double length = kE1.step_position;
  const auto data = box_data(length, continuum::Branch::Particle, 5);
  const BandParams start{10.0, 1200.0, data.levels.front() - 10.0};

  SUBCASE("agrees with the dispersion route on exact data") {
    const auto seq = fit_level_sequence(data.levels, length, continuum::Branch::Particle, start);
    const auto disp = fit_dispersion_particle(data.pairs);
    REQUIRE(seq.converged);
    CHECK(seq.params.mass_energy == doctest::Approx(disp.params.mass_energy).epsilon(1e-4));
    CHECK(seq.params.hbar_c == doctest::Approx(disp.params.hbar_c).epsilon(1e-4));
    CHECK(seq.params.center == doctest::Approx(disp.params.center).epsilon(1e-4));
  }

  SUBCASE("hole branch") {
    const auto holes = box_data(length, continuum::Branch::Hole, 5);
    const auto r = fit_level_sequence(holes.levels, length, continuum::Branch::Hole,
                                      {10.0, 1200.0, holes.levels.back() + 10.0});
    REQUIRE(r.converged);
    CHECK(r.params.center == doctest::Approx(kF0 + kDf).epsilon(1e-8));
  }

  SUBCASE("needs four levels") {
    const std::vector<double> three(data.levels.begin(), data.levels.begin() + 3);
    CHECK_THROWS_AS(fit_level_sequence(three, length, continuum::Branch::Particle, start),
                    DomainError);
  }

  SUBCASE("window count mismatch") {
    SequenceOptions o;
    o.scan_window = kE1.klein_window_frequency();
    const std::vector<double> four(data.levels.begin(), data.levels.begin() + 4);
    CHECK_THROWS_AS(fit_level_sequence(four, length, continuum::Branch::Particle, start, o),
                    LevelCountMismatch);
  }

  SUBCASE("clean lattice levels: discretization bias") {
    const auto full = lattice::chain_for(Geometry{15, 15}, kE1);
    const auto left = pipeline::half_chain_sample(lattice::left_alone(full), kE1);
    const auto r = fit_level_sequence(left.levels, left.box_length, continuum::Branch::Particle,
                                      {10.0, 1200.0, left.levels.front() - 10.0});
    MESSAGE("bias: mc2 " << r.params.mass_energy - kMass << " MHz, hbar_c "
                         << r.params.hbar_c - kHbarC << " MHz mm, f0 " << r.params.center - kF0
                         << " MHz");
    CHECK(r.converged);
    CHECK(r.params.hbar_c == doctest::Approx(kHbarC).epsilon(0.05));
    CHECK(std::abs(r.params.center - kF0) < 10.0);
  }
}

TEST_CASE("disordered ensemble: sequence fit against dispersion fit") {
  const auto ensemble = pipeline::recovery_ensemble({15, 15}, kE1, 2.7, 1, 100);
  std::vector<double> disp, seq;
  for (const auto& run : ensemble) {
    const auto& d = run.at("dispersion");
    const auto& s = run.at("level_sequence");
    if (d.ok) disp.push_back(d.hbar_c());
    if (s.ok) seq.push_back(s.hbar_c());
  }
  REQUIRE(disp.size() > 80);
  REQUIRE(seq.size() > 80);
  MESSAGE("hbar_c interquartile range: dispersion " << spread(disp) << ", sequence "
                                                     << spread(seq) << " MHz mm");
  CHECK(spread(seq) < spread(disp));
}

}  // TEST_SUITE
