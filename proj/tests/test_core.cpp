#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "kleinbox/config.hpp"
#include "kleinbox/export.hpp"

using namespace kleinbox;

TEST_SUITE("core") {

TEST_CASE("make_params places the step and the walls on ghost sites") {
  const auto e1 = default_params({15, 15});
  CHECK(e1.step_position == doctest::Approx(312.625).epsilon(1e-15));
  CHECK(e1.box_length == doctest::Approx(625.25).epsilon(1e-15));
  CHECK(e1.step_tail() == doctest::Approx(312.625).epsilon(1e-15));
  CHECK(e1.hbar_c == doctest::Approx(61.325 * 20.5));

  const auto e4 = default_params({15, 9});
  CHECK(e4.step_position == doctest::Approx(312.625).epsilon(1e-15));
  CHECK(e4.box_length == doctest::Approx(502.25).epsilon(1e-15));
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(make_params({15, 15}, 12.894, 1257.1625, 6713.0, 20.0, 20.5), ConfigError);
  CHECK_THROWS_AS(make_params({15, 15}, 12.894, -1.0, 6713.0, 81.5, 20.5), ConfigError);
  CHECK_THROWS_AS(make_params({0, 15}, 12.894, 1257.1625, 6713.0, 81.5, 20.5), ConfigError);
  CHECK_THROWS_AS(make_params({15, 15}, std::nan(""), 1257.1625, 6713.0, 81.5, 20.5),
                  ConfigError);
}

TEST_CASE("Klein window") {
  const auto p = default_params({15, 15});
  CHECK(p.klein_window().lo == doctest::Approx(12.894));
  CHECK(p.klein_window().hi == doctest::Approx(81.5 - 12.894));
  CHECK(p.klein_window_frequency().lo == doctest::Approx(6713.0 + 12.894));
  CHECK(p.scan_window().lo > p.klein_window().lo);
}

TEST_CASE("presets") {
  const auto e1 = preset("e1"), e2 = preset("E2"), e3 = preset("e3"), e4 = preset("e4");
  CHECK(e1.geometry.n_left == 15);
  CHECK(e1.geometry.n_right == 15);
  CHECK(e4.geometry.n_right == 9);
  // E2 differs from E1 only in the seed, E3 only in the permutation flag.
  CHECK(e2.seed != e1.seed);
  CHECK(e2.disorder_sigma == e1.disorder_sigma);
  CHECK(e2.permute == e1.permute);
  CHECK(e3.seed == e1.seed);
  CHECK(e3.permute);
  CHECK_FALSE(e1.permute);
  CHECK(e1.disorder_sigma == doctest::Approx(2.7));
  CHECK_THROWS_AS(preset("e9"), ConfigError);
  CHECK(all_presets().size() == 4);
}

TEST_CASE("format_double round-trips bit-identically") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(parse_double(format_double(std::numeric_limits<double>::denorm_min())) ==
        std::numeric_limits<double>::denorm_min());
}

TEST_CASE("params survive a trip through a config file") {
  const auto p = make_params({15, 9}, 12.894, 61.325 * 20.5, 6713.0, 81.5, 20.5);
  const auto path = std::filesystem::temp_directory_path() / "kleinbox_params_roundtrip.cfg";
  to_config(p).write(path);
  const auto q = params_from_config(KeyValueConfig::read(path));
  std::filesystem::remove(path);
  CHECK(q.mass_energy == p.mass_energy);
  CHECK(q.hbar_c == p.hbar_c);
  CHECK(q.dirac_point == p.dirac_point);
  CHECK(q.step_height == p.step_height);
  CHECK(q.lattice_const == p.lattice_const);
  CHECK(q.step_position == p.step_position);
  CHECK(q.box_length == p.box_length);
}

TEST_CASE("config parsing") {
  const auto cfg = KeyValueConfig::parse("# comment\n preset = e4 \nv0_mhz=90\n\nseed = 17\n");
  CHECK(cfg.get("preset").value() == "e4");
  CHECK(cfg.get_double("v0_mhz") == 90.0);
  CHECK(cfg.get_int("seed") == 17);
  CHECK_THROWS_AS(KeyValueConfig::parse("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(cfg.get_double("preset"), ConfigError);

  const auto run = apply_config(run_config_for(preset("e1")), cfg);
  CHECK(run.step_height == 90.0);
  CHECK(run.seed == 17);
  CHECK_THROWS_AS(apply_config(run, KeyValueConfig::parse("mc2 = 3\n")), ConfigError);

  // A run config written and read back reproduces every field.
  const auto again = apply_config(RunConfig{}, to_config(run));
  CHECK(to_config(again).to_text() == to_config(run).to_text());
}

TEST_CASE("JSON export uses unit-suffixed keys") {
  const auto j = io::to_json(default_params({15, 15}));
  CHECK(j.at("mc2_mhz").get<double>() == 12.894);
  CHECK(j.at("a_mm").get<double>() == 312.625);
  CHECK(j.at("d_mm").get<double>() == 625.25);
}

}  // TEST_SUITE
