#include "kleinbox/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace kleinbox {

LevelCountMismatch::LevelCountMismatch(std::size_t expected,
                                       std::size_t actual,
                                       const std::string& what)
    : Error(what + ": expected " + std::to_string(expected) + " levels, got " +
            std::to_string(actual)),
      expected_(expected),
      actual_(actual) {}

void validate(const DiracParams& p) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  auto finite = [](double x) { return std::isfinite(x); };
  if (!finite(p.mass_energy) || !finite(p.hbar_c) || !finite(p.dirac_point) ||
      !finite(p.step_height) || !finite(p.lattice_const) ||
      !finite(p.step_position) || !finite(p.box_length)) {
    fail("non-finite parameter");
  }
  if (p.mass_energy <= 0.0) fail("mass energy mc2 must be positive");
  if (p.hbar_c <= 0.0) fail("hbar_c must be positive");
  if (p.lattice_const <= 0.0) fail("lattice constant a0 must be positive");
  if (p.step_height <= 2.0 * p.mass_energy) {
    std::ostringstream os;
    os << "Klein window is empty: V0 = " << p.step_height
       << " MHz must exceed 2 mc2 = " << 2.0 * p.mass_energy << " MHz";
    fail(os.str());
  }
  if (!(p.step_position > 0.0 && p.step_position < p.box_length)) {
    fail("step position must satisfy 0 < a < d");
  }
}

DiracParams make_params(const Geometry& geometry, double mass_energy,
                        double hbar_c, double dirac_point, double step_height,
                        double lattice_const) {
  if (geometry.n_left <= 0 || geometry.n_right <= 0) {
    throw ConfigError("dimer counts must be positive");
  }
  DiracParams p;
  p.mass_energy = mass_energy;
  p.hbar_c = hbar_c;
  p.dirac_point = dirac_point;
  p.step_height = step_height;
  p.lattice_const = lattice_const;
  p.step_position = (geometry.n_left + 0.25) * lattice_const;
  p.box_length = (geometry.n_cells() + 0.5) * lattice_const;
  validate(p);
  return p;
}

DiracParams default_params(const Geometry& geometry) {
  using namespace constants;
  return make_params(geometry, kMassEnergy, kHbarC, kDiracPoint, kStepHeight,
                     kLatticeConst);
}

ExperimentPreset preset(PresetId id) {
  ExperimentPreset p;
  p.id = id;
  p.disorder_sigma = constants::kDisorderSigma;
  switch (id) {
    case PresetId::E1:
      p.geometry = {15, 15};
      p.seed = 1;
      break;
    case PresetId::E2:
      p.geometry = {15, 15};
      p.seed = 2;
      break;
    case PresetId::E3:
      p.geometry = {15, 15};
      p.seed = 1;
      p.permute = true;
      break;
    case PresetId::E4:
      p.geometry = {15, 9};
      p.seed = 4;
      break;
  }
  return p;
}

ExperimentPreset preset(std::string_view name) {
  std::string key(name);
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  for (auto id : {PresetId::E1, PresetId::E2, PresetId::E3, PresetId::E4}) {
    if (to_string(id) == key) return preset(id);
  }
  throw ConfigError("unknown preset '" + std::string(name) +
                    "' (expected e1, e2, e3 or e4)");
}

std::string to_string(PresetId id) {
  switch (id) {
    case PresetId::E1: return "E1";
    case PresetId::E2: return "E2";
    case PresetId::E3: return "E3";
    case PresetId::E4: return "E4";
  }
  return "?";
}

std::vector<ExperimentPreset> all_presets() {
  return {preset(PresetId::E1), preset(PresetId::E2), preset(PresetId::E3),
          preset(PresetId::E4)};
}

}  // namespace kleinbox
