#pragma once

// Flat key=value configuration files with unit-suffixed keys, e.g.
//
//   # E1 baseline
//   preset = e1
//   mc2_mhz = 12.894
//   v0_mhz = 81.5
//
// Doubles are written in shortest round-trip form, so a file written by this
// module reads back bit-identically.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kleinbox/core.hpp"

namespace kleinbox {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig read(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, bool value);

  bool contains(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;

  double get_double(std::string_view key) const;
  std::int64_t get_int(std::string_view key) const;
  bool get_bool(std::string_view key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

  /// Rejects keys not in `allowed`.
  void require_known(const std::vector<std::string_view>& allowed) const;

  std::string to_text() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);
double parse_double(std::string_view text);

KeyValueConfig to_config(const DiracParams& params);
DiracParams params_from_config(const KeyValueConfig& config);

/// Everything a CLI run needs: physical constants, disorder, and measurement
/// settings.
struct RunConfig {
  std::string preset = "e1";
  Geometry geometry{15, 15};
  double mass_energy = constants::kMassEnergy;
  double hbar_c = constants::kHbarC;
  double dirac_point = constants::kDiracPoint;
  double step_height = constants::kStepHeight;
  double lattice_const = constants::kLatticeConst;
  double disorder_sigma = constants::kDisorderSigma;
  std::uint64_t seed = 1;
  bool permute = false;
  double gamma = 2.0;          // resonance width in reflection spectra [MHz]
  double ldos_gamma = 2.0;     // LDOS broadening [MHz]
  double coupling = 1.0;       // antenna coupling
  double noise_sigma = 1e-3;   // per-component reflection noise
  double grid_step = constants::kLatticeConst / 40.0;  // spinor sampling [mm]
  double freq_step = 0.05;     // spectral grid spacing [MHz]
  int seeds = 1;               // ensemble size

  DiracParams params() const;
};

RunConfig run_config_for(const ExperimentPreset& preset);

/// Overlays keys from `config` onto `base`. Throws ConfigError on unknown
/// keys or malformed values.
RunConfig apply_config(RunConfig base, const KeyValueConfig& config);

KeyValueConfig to_config(const RunConfig& run);

}  // namespace kleinbox
