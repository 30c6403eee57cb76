#include "kleinbox/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace kleinbox {
namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::int64_t parse_int(std::string_view text) {
  std::int64_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("malformed integer '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw ConfigError("cannot format value");
  return std::string(buf.data(), ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("malformed number '" + std::string(text) + "'");
  }
  return value;
}

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig config;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{}
                                        : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }
    if (config.contains(key)) {
      throw ConfigError("duplicate key '" + std::string(key) + "'");
    }
    config.entries_.emplace_back(std::string(key), std::string(value));
  }
  return config;
}

KeyValueConfig KeyValueConfig::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void KeyValueConfig::set(const std::string& key, double value) {
  set(key, format_double(value));
}

void KeyValueConfig::set(const std::string& key, std::int64_t value) {
  set(key, std::to_string(value));
}

void KeyValueConfig::set(const std::string& key, bool value) {
  set(key, std::string(value ? "true" : "false"));
}

bool KeyValueConfig::contains(std::string_view key) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == key; });
}

std::optional<std::string> KeyValueConfig::get(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

double KeyValueConfig::get_double(std::string_view key) const {
  auto v = get(key);
  if (!v) throw ConfigError("missing key '" + std::string(key) + "'");
  return parse_double(*v);
}

std::int64_t KeyValueConfig::get_int(std::string_view key) const {
  auto v = get(key);
  if (!v) throw ConfigError("missing key '" + std::string(key) + "'");
  return parse_int(*v);
}

bool KeyValueConfig::get_bool(std::string_view key) const {
  auto v = get(key);
  if (!v) throw ConfigError("missing key '" + std::string(key) + "'");
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw ConfigError("malformed boolean '" + *v + "' for key '" +
                    std::string(key) + "'");
}

void KeyValueConfig::require_known(
    const std::vector<std::string_view>& allowed) const {
  for (const auto& [k, v] : entries_) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }
}

std::string KeyValueConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

void KeyValueConfig::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write config file " + path.string());
  out << to_text();
}

KeyValueConfig to_config(const DiracParams& p) {
  KeyValueConfig c;
  c.set("mc2_mhz", p.mass_energy);
  c.set("hbar_c_mhz_mm", p.hbar_c);
  c.set("f0_mhz", p.dirac_point);
  c.set("v0_mhz", p.step_height);
  c.set("a0_mm", p.lattice_const);
  c.set("a_mm", p.step_position);
  c.set("d_mm", p.box_length);
  return c;
}

DiracParams params_from_config(const KeyValueConfig& c) {
  c.require_known(
      {"mc2_mhz", "hbar_c_mhz_mm", "f0_mhz", "v0_mhz", "a0_mm", "a_mm", "d_mm"});
  DiracParams p;
  p.mass_energy = c.get_double("mc2_mhz");
  p.hbar_c = c.get_double("hbar_c_mhz_mm");
  p.dirac_point = c.get_double("f0_mhz");
  p.step_height = c.get_double("v0_mhz");
  p.lattice_const = c.get_double("a0_mm");
  p.step_position = c.get_double("a_mm");
  p.box_length = c.get_double("d_mm");
  validate(p);
  return p;
}

DiracParams RunConfig::params() const {
  return make_params(geometry, mass_energy, hbar_c, dirac_point, step_height,
                     lattice_const);
}

RunConfig run_config_for(const ExperimentPreset& preset) {
  RunConfig run;
  run.preset = to_string(preset.id);
  std::transform(run.preset.begin(), run.preset.end(), run.preset.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  run.geometry = preset.geometry;
  run.disorder_sigma = preset.disorder_sigma;
  run.seed = preset.seed;
  run.permute = preset.permute;
  return run;
}

RunConfig apply_config(RunConfig run, const KeyValueConfig& c) {
  c.require_known({"preset", "n_left", "n_right", "mc2_mhz", "hbar_c_mhz_mm",
                   "f0_mhz", "v0_mhz", "a0_mm", "disorder_sigma_mhz", "seed",
                   "permute", "gamma_mhz", "ldos_gamma_mhz", "coupling",
                   "noise_sigma", "grid_step_mm", "freq_step_mhz", "seeds"});
  if (auto v = c.get("preset")) {
    const auto base = run_config_for(preset(*v));
    run = base;
  }
  auto dbl = [&](const char* key, double& field) {
    if (c.contains(key)) field = c.get_double(key);
  };
  if (c.contains("n_left")) run.geometry.n_left = static_cast<int>(c.get_int("n_left"));
  if (c.contains("n_right")) run.geometry.n_right = static_cast<int>(c.get_int("n_right"));
  dbl("mc2_mhz", run.mass_energy);
  dbl("hbar_c_mhz_mm", run.hbar_c);
  dbl("f0_mhz", run.dirac_point);
  dbl("v0_mhz", run.step_height);
  dbl("a0_mm", run.lattice_const);
  dbl("disorder_sigma_mhz", run.disorder_sigma);
  if (c.contains("seed")) {
    const auto s = c.get_int("seed");
    if (s < 0) throw ConfigError("seed must be non-negative");
    run.seed = static_cast<std::uint64_t>(s);
  }
  if (c.contains("permute")) run.permute = c.get_bool("permute");
  dbl("gamma_mhz", run.gamma);
  dbl("ldos_gamma_mhz", run.ldos_gamma);
  dbl("coupling", run.coupling);
  dbl("noise_sigma", run.noise_sigma);
  dbl("grid_step_mm", run.grid_step);
  dbl("freq_step_mhz", run.freq_step);
  if (c.contains("seeds")) run.seeds = static_cast<int>(c.get_int("seeds"));

  if (run.disorder_sigma < 0.0) throw ConfigError("disorder_sigma_mhz must be >= 0");
  if (run.gamma <= 0.0 || run.ldos_gamma <= 0.0) throw ConfigError("widths must be positive");
  if (run.noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
  if (run.grid_step <= 0.0 || run.freq_step <= 0.0) throw ConfigError("grid steps must be positive");
  if (run.seeds < 1) throw ConfigError("seeds must be >= 1");
  return run;
}

KeyValueConfig to_config(const RunConfig& run) {
  KeyValueConfig c;
  c.set("preset", run.preset);
  c.set("n_left", static_cast<std::int64_t>(run.geometry.n_left));
  c.set("n_right", static_cast<std::int64_t>(run.geometry.n_right));
  c.set("mc2_mhz", run.mass_energy);
  c.set("hbar_c_mhz_mm", run.hbar_c);
  c.set("f0_mhz", run.dirac_point);
  c.set("v0_mhz", run.step_height);
  c.set("a0_mm", run.lattice_const);
  c.set("disorder_sigma_mhz", run.disorder_sigma);
  c.set("seed", static_cast<std::int64_t>(run.seed));
  c.set("permute", run.permute);
  c.set("gamma_mhz", run.gamma);
  c.set("ldos_gamma_mhz", run.ldos_gamma);
  c.set("coupling", run.coupling);
  c.set("noise_sigma", run.noise_sigma);
  c.set("grid_step_mm", run.grid_step);
  c.set("freq_step_mhz", run.freq_step);
  c.set("seeds", static_cast<std::int64_t>(run.seeds));
  return c;
}

}  // namespace kleinbox
