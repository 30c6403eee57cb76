#pragma once

// CSV, JSON and SVG writers. Numbers go through format_double, so output
// files are byte-identical for identical inputs.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "kleinbox/core.hpp"
#include "kleinbox/dirac_continuum.hpp"
#include "kleinbox/param_fit.hpp"
#include "kleinbox/spectroscopy.hpp"
#include "kleinbox/ssh_lattice.hpp"

namespace kleinbox::io {

using Json = nlohmann::ordered_json;

/// Writes `text`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

/// Minimal CSV table; cells are preformatted strings.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
  std::string to_csv() const;
  /// Array of objects keyed by the header, numbers kept as numbers.
  Json to_json() const;
};

std::string num(double value);
std::string num(long long value);

Json to_json(const DiracParams& params);
Json to_json(const continuum::LevelSet& levels);
Json to_json(const fit::FitResult& fit, bool include_trace = false);

/// x_mm, re1, im1, re2, im2
Table spinor_table(const continuum::SpinorField& field);
/// level, f_mhz, class
Table eigensystem_table(const lattice::LatticeEigensystem& eig);
/// site, sublattice, x_mm, intensity
Table envelope_table(const lattice::LatticeEigensystem& eig, int n,
                     const lattice::SiteMap& map);
/// freq_mhz, re, im
Table trace_table(const spectro::SpectrumTrace& trace);
/// freq_mhz, then one column per site
Table ldos_table(const spectro::LdosMap& map);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Marker {
  double value = 0.0;
  std::string label;
};

/// Line plot. Vertical markers are drawn as dashed lines.
std::string svg_lines(const std::vector<Series>& series, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Marker>& vertical = {});

/// Heatmap of an LDOS map: sites along x, frequency along y (upward).
/// Horizontal markers annotate frequencies such as the window edges.
std::string svg_heatmap(const spectro::LdosMap& map, const std::string& title,
                        const std::vector<Marker>& horizontal = {});

}  // namespace kleinbox::io
