#include "kleinbox/export.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kleinbox/config.hpp"

namespace kleinbox::io {
namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Fixed-precision coordinate for SVG (keeps files small and stable).
std::string px(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << v;
  return os.str();
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

/// Dark blue -> teal -> yellow ramp for t in [0, 1].
std::string ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const double stops[3][3] = {{20, 24, 82}, {33, 145, 140}, {253, 231, 37}};
  const double s = t * 2.0;
  const int i = std::min(1, static_cast<int>(s));
  const double f = s - i;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(std::lround(stops[i][0] + f * (stops[i + 1][0] - stops[i][0]))),
                static_cast<int>(std::lround(stops[i][1] + f * (stops[i + 1][1] - stops[i][1]))),
                static_cast<int>(std::lround(stops[i][2] + f * (stops[i + 1][2] - stops[i][2]))));
  return buf;
}

std::string class_name(lattice::LevelClass c) {
  switch (c) {
    case lattice::LevelClass::BelowWindow: return "below_window";
    case lattice::LevelClass::InWindow: return "in_window";
    case lattice::LevelClass::AboveWindow: return "above_window";
  }
  return "unknown";
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

std::string num(double value) { return format_double(value); }
std::string num(long long value) { return std::to_string(value); }

std::string Table::to_csv() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

Json Table::to_json() const {
  Json arr = Json::array();
  for (const auto& r : rows) {
    Json obj = Json::object();
    for (std::size_t i = 0; i < header.size() && i < r.size(); ++i) {
      const auto& cell = r[i];
      double v = 0.0;
      bool numeric = !cell.empty();
      try {
        v = parse_double(cell);
      } catch (const Error&) {
        numeric = false;
      }
      if (numeric) {
        obj[header[i]] = v;
      } else {
        obj[header[i]] = cell;
      }
    }
    arr.push_back(std::move(obj));
  }
  return arr;
}

Json to_json(const DiracParams& p) {
  Json j = Json::object();
  j["mc2_mhz"] = p.mass_energy;
  j["hbar_c_mhz_mm"] = p.hbar_c;
  j["f0_mhz"] = p.dirac_point;
  j["v0_mhz"] = p.step_height;
  j["a0_mm"] = p.lattice_const;
  j["a_mm"] = p.step_position;
  j["d_mm"] = p.box_length;
  return j;
}

Json to_json(const continuum::LevelSet& levels) {
  Json j = Json::object();
  j["window_lo_mhz"] = levels.window.lo;
  j["window_hi_mhz"] = levels.window.hi;
  j["scan_points"] = levels.scan_points;
  j["energies_mhz"] = levels.energies;
  j["residuals"] = levels.residuals;
  return j;
}

Json to_json(const fit::FitResult& fit, bool include_trace) {
  Json j = Json::object();
  j["mc2_mhz"] = fit.params.mass_energy;
  j["hbar_c_mhz_mm"] = fit.params.hbar_c;
  j["center_mhz"] = fit.params.center;
  j["residual_norm"] = fit.residual_norm;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["termination"] = fit::to_string(fit.engine.termination);
  Json cov = Json::array();
  for (int r = 0; r < 3; ++r) {
    Json row = Json::array();
    for (int c = 0; c < 3; ++c) row.push_back(fit.covariance(r, c));
    cov.push_back(row);
  }
  j["covariance"] = cov;
  if (include_trace) {
    Json tr = Json::array();
    for (const auto& it : fit.engine.trace) {
      Json e = Json::object();
      e["iteration"] = it.iteration;
      e["cost"] = it.cost;
      e["lambda"] = it.lambda;
      e["params"] = std::vector<double>(it.params.data(), it.params.data() + it.params.size());
      tr.push_back(e);
    }
    j["trace"] = tr;
  }
  return j;
}

Table spinor_table(const continuum::SpinorField& f) {
  Table t{{"x_mm", "re1", "im1", "re2", "im2"}, {}};
  for (std::size_t i = 0; i < f.size(); ++i) {
    t.add({num(f.x[i]), num(f.comp1[i].real()), num(f.comp1[i].imag()),
           num(f.comp2[i].real()), num(f.comp2[i].imag())});
  }
  return t;
}

Table eigensystem_table(const lattice::LatticeEigensystem& eig) {
  Table t{{"level", "f_mhz", "class"}, {}};
  for (Eigen::Index n = 0; n < eig.size(); ++n) {
    const auto cls = static_cast<std::size_t>(n) < eig.classes.size()
                         ? class_name(eig.classes[static_cast<std::size_t>(n)])
                         : std::string("unclassified");
    t.add({num(static_cast<long long>(n)), num(eig.frequencies(n)), cls});
  }
  return t;
}

Table envelope_table(const lattice::LatticeEigensystem& eig, int n,
                     const lattice::SiteMap& map) {
  Table t{{"site", "sublattice", "x_mm", "intensity"}, {}};
  for (int s = 0; s < eig.vectors.rows(); ++s) {
    const double v = eig.vectors(s, n);
    t.add({num(static_cast<long long>(s)), lattice::SiteMap::is_a(s) ? "A" : "B",
           num(map.x(s)), num(v * v)});
  }
  return t;
}

Table trace_table(const spectro::SpectrumTrace& trace) {
  Table t{{"freq_mhz", "re", "im"}, {}};
  for (std::size_t i = 0; i < trace.values.size(); ++i) {
    t.add({num(trace.grid.at(i)), num(trace.values[i].real()), num(trace.values[i].imag())});
  }
  return t;
}

Table ldos_table(const spectro::LdosMap& map) {
  Table t;
  t.header.push_back("freq_mhz");
  for (int s : map.sites) t.header.push_back("site_" + std::to_string(s));
  for (std::size_t j = 0; j < map.grid.count; ++j) {
    std::vector<std::string> row{num(map.grid.at(j))};
    for (Eigen::Index i = 0; i < map.values.rows(); ++i) {
      row.push_back(num(map.values(i, static_cast<Eigen::Index>(j))));
    }
    t.add(std::move(row));
  }
  return t;
}

std::string svg_lines(const std::vector<Series>& series, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Marker>& vertical) {
  constexpr double W = 720, H = 420, L = 70, R = 20, T = 40, B = 50;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!(x1 > x0)) x0 -= 1, x1 += 1;
  if (!(y1 > y0)) y0 -= 1, y1 += 1;
  auto sx = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
  auto sy = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
     << escape_xml(title) << "</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
     << H - T - B << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << px(L) << "\" y=\"" << px(H - B + 16) << "\">" << px(x0) << "</text>\n";
  os << "<text x=\"" << px(W - R) << "\" y=\"" << px(H - B + 16)
     << "\" text-anchor=\"end\">" << px(x1) << "</text>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
     << escape_xml(x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
     << ")\" text-anchor=\"middle\">" << escape_xml(y_label) << "</text>\n";
  for (const auto& m : vertical) {
    if (m.value < x0 || m.value > x1) continue;
    os << "<line x1=\"" << px(sx(m.value)) << "\" x2=\"" << px(sx(m.value)) << "\" y1=\"" << T
       << "\" y2=\"" << H - B << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    if (!m.label.empty()) {
      os << "<text x=\"" << px(sx(m.value) + 3) << "\" y=\"" << T + 12 << "\" fill=\"gray\">"
         << escape_xml(m.label) << "</text>\n";
    }
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      os << px(sx(s.x[i])) << ',' << px(sy(s.y[i])) << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << px(W - R - 6) << "\" y=\"" << px(T + 16 + 14 * static_cast<double>(k))
       << "\" text-anchor=\"end\" fill=\"" << color << "\">" << escape_xml(s.label)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_heatmap(const spectro::LdosMap& map, const std::string& title,
                        const std::vector<Marker>& horizontal) {
  constexpr double W = 520, H = 620, L = 70, R = 20, T = 40, B = 40;
  const auto ns = static_cast<double>(map.values.rows());
  const auto nf = static_cast<double>(map.values.cols());
  const double vmax = map.values.size() > 0 ? map.values.maxCoeff() : 1.0;
  const double cw = (W - L - R) / std::max(ns, 1.0);
  const double ch = (H - T - B) / std::max(nf, 1.0);
  const double f0 = map.grid.start;
  const double f1 = map.grid.stop();
  auto sy = [&](double f) { return H - B - (f - f0) / std::max(f1 - f0, 1e-12) * (H - T - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\" shape-rendering=\"crispEdges\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
     << escape_xml(title) << "</text>\n";
  for (Eigen::Index i = 0; i < map.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < map.values.cols(); ++j) {
      const double t = vmax > 0.0 ? map.values(i, j) / vmax : 0.0;
      os << "<rect x=\"" << px(L + cw * static_cast<double>(i)) << "\" y=\""
         << px(H - B - ch * static_cast<double>(j + 1)) << "\" width=\"" << px(cw + 0.01)
         << "\" height=\"" << px(ch + 0.01) << "\" fill=\"" << ramp(std::sqrt(t)) << "\"/>\n";
    }
  }
  for (const auto& m : horizontal) {
    if (m.value < f0 || m.value > f1) continue;
    os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << px(sy(m.value))
       << "\" y2=\"" << px(sy(m.value)) << "\" stroke=\"white\" stroke-dasharray=\"5 3\"/>\n";
    os << "<text x=\"" << L - 4 << "\" y=\"" << px(sy(m.value) + 4)
       << "\" text-anchor=\"end\" font-size=\"10\">" << escape_xml(m.label) << "</text>\n";
  }
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">site</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace kleinbox::io
