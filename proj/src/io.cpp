#include "lplab/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lplab {

std::string format_number(double x) {
  if (x == 0.0) return "0";  // collapse -0
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<double> CsvTable::numeric_column(const std::string& name) const {
  int c = column(name);
  if (c < 0) throw std::invalid_argument("csv: missing column '" + name + "'");
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    if (static_cast<size_t>(c) >= row.size())
      throw std::invalid_argument("csv: short row while reading column '" + name + "'");
    out.push_back(std::stod(row[c]));
  }
  return out;
}

namespace {

bool needs_quoting(const std::string& s) {
  return s.find_first_of(",\"\r\n") != std::string::npos;
}

void append_field(std::string& out, const std::string& field) {
  if (!needs_quoting(field)) {
    out += field;
    return;
  }
  out += '"';
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
}

void append_row(std::string& out, const std::vector<std::string>& row) {
  for (size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    append_field(out, row[i]);
  }
  out += "\r\n";
}

}  // namespace

std::string to_csv(const CsvTable& table) {
  std::string out;
  append_row(out, table.header);
  for (const auto& row : table.rows) append_row(out, row);
  return out;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f << to_csv(table);
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();

  CsvTable table;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  auto end_field = [&] {
    row.push_back(field);
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    if (!any) {
      table.header = row;
      any = true;
    } else {
      table.rows.push_back(row);
    }
    row.clear();
  };
  for (size_t i = 0; i < text.size(); ++i) {
    char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      end_field();
    } else if (ch == '\r') {
      // consumed with the following newline
    } else if (ch == '\n') {
      end_row();
    } else {
      field += ch;
    }
  }
  if (!field.empty() || !row.empty()) end_row();
  return table;
}

CsvTable solutions_table(const std::vector<ReducedSolution>& solutions, int n) {
  CsvTable t;
  for (int i = 0; i < n; ++i) t.header.push_back("q" + std::to_string(i + 1));
  t.header.push_back("tau_bar");
  for (int i = 0; i < n; ++i) t.header.push_back("v" + std::to_string(i + 1));
  t.header.insert(t.header.end(),
                  {"L_p", "l_p", "basin_count", "conjugate_free", "in_omega", "residual"});
  for (const ReducedSolution& s : solutions) {
    std::vector<std::string> row;
    for (int i = 0; i < n; ++i) row.push_back(format_number(s.q(i)));
    row.push_back(format_number(s.tau_bar));
    for (int i = 0; i < n; ++i) row.push_back(format_number(s.v_star(i)));
    row.push_back(format_number(s.value.L_p));
    row.push_back(format_number(s.value.l_p));
    row.push_back(std::to_string(s.basin_count));
    row.push_back(s.conjugate_free ? "1" : "0");
    row.push_back(s.in_omega ? "1" : "0");
    row.push_back(format_number(s.residual));
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable curve_table(const GeodesicCurve& curve, int samples) {
  if (samples < 2) throw std::invalid_argument("curve_table: need at least 2 samples");
  const int n = curve.n();
  CsvTable t;
  t.header = {"s", "tau"};
  for (int i = 0; i < n; ++i) t.header.push_back("x" + std::to_string(i + 1));
  for (int i = 0; i < n; ++i) t.header.push_back("u" + std::to_string(i + 1));
  for (int k = 0; k < samples; ++k) {
    double s = curve.s_bar * k / (samples - 1);
    CurveState st = curve.state_at_in_chart(s, 0);
    std::vector<std::string> row{format_number(s), format_number(curve.tau_of_s(s))};
    for (int i = 0; i < n; ++i) row.push_back(format_number(st.x(i)));
    for (int i = 0; i < n; ++i) row.push_back(format_number(st.u(i)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable volume_scan_table(const VolumeScan& scan) {
  CsvTable t;
  t.header = {"tau", "value", "weight", "weighted", "monotone_ok"};
  for (size_t i = 0; i < scan.taus.size(); ++i) {
    t.rows.push_back({format_number(scan.taus[i]), format_number(scan.values[i]),
                      format_number(scan.weights[i]), format_number(scan.weighted[i]),
                      scan.monotone_ok[i] ? "1" : "0"});
  }
  return t;
}

CsvTable report_table(const std::vector<ReportRow>& rows) {
  CsvTable t;
  t.header = {"quantity", "location", "lhs", "rhs", "slack", "pass"};
  for (const ReportRow& r : rows) {
    t.rows.push_back({r.quantity, r.location, format_number(r.lhs), format_number(r.rhs),
                      format_number(r.slack), r.pass ? "1" : "0"});
  }
  return t;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string fmt2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

std::string fmt_tick(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

// tick step of the form {1,2,5} * 10^k giving 4..8 ticks
double nice_step(double range) {
  if (!(range > 0.0)) return 1.0;
  double raw = range / 5.0;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double frac = raw / mag;
  double step = frac < 1.5 ? 1.0 : frac < 3.5 ? 2.0 : frac < 7.5 ? 5.0 : 10.0;
  return step * mag;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

std::string line_plot_svg(const std::vector<PlotSeries>& series, const PlotSpec& spec) {
  if (series.empty()) throw std::invalid_argument("line_plot_svg: no series");
  double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
  bool first = true;
  for (const PlotSeries& s : series) {
    if (s.x.size() != s.y.size())
      throw std::invalid_argument("line_plot_svg: series length mismatch");
    for (size_t i = 0; i < s.x.size(); ++i) {
      double xv = s.x[i];
      if (spec.log_x) {
        if (!(xv > 0.0))
          throw std::invalid_argument("line_plot_svg: log axis requires positive x");
        xv = std::log10(xv);
      }
      double yv = s.y[i];
      if (!std::isfinite(xv) || !std::isfinite(yv)) continue;
      if (first) {
        xmin = xmax = xv;
        ymin = ymax = yv;
        first = false;
      } else {
        xmin = std::min(xmin, xv);
        xmax = std::max(xmax, xv);
        ymin = std::min(ymin, yv);
        ymax = std::max(ymax, yv);
      }
    }
  }
  if (first) throw std::invalid_argument("line_plot_svg: no finite data");
  if (xmax == xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax == ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const double ml = 72, mr = 18, mt = spec.title.empty() ? 18 : 40, mb = 52;
  const double w = spec.width, h = spec.height;
  const double pw = w - ml - mr, ph = h - mt - mb;
  auto px = [&](double xv) { return ml + (xv - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double yv) { return mt + (ymax - yv) / (ymax - ymin) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt2(w) + "\" height=\"" +
         fmt2(h) + "\" viewBox=\"0 0 " + fmt2(w) + " " + fmt2(h) + "\">\n";
  svg += "<rect width=\"" + fmt2(w) + "\" height=\"" + fmt2(h) + "\" fill=\"white\"/>\n";
  if (!spec.title.empty())
    svg += "<text x=\"" + fmt2(w / 2) +
           "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
           xml_escape(spec.title) + "</text>\n";

  // ticks
  std::vector<double> xticks, yticks;
  if (spec.log_x) {
    int k0 = static_cast<int>(std::ceil(xmin - 1e-9));
    int k1 = static_cast<int>(std::floor(xmax + 1e-9));
    for (int k = k0; k <= k1; ++k) xticks.push_back(k);
    if (xticks.size() < 2) {
      xticks.clear();
      for (int k = 0; k <= 4; ++k) xticks.push_back(xmin + (xmax - xmin) * k / 4.0);
    }
  } else {
    double step = nice_step(xmax - xmin);
    for (double t = std::ceil(xmin / step) * step; t <= xmax + 1e-9 * step; t += step)
      xticks.push_back(t);
  }
  {
    double step = nice_step(ymax - ymin);
    for (double t = std::ceil(ymin / step) * step; t <= ymax + 1e-9 * step; t += step)
      yticks.push_back(t);
  }

  for (double t : xticks) {
    double X = px(t);
    svg += "<line x1=\"" + fmt2(X) + "\" y1=\"" + fmt2(mt) + "\" x2=\"" + fmt2(X) + "\" y2=\"" +
           fmt2(mt + ph) + "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    double shown = spec.log_x ? std::pow(10.0, t) : t;
    svg += "<text x=\"" + fmt2(X) + "\" y=\"" + fmt2(mt + ph + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
           xml_escape(fmt_tick(shown)) + "</text>\n";
  }
  for (double t : yticks) {
    double Y = py(t);
    svg += "<line x1=\"" + fmt2(ml) + "\" y1=\"" + fmt2(Y) + "\" x2=\"" + fmt2(ml + pw) +
           "\" y2=\"" + fmt2(Y) + "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + fmt2(ml - 6) + "\" y=\"" + fmt2(Y + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
           xml_escape(fmt_tick(t)) + "</text>\n";
  }
  svg += "<rect x=\"" + fmt2(ml) + "\" y=\"" + fmt2(mt) + "\" width=\"" + fmt2(pw) +
         "\" height=\"" + fmt2(ph) + "\" fill=\"none\" stroke=\"#333333\"/>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = kPalette[si % 6];
    std::string pts;
    for (size_t i = 0; i < s.x.size(); ++i) {
      double xv = spec.log_x ? std::log10(s.x[i]) : s.x[i];
      if (!std::isfinite(xv) || !std::isfinite(s.y[i])) continue;
      if (!pts.empty()) pts += ' ';
      pts += fmt2(px(xv)) + "," + fmt2(py(s.y[i]));
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.8\" points=\"" + pts + "\"/>\n";
    double ly = mt + 16 + 16 * si;
    svg += "<line x1=\"" + fmt2(ml + pw - 150) + "\" y1=\"" + fmt2(ly - 4) + "\" x2=\"" +
           fmt2(ml + pw - 126) + "\" y2=\"" + fmt2(ly - 4) + "\" stroke=\"" + color +
           "\" stroke-width=\"1.8\"/>\n";
    svg += "<text x=\"" + fmt2(ml + pw - 120) + "\" y=\"" + fmt2(ly) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + xml_escape(s.label) + "</text>\n";
  }

  if (!spec.x_label.empty())
    svg += "<text x=\"" + fmt2(ml + pw / 2) + "\" y=\"" + fmt2(h - 12) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
           xml_escape(spec.x_label) + "</text>\n";
  if (!spec.y_label.empty())
    svg += "<text x=\"16\" y=\"" + fmt2(mt + ph / 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
           "transform=\"rotate(-90 16 " +
           fmt2(mt + ph / 2) + ")\">" + xml_escape(spec.y_label) + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace lplab
