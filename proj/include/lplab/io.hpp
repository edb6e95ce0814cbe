#pragma once

// CSV and SVG emission. All numeric output goes through one formatter (17
// significant digits) and all summation upstream is pairwise, so identical
// inputs produce byte-identical files regardless of thread count.

#include "lplab/bvp.hpp"
#include "lplab/geodesic.hpp"
#include "lplab/volume.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lplab {

std::string format_number(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
  std::vector<double> numeric_column(const std::string& name) const;
};

// RFC 4180: CRLF line ends, '.' decimal, quotes doubled inside quoted fields
std::string to_csv(const CsvTable& table);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

CsvTable solutions_table(const std::vector<ReducedSolution>& solutions, int n);
CsvTable curve_table(const GeodesicCurve& curve, int samples);
CsvTable volume_scan_table(const VolumeScan& scan);

struct ReportRow {
  std::string quantity;
  std::string location;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // positive means the inequality failed by that much
  bool pass = true;
};
CsvTable report_table(const std::vector<ReportRow>& rows);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  int width = 720;
  int height = 480;
};

// static single-panel line plot; no external references
std::string line_plot_svg(const std::vector<PlotSeries>& series, const PlotSpec& spec);

}  // namespace lplab
