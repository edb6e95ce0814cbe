#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "lplab/background.hpp"
#include "lplab/geodesic.hpp"
#include "lplab/io.hpp"

using namespace lplab;

TEST_CASE("number formatting survives a round trip") {
  for (double x : {0.1, -3.0, 1.0 / 3.0, 2.5e-17, 7.25e40, 0.0}) {
    CHECK(std::stod(format_number(x)) == x);
  }
  // fixed digit count keeps files byte-stable
  CHECK(format_number(0.1) == format_number(0.1000000000000000055511151231257827));
}

TEST_CASE("csv writer follows the quoting rules") {
  CsvTable t;
  t.header = {"name", "value"};
  t.rows = {{"plain", "1.5"}, {"comma, inside", "2"}, {"quote \" inside", "3"}, {"multi\nline", "4"}};
  std::string text = to_csv(t);
  CHECK(text.find("\r\n") != std::string::npos);
  CHECK(text.find("\"comma, inside\"") != std::string::npos);
  CHECK(text.find("\"quote \"\" inside\"") != std::string::npos);

  std::filesystem::path tmp = std::filesystem::temp_directory_path() / "lplab_io_test.csv";
  write_csv(tmp, t);
  CsvTable back = read_csv(tmp);
  CHECK(back.header == t.header);
  REQUIRE(back.rows.size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) CHECK(back.rows[i] == t.rows[i]);
  std::filesystem::remove(tmp);
}

TEST_CASE("numeric column extraction") {
  CsvTable t;
  t.header = {"tau", "value", "tag"};
  t.rows = {{"0.5", "1.25", "x"}, {"1", "-2e-3", "y"}};
  CHECK(t.column("value") == 1);
  CHECK(t.column("missing") == -1);
  std::vector<double> vals = t.numeric_column("value");
  REQUIRE(vals.size() == 2);
  CHECK(vals[0] == 1.25);
  CHECK(vals[1] == -2e-3);
  CHECK_THROWS_AS(t.numeric_column("tag"), std::invalid_argument);
  CHECK_THROWS_AS(t.numeric_column("missing"), std::invalid_argument);
}

TEST_CASE("curve table carries the expected columns") {
  BackgroundId bg = make_flat(2);
  FlowParams par = make_flow_params(bg, 0.5);
  VecN v(2);
  v << 0.8, -0.2;
  GeodesicCurve cur = shoot(bg, par, v, 1.0);
  CsvTable t = curve_table(cur, 17);
  CHECK(t.rows.size() == 17);
  REQUIRE(t.column("tau") >= 0);
  std::vector<double> taus = t.numeric_column("tau");
  CHECK(taus.front() == 0.0);
  CHECK(taus.back() == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> x1 = t.numeric_column("x1");
  // flat chart path is linear in s = sqrt(tau)
  for (std::size_t i = 0; i < taus.size(); ++i)
    CHECK(x1[i] == doctest::Approx(2.0 * 0.8 * std::sqrt(taus[i])).epsilon(1e-9));
}

TEST_CASE("svg plot is deterministic and self-contained") {
  PlotSeries a{"first", {1.0, 2.0, 3.0}, {0.5, 0.25, 0.125}};
  PlotSeries b{"second", {1.0, 2.0, 3.0}, {0.1, 0.2, 0.3}};
  PlotSpec spec;
  spec.title = "decay";
  spec.x_label = "tau";
  spec.y_label = "value";
  std::string svg = line_plot_svg({a, b}, spec);
  CHECK(svg == line_plot_svg({a, b}, spec));
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("decay") != std::string::npos);
  CHECK(svg.find("first") != std::string::npos);
  // the xmlns declaration is the only URL; nothing is fetched or linked
  CHECK(svg.find("href") == std::string::npos);
  CHECK(svg.find("<script") == std::string::npos);
  CHECK(svg.find("<image") == std::string::npos);

  std::size_t count = 0;
  for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos;
       pos = svg.find("<polyline", pos + 1))
    ++count;
  CHECK(count >= 2);

  spec.log_x = true;
  PlotSeries bad{"zero-x", {0.0, 1.0}, {1.0, 2.0}};
  CHECK_THROWS_AS(line_plot_svg({bad}, spec), std::invalid_argument);
}
