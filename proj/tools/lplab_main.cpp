// Experiment runner: one JSON config per run, one subcommand per experiment.
// Exit codes: 0 success, 2 a math check failed, 1 program or config error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lplab/action.hpp"
#include "lplab/background.hpp"
#include "lplab/bvp.hpp"
#include "lplab/geodesic.hpp"
#include "lplab/io.hpp"
#include "lplab/quadrature.hpp"
#include "lplab/sphere_oracle.hpp"
#include "lplab/util.hpp"
#include "lplab/volume.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lplab;

namespace {

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const json& need(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path.empty() ? "config: expected an object" : path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path + key + ": missing field");
  return *it;
}

double need_num(const json& obj, const std::string& key, const std::string& path) {
  const json& v = need(obj, key, path);
  if (!v.is_number()) throw SchemaError(path + key + ": expected a number");
  return v.get<double>();
}

double opt_num(const json& obj, const std::string& key, const std::string& path, double dflt) {
  if (!obj.is_object() || !obj.contains(key)) return dflt;
  return need_num(obj, key, path);
}

int need_int(const json& obj, const std::string& key, const std::string& path) {
  const json& v = need(obj, key, path);
  if (!v.is_number_integer()) throw SchemaError(path + key + ": expected an integer");
  return v.get<int>();
}

int opt_int(const json& obj, const std::string& key, const std::string& path, int dflt) {
  if (!obj.is_object() || !obj.contains(key)) return dflt;
  return need_int(obj, key, path);
}

bool opt_bool(const json& obj, const std::string& key, const std::string& path, bool dflt) {
  if (!obj.is_object() || !obj.contains(key)) return dflt;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw SchemaError(path + key + ": expected a boolean");
  return v.get<bool>();
}

std::string need_str(const json& obj, const std::string& key, const std::string& path) {
  const json& v = need(obj, key, path);
  if (!v.is_string()) throw SchemaError(path + key + ": expected a string");
  return v.get<std::string>();
}

std::vector<double> num_list(const json& v, const std::string& path) {
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
    return out;
  }
  if (!v.is_array()) throw SchemaError(path + ": expected a number or an array of numbers");
  for (const json& e : v) {
    if (!e.is_number()) throw SchemaError(path + ": expected numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<double> need_grid(const json& obj, const std::string& key, const std::string& path) {
  std::vector<double> g = num_list(need(obj, key, path), path + key);
  if (g.empty()) throw SchemaError(path + key + ": empty grid");
  for (size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] > 0.0)) throw SchemaError(path + key + ": grid values must be positive");
    if (i > 0 && !(g[i] > g[i - 1]))
      throw SchemaError(path + key + ": grid must be strictly increasing");
  }
  return g;
}

VecN parse_vec(const json& v, int n, const std::string& path) {
  if (!v.is_array() || static_cast<int>(v.size()) != n)
    throw SchemaError(path + ": expected an array of " + std::to_string(n) + " numbers");
  VecN out(n);
  for (int i = 0; i < n; ++i) {
    if (!v[i].is_number()) throw SchemaError(path + ": expected numbers");
    out(i) = v[i].get<double>();
  }
  return out;
}

struct Run {
  json cfg;
  BackgroundId bg;
  FlowParams par;
  fs::path out_dir;
  int threads = 1;
  unsigned seed = 0;
  ShootOptions shoot;
  SolveOptions solve;
};

Run load_run(const std::string& config_path, const std::string& out_override,
             int threads_override) {
  std::ifstream f(config_path);
  if (!f) throw std::runtime_error("cannot open config: " + config_path);
  Run run;
  try {
    run.cfg = json::parse(f);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }

  const json& b = need(run.cfg, "background", "");
  std::string kind = need_str(b, "kind", "background.");
  if (kind == "flat") {
    run.bg = make_flat(need_int(b, "n", "background."));
  } else if (kind == "sphere") {
    run.bg = make_sphere(need_int(b, "n", "background."), need_num(b, "a", "background."));
  } else if (kind == "cigar") {
    run.bg = make_cigar(opt_num(b, "t0", "background.", 0.0));
  } else {
    throw SchemaError("background.kind: expected flat, sphere or cigar");
  }
  if (b.contains("scale")) run.bg = rescale(run.bg, need_num(b, "scale", "background."));

  double p = need_num(run.cfg, "p", "");
  if (!(p > 0.0 && p < 1.0)) throw SchemaError("p: must lie in (0,1)");
  run.par = make_flow_params(run.bg, p, opt_num(run.cfg, "tau_max", "", 1.0e6));
  if (run.cfg.contains("p0"))
    run.par.p0 = parse_vec(run.cfg.at("p0"), run.bg.n, "p0");
  validate(run.par, run.bg);

  run.out_dir = out_override.empty()
                    ? fs::path(need_str(run.cfg, "out", ""))
                    : fs::path(out_override);
  run.seed = static_cast<unsigned>(opt_int(run.cfg, "seed", "", 0));
  run.threads = threads_override > 0 ? threads_override : opt_int(run.cfg, "threads", "", 1);
  if (run.threads < 1) throw SchemaError("threads: must be positive");

  const json tol = run.cfg.contains("tolerances") ? run.cfg.at("tolerances") : json::object();
  run.shoot.rtol = opt_num(tol, "rtol", "tolerances.", 1e-9);
  run.shoot.atol = opt_num(tol, "atol", "tolerances.", 1e-9);
  run.solve.residual_tol = opt_num(tol, "residual", "tolerances.", 1e-9);
  run.solve.starts = opt_int(run.cfg, "starts", "", 32);
  run.solve.seed = run.seed;
  run.solve.shoot = run.shoot;
  return run;
}

void check_window(const std::vector<double>& grid, const FlowParams& par,
                  const std::string& path) {
  if (grid.back() > window_cap(par))
    throw SchemaError(path + ": grid exceeds the flow window (cap " +
                      format_number(window_cap(par)) + ")");
}

// ---- commands --------------------------------------------------------------

int cmd_geodesic(const Run& run) {
  const json& blk = need(run.cfg, "geodesic", "");
  double tau_bar = need_num(blk, "tau_bar", "geodesic.");
  check_window({tau_bar}, run.par, "geodesic.tau_bar");
  VecN v = parse_vec(need(blk, "v", "geodesic."), run.bg.n, "geodesic.v");
  int samples = opt_int(blk, "samples", "geodesic.", 200);
  GeodesicCurve curve = shoot(run.bg, run.par, v, tau_bar, run.shoot);
  write_csv(run.out_dir / "geodesic.csv", curve_table(curve, samples));
  std::cout << "geodesic: wrote " << (run.out_dir / "geodesic.csv").string() << " (defect "
            << format_number(el_residual(curve)) << ")\n";
  return 0;
}

int cmd_reduced_distance(const Run& run) {
  const json& blk = need(run.cfg, "reduced_distance", "");
  const json& qj = need(blk, "q", "reduced_distance.");
  std::vector<VecN> qs;
  if (qj.is_array() && !qj.empty() && qj[0].is_array()) {
    for (size_t i = 0; i < qj.size(); ++i)
      qs.push_back(parse_vec(qj[i], run.bg.n, "reduced_distance.q[" + std::to_string(i) + "]"));
  } else {
    qs.push_back(parse_vec(qj, run.bg.n, "reduced_distance.q"));
  }
  std::vector<double> taus = need_grid(blk, "tau", "reduced_distance.");
  check_window(taus, run.par, "reduced_distance.tau");

  std::vector<ReducedSolution> sols;
  for (const VecN& q : qs)
    for (double tau : taus) sols.push_back(solve_lp(run.bg, run.par, q, tau, run.solve));
  write_csv(run.out_dir / "solutions.csv", solutions_table(sols, run.bg.n));
  std::cout << "reduced-distance: " << sols.size() << " solves -> "
            << (run.out_dir / "solutions.csv").string() << "\n";
  return 0;
}

int cmd_volume(const Run& run) {
  const json& blk = need(run.cfg, "volume", "");
  std::vector<double> taus = need_grid(blk, "tau", "volume.");
  check_window(taus, run.par, "volume.tau");
  std::string dflt = run.bg.kind == BackgroundKind::sphere ? "both" : "pushforward";
  std::string method = blk.contains("method") ? need_str(blk, "method", "volume.") : dflt;
  PushforwardQuad quad;
  quad.order = opt_int(blk, "order", "volume.", 20);
  quad.threads = run.threads;
  quad.shoot = run.shoot;
  quad.probe.seed = run.seed;

  CsvTable t;
  if (method == "both") {
    t.header = {"tau", "pushforward", "direct", "rel_diff"};
    for (double tau : taus) {
      double a = reduced_volume_pushforward(run.bg, run.par, tau, quad);
      double b = reduced_volume_direct(run.bg, run.par, tau);
      double rel = std::fabs(a - b) / std::max(1e-300, std::fabs(b));
      t.rows.push_back({format_number(tau), format_number(a), format_number(b),
                        format_number(rel)});
    }
  } else if (method == "pushforward") {
    t.header = {"tau", "value", "radius", "tail_fraction", "nodes", "admissible", "failed",
                "envelope_violation", "radial"};
    for (double tau : taus) {
      PushforwardResult r = reduced_volume_pushforward_full(run.bg, run.par, tau, quad);
      t.rows.push_back({format_number(tau), format_number(r.value), format_number(r.radius),
                        format_number(r.tail_fraction), std::to_string(r.nodes),
                        std::to_string(r.admissible), std::to_string(r.failed),
                        format_number(r.envelope_violation), r.radial ? "1" : "0"});
    }
  } else if (method == "direct") {
    t.header = {"tau", "value"};
    for (double tau : taus)
      t.rows.push_back({format_number(tau),
                        format_number(reduced_volume_direct(run.bg, run.par, tau))});
  } else {
    throw SchemaError("volume.method: expected pushforward, direct or both");
  }
  write_csv(run.out_dir / "volume.csv", t);
  std::cout << "volume: " << taus.size() << " values -> "
            << (run.out_dir / "volume.csv").string() << "\n";
  return 0;
}

int cmd_monotonicity(const Run& run) {
  const json& blk = need(run.cfg, "monotonicity", "");
  std::vector<double> taus = need_grid(blk, "tau", "monotonicity.");
  double c = opt_num(blk, "c", "monotonicity.", 0.5);
  bool corrupt = opt_bool(blk, "corrupt_weight_sign", "monotonicity.", false);
  PushforwardQuad quad;
  quad.order = opt_int(blk, "order", "monotonicity.", 20);
  quad.threads = run.threads;
  quad.shoot = run.shoot;
  quad.probe.seed = run.seed;

  VolumeScan scan = monotonicity_scan(run.bg, run.par, taus, c, quad);
  std::cout << "derived: A0 = " << format_number(scan.A0)
            << " (drift constant, c = " << format_number(c)
            << "), tau0 = " << format_number(scan.tau0) << ", method = " << scan.method << "\n";
  if (corrupt) {
    // negative-control fixture: flip the weight sign and retest directly on
    // the weighted column
    scan.all_ok = true;
    for (size_t i = 0; i < scan.taus.size(); ++i) {
      scan.weights[i] = -scan.weights[i];
      scan.weighted[i] = -scan.weighted[i];
      bool ok = i == 0 ||
                scan.weighted[i] <= scan.weighted[i - 1] + 1e-6 * (1.0 + std::fabs(scan.weighted[i - 1]));
      scan.monotone_ok[i] = ok;
      scan.all_ok = scan.all_ok && ok;
    }
  }
  write_csv(run.out_dir / "monotonicity.csv", volume_scan_table(scan));
  std::cout << "monotonicity: worst log-space rise " << format_number(scan.worst_slack) << " -> "
            << (run.out_dir / "monotonicity.csv").string() << "\n";
  if (!scan.all_ok) {
    std::cerr << "monotonicity: weighted column is not nonincreasing\n";
    return 2;
  }
  return 0;
}

int cmd_rescaled(const Run& run) {
  const json& blk = need(run.cfg, "rescaled", "");
  double rho = need_num(blk, "rho", "rescaled.");
  std::vector<double> tau_bars = need_grid(blk, "tau_bar", "rescaled.");
  double tau_bar0 = opt_num(blk, "tau_bar0", "rescaled.",
                            run.par.p == 0.5 ? 0.0 : tau_bars.front() / 2.0);
  double c2 = opt_num(blk, "c2", "rescaled.", curvature_bounds(run.bg).c2);
  double C0 = opt_num(blk, "C0", "rescaled.",
                      run.bg.kind == BackgroundKind::sphere ? c0_constant(run.bg, run.par) : 0.0);
  std::cout << "derived: c2 = " << format_number(c2) << " (upper Ricci bound), C0 = "
            << format_number(C0) << " (reduced-distance growth), tau_bar0 = "
            << format_number(tau_bar0) << ", rho cap = " << format_number(rho_cap(run.par.p))
            << "\n";
  VolumeScan scan = rescaled_monotonicity_scan(run.bg, run.par, rho, tau_bars, tau_bar0, c2, C0);
  write_csv(run.out_dir / "rescaled.csv", volume_scan_table(scan));
  std::cout << "rescaled: worst log-space rise " << format_number(scan.worst_slack) << " -> "
            << (run.out_dir / "rescaled.csv").string() << "\n";
  if (!scan.all_ok) {
    std::cerr << "rescaled: weighted column is not nonincreasing\n";
    return 2;
  }
  return 0;
}

// ---- verify suite ----------------------------------------------------------

struct Verifier {
  const Run& run;
  std::vector<ReportRow> rows;

  void add(const std::string& quantity, const std::string& location, double lhs, double rhs,
           double slack_allowed) {
    ReportRow r;
    r.quantity = quantity;
    r.location = location;
    r.lhs = lhs;
    r.rhs = rhs;
    r.slack = lhs - rhs;
    r.pass = r.slack <= slack_allowed;
    rows.push_back(r);
  }

  MatN chart_of_orthonormal() const {
    MetricJet j0 = sample_jet(run.bg, run.par.p0, 0.0);
    Eigen::LLT<MatN> llt(j0.g);
    return MatN(llt.matrixL().transpose()).inverse();
  }

  std::vector<VecN> chart_points() const {
    // probe targets at order-one metric distance from the base point on every model
    int n = run.bg.n;
    MatN frame = chart_of_orthonormal();
    std::vector<VecN> pts;
    double mags[3] = {0.4, 0.75, 1.1};
    for (int k = 0; k < 3; ++k) {
      VecN w = VecN::Zero(n);
      for (int i = 0; i < n; ++i) w(i) = mags[k] * ((i % 2 == 0) ? 1.0 : -0.6) / std::sqrt(n);
      pts.push_back(VecN(run.par.p0 + frame * w));
    }
    return pts;
  }

  std::vector<VecN> velocity_samples(int count) const {
    // orthonormal components give order-one geometric speeds on every model;
    // the 2(1-p) factor keeps the swept arc length roughly p-independent
    int n = run.bg.n;
    MatN frame = chart_of_orthonormal();
    double reach = 2.0 * (1.0 - run.par.p);
    std::vector<VecN> vs;
    for (int k = 0; k < count; ++k) {
      VecN w(n);
      for (int i = 0; i < n; ++i)
        w(i) = 1.2 * (2.0 * halton(run.seed * 64 + 17 + k * 7 + i, i == 0 ? 2 : (i == 1 ? 3 : 5)) - 1.0);
      if (w.norm() < 0.15) w(0) += 0.3;
      vs.push_back(VecN(reach * (frame * w)));
    }
    return vs;
  }

  // chart step metrically comparable to 0.005 at the probe point
  double fd_chart_step(const VecN& q, double tau) const {
    MetricJet j = sample_jet(run.bg, q, tau);
    Eigen::SelfAdjointEigenSolver<MatN> es(j.g);
    return 0.005 / std::sqrt(es.eigenvalues().maxCoeff());
  }

  void suite_backgrounds() {
    for (const VecN& x : chart_points())
      for (double tau : {0.3, 1.1}) {
        double res = flow_consistency_check(run.bg, x, tau, 1e-5);
        std::ostringstream loc;
        loc << "x1=" << format_number(x(0)) << " tau=" << format_number(tau);
        add("flow_consistency", loc.str(), res, 0.0, 1e-5);
      }
  }

  void suite_geodesics() {
    for (const VecN& v : velocity_samples(2)) {
      GeodesicCurve curve = shoot(run.bg, run.par, v, 1.0, run.shoot);
      std::ostringstream loc;
      loc << "v1=" << format_number(v(0)) << " tau_bar=1";
      add("geodesic_equation_defect", loc.str(), el_residual(curve), 0.0, 1e-5);
      JacobianRecord rec = exp_jacobian(run.bg, run.par, v, 1.0, JacobianMode::fd_bundle,
                                        JacobianOptions{.shoot = run.shoot});
      add("jacobian_density_positive", loc.str(), 0.0, rec.jp, 0.0);
    }
  }

  void suite_action() {
    VecN v = velocity_samples(1)[0];
    GeodesicCurve curve = shoot(run.bg, run.par, v, 1.0, run.shoot);
    int n = run.bg.n;
    MatN frame = chart_of_orthonormal();
    auto y = [n, frame](double s) {
      VecN out(n);
      for (int i = 0; i < n; ++i) out(i) = s * s * (i + 1) * 0.2;
      return VecN(frame * out);
    };
    auto dy = [n, frame](double s) {
      VecN out(n);
      for (int i = 0; i < n; ++i) out(i) = 2.0 * s * (i + 1) * 0.2;
      return VecN(frame * out);
    };
    if (run.bg.kind != BackgroundKind::sphere || curve.rotations == 0) {
      double a = first_variation(curve, y, dy, VariationMode::formula);
      double b = first_variation(curve, y, dy, VariationMode::fd);
      add("first_variation_fd_match", "tau_bar=1", std::fabs(a - b),
          1e-4 * (1.0 + std::fabs(a)), 0.0);
    }
    for (double tau : {0.4, 1.0}) {
      DlogJCheck dj = dlogj_inequality_check(run.bg, run.par, v, tau);
      std::ostringstream loc;
      loc << "tau=" << format_number(tau);
      add("jacobian_growth_bound", loc.str(), dj.lhs, dj.rhs, 1e-6 * (1.0 + std::fabs(dj.rhs)));
    }
    for (double tau : {0.25, 0.7, 1.0}) {
      CurveState st = curve.state_at_in_chart(curve.s_of_tau(tau), 0);
      MetricJet jet = sample_jet(run.bg, st.x, tau);
      double s = curve.s_of_tau(tau);
      double p = run.par.p;
      VecN x_tau = (1.0 - p) * std::pow(s, -p / (1.0 - p)) * st.u;
      double H = harnack_H(jet, x_tau, tau);
      std::ostringstream loc;
      loc << "tau=" << format_number(tau);
      add("harnack_lower_bound", loc.str(), -jet.scalar_R / tau - H,
          0.0, 1e-8 * (1.0 + std::fabs(jet.scalar_R / tau)));
    }
  }

  void suite_bvp() {
    double tau_bar = 1.0;
    const double p = run.par.p;
    std::vector<VecN> targets = chart_points();
    targets.resize(2);
    for (const VecN& q : targets) {
      ReducedSolution sol = solve_lp(run.bg, run.par, q, tau_bar, run.solve);
      std::ostringstream loc;
      loc << "q1=" << format_number(q(0)) << " tau_bar=" << format_number(tau_bar);
      add("solver_endpoint_defect", loc.str(), sol.residual, 0.0,
          1e-7 * (1.0 + q.cwiseAbs().maxCoeff()));
      add("unique_minimizer", loc.str(), sol.in_omega ? 0.0 : 1.0, 0.0, 0.0);

      LpBoundsValue bounds = lp_bounds(run.bg, run.par, q, tau_bar);
      double slack = 1e-7 * (1.0 + std::fabs(sol.value.L_p));
      add("action_window_lower", loc.str(), bounds.lower, sol.value.L_p, slack);
      add("action_window_upper", loc.str(), sol.value.L_p, bounds.upper, slack);

      double h = fd_chart_step(q, tau_bar);
      GradCheck gc = grad_L_check(run.bg, run.par, sol, h);
      add("action_gradient_identity", loc.str(), gc.rel_error, 0.0, 1e-4);
      LaplacianCheck lc = laplacian_L_check(run.bg, run.par, sol, h);
      add("action_laplacian_bound", loc.str(), lc.lhs, lc.rhs, 1e-4 * (1.0 + std::fabs(lc.rhs)));

      // endpoint speed and gradient growth controlled by the action value
      double c1p = (p < 0.5 ? (1.0 - p) : p) + 2.0;
      CurveState st = sol.curve.state_at(sol.curve.s_bar);
      MetricJet jet = sample_jet(run.bg, st.x, tau_bar);
      double sb = sol.curve.s_bar;
      VecN x_tau = (1.0 - p) * std::pow(sb, -p / (1.0 - p)) * st.u;
      double speed2 = inner(jet.g, x_tau, x_tau);
      double speed_rhs = c1p / std::pow(tau_bar, p + 1.0) * sol.value.L_p;
      add("endpoint_speed_bound", loc.str(), jet.scalar_R + speed2, speed_rhs,
          1e-7 * (1.0 + std::fabs(speed_rhs)));
      double grad_l2 = 4.0 * (1.0 - p) * (1.0 - p) * std::pow(tau_bar, 4.0 * p - 2.0) * speed2;
      double grad_lhs = grad_l2 +
                        4.0 * (1.0 - p) * (1.0 - p) * std::pow(tau_bar, -2.0 * (1.0 - 2.0 * p)) *
                            jet.scalar_R;
      double grad_rhs = 4.0 * (1.0 - p) * c1p * std::pow(tau_bar, -2.0 * (1.0 - p)) *
                        sol.value.l_p;
      add("reduced_gradient_bound", loc.str(), grad_lhs, grad_rhs,
          1e-7 * (1.0 + std::fabs(grad_rhs)));
    }

    std::vector<VecN> grid_q = chart_points();
    grid_q.push_back(VecN::Zero(run.bg.n));
    MinLpCheck mc = min_lp_bound_check(run.bg, run.par, 0.8, grid_q, run.solve);
    add("reduced_distance_min_bound", "tau=0.8", mc.min_lp, mc.bound,
        1e-6 * (1.0 + std::fabs(mc.bound)));

    std::vector<GpRow> gp = g_p_scan(run.bg, run.par, {0.4, 0.8, 1.2}, grid_q, run.solve);
    for (size_t i = 1; i < gp.size(); ++i) {
      std::ostringstream loc;
      loc << "tau=" << format_number(gp[i].tau);
      add("g_p_decreasing", loc.str(), gp[i].g_p, gp[i - 1].g_p,
          1e-6 * (1.0 + std::fabs(gp[i - 1].g_p)));
    }
  }

  VolumeScan suite_volume() {
    PushforwardQuad quad;
    quad.threads = run.threads;
    quad.shoot = run.shoot;
    quad.probe.seed = run.seed;
    const double p = run.par.p;
    const int n = run.bg.n;

    if (run.bg.kind == BackgroundKind::flat) {
      double flat_exact = std::pow(std::sqrt(M_PI) / (1.0 - p), n);
      for (double tau : {0.5, 1.25}) {
        double val = reduced_volume_pushforward(run.bg, run.par, tau, quad);
        std::ostringstream loc;
        loc << "tau=" << format_number(tau);
        add("volume_flat_constant", loc.str(), std::fabs(val - flat_exact) / flat_exact, 0.0,
            1e-4);
      }
    } else if (run.bg.kind == BackgroundKind::sphere) {
      for (double tau : {0.5, 1.0}) {
        double a = reduced_volume_pushforward(run.bg, run.par, tau, quad);
        double b = reduced_volume_direct(run.bg, run.par, tau);
        std::ostringstream loc;
        loc << "tau=" << format_number(tau);
        add("volume_cross_method", loc.str(), std::fabs(a - b) / std::fabs(b), 0.0, 1e-4);
      }
    }

    double rho = 0.7, tb = 1.3;
    double rv = rescaled_volume(run.bg, run.par, tb, rho, false, quad);
    add("rescaled_volume_identity", "tau_bar=1.3 rho=0.7", rv > 0.0 ? 0.0 : 1.0, 0.0, 0.0);

    VolumeScan scan;
    if (p >= 0.5) {  // corrected-volume window exists only from p = 1/2 up
      VecN v = velocity_samples(1)[0] * 0.5;
      std::vector<double> zgrid{0.3, 0.45, 0.6, 0.8};
      ZpCheck z = zp_monotone_check(run.bg, run.par, v, zgrid, 0.5, run.solve);
      add("integrand_monotone", "v scan", z.max_violation, 0.0, 1e-7);

      std::vector<double> mg{0.3, 0.6, 0.9};
      scan = monotonicity_scan(run.bg, run.par, mg, 0.5, quad);
      add("volume_monotone", "3-point scan", scan.worst_slack, 0.0, 1e-6);
      double limit = std::pow(std::sqrt(M_PI) / (1.0 - p), n);
      for (size_t i = 0; i < scan.taus.size(); ++i) {
        std::ostringstream loc;
        loc << "tau=" << format_number(scan.taus[i]);
        add("volume_upper_limit", loc.str(), scan.weighted[i], limit, 1e-6 * limit);
      }
    }
    return scan;
  }
};

int cmd_verify(const Run& run) {
  const json blk = run.cfg.contains("verify") ? run.cfg.at("verify") : json::object();
  std::vector<std::string> suites;
  if (blk.contains("suites")) {
    for (const json& s : blk.at("suites")) suites.push_back(s.get<std::string>());
  } else {
    suites = {"all"};
  }
  auto enabled = [&](const char* name) {
    for (const std::string& s : suites)
      if (s == "all" || s == name) return true;
    return false;
  };

  Verifier ver{run, {}};
  bool ran_volume = false;
  VolumeScan scan;
  if (enabled("backgrounds")) ver.suite_backgrounds();
  if (enabled("geodesics")) ver.suite_geodesics();
  if (enabled("action")) ver.suite_action();
  if (enabled("bvp")) ver.suite_bvp();
  if (enabled("volume")) {
    scan = ver.suite_volume();
    ran_volume = true;
  }

  write_csv(run.out_dir / "report.csv", report_table(ver.rows));
  if (ran_volume) write_csv(run.out_dir / "verify_scan.csv", volume_scan_table(scan));

  int failures = 0;
  for (const ReportRow& r : ver.rows)
    if (!r.pass) {
      ++failures;
      std::cerr << "verify: FAIL " << r.quantity << " at " << r.location << " (slack "
                << format_number(r.slack) << ")\n";
    }
  std::cout << "verify: " << ver.rows.size() << " checks, " << failures << " failures -> "
            << (run.out_dir / "report.csv").string() << "\n";
  return failures == 0 ? 0 : 2;
}

int cmd_plot(const Run& run) {
  const json& blk = need(run.cfg, "plot", "");
  std::vector<std::string> csvs;
  const json& cj = need(blk, "csv", "plot.");
  if (cj.is_string()) {
    csvs.push_back(cj.get<std::string>());
  } else if (cj.is_array()) {
    for (const json& e : cj) csvs.push_back(e.get<std::string>());
  } else {
    throw SchemaError("plot.csv: expected a path or an array of paths");
  }
  std::string xcol = need_str(blk, "x", "plot.");
  std::vector<std::string> ycols;
  const json& yj = need(blk, "y", "plot.");
  if (yj.is_string()) {
    ycols.push_back(yj.get<std::string>());
  } else if (yj.is_array()) {
    for (const json& e : yj) ycols.push_back(e.get<std::string>());
  } else {
    throw SchemaError("plot.y: expected a column name or an array of them");
  }

  std::vector<std::string> labels;
  if (blk.contains("labels"))
    for (const json& e : blk.at("labels")) labels.push_back(e.get<std::string>());

  std::vector<PlotSeries> series;
  for (const std::string& path : csvs) {
    CsvTable t = read_csv(path);
    std::vector<double> xs;
    try {
      xs = t.numeric_column(xcol);
    } catch (const std::invalid_argument& e) {
      throw SchemaError("plot: " + std::string(e.what()) + " in " + path);
    }
    for (const std::string& yc : ycols) {
      PlotSeries s;
      s.x = xs;
      try {
        s.y = t.numeric_column(yc);
      } catch (const std::invalid_argument& e) {
        throw SchemaError("plot: " + std::string(e.what()) + " in " + path);
      }
      s.label = series.size() < labels.size()
                    ? labels[series.size()]
                    : (csvs.size() > 1 ? fs::path(path).stem().string() + ":" + yc : yc);
      series.push_back(std::move(s));
    }
  }

  PlotSpec spec;
  spec.title = blk.contains("title") ? need_str(blk, "title", "plot.") : "";
  spec.x_label = blk.contains("x_label") ? need_str(blk, "x_label", "plot.") : xcol;
  spec.y_label = blk.contains("y_label") ? need_str(blk, "y_label", "plot.") : "";
  spec.log_x = opt_bool(blk, "log_x", "plot.", false);

  std::string out_name = blk.contains("out") ? need_str(blk, "out", "plot.") : "plot.svg";
  fs::path out = run.out_dir / out_name;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream f(out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + out.string());
  f << line_plot_svg(series, spec);
  std::cout << "plot: " << series.size() << " series -> " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for weighted geodesics of backward Ricci flow"};
  app.require_subcommand(1);

  std::string config_path, out_override;
  int threads_override = 0;
  const std::pair<const char*, const char*> names[] = {
      {"geodesic", "integrate one weighted geodesic and dump its trace"},
      {"reduced-distance", "solve boundary problems for the reduced distance"},
      {"volume", "reduced-volume values over a backward-time grid"},
      {"monotonicity", "weighted reduced-volume scan with the drift correction"},
      {"rescaled", "parabolically rescaled reduced-volume scan"},
      {"verify", "run the self-check suites and write a slack report"},
      {"plot", "render CSV columns to a static SVG line plot"}};
  for (auto [name, blurb] : names) {
    CLI::App* sub = app.add_subcommand(name, blurb);
    sub->add_option("--config", config_path, "run configuration (JSON)")->required();
    sub->add_option("--out", out_override, "output directory override");
    sub->add_option("--threads", threads_override, "worker pool size override");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    Run run = load_run(config_path, out_override, threads_override);
    fs::create_directories(run.out_dir);
    std::string cmd = app.get_subcommands().at(0)->get_name();
    if (cmd == "geodesic") return cmd_geodesic(run);
    if (cmd == "reduced-distance") return cmd_reduced_distance(run);
    if (cmd == "volume") return cmd_volume(run);
    if (cmd == "monotonicity") return cmd_monotonicity(run);
    if (cmd == "rescaled") return cmd_rescaled(run);
    if (cmd == "verify") return cmd_verify(run);
    if (cmd == "plot") return cmd_plot(run);
    std::cerr << "unknown command: " << cmd << "\n";
    return 1;
  } catch (const SchemaError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
