#pragma once

// Embedded Dormand-Prince RK5(4) with FSAL, adaptive steps, cubic-Hermite
// dense output and an after-step event hook. The hook may stop integration or
// replace the state (chart rotation on the sphere atlas does that); stage
// evaluations that throw are treated as a rejected step so the controller
// backs away from singular regions instead of crashing mid-stage.

#include "lplab/linalg.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace lplab {

struct OdeOptions {
  double rtol = 1e-9;
  double atol = 1e-9;
  double max_step = std::numeric_limits<double>::infinity();
  int max_steps = 200000;
};

struct OdeStep {
  double s0 = 0.0, s1 = 0.0;
  StateVec y0, y1, f0, f1;
};

enum class OdeStatus { ok, stopped_by_event, step_underflow, too_many_steps };

struct OdeResult {
  std::vector<OdeStep> steps;
  OdeStatus status = OdeStatus::ok;
  std::string message;
  double s_reached = 0.0;
};

struct EventAction {
  enum class Kind { proceed, stop, replace_state } kind = Kind::proceed;
  StateVec replacement;
  static EventAction proceed() { return {}; }
  static EventAction stop() {
    EventAction a;
    a.kind = Kind::stop;
    return a;
  }
  static EventAction replace(StateVec y) {
    EventAction a;
    a.kind = Kind::replace_state;
    a.replacement = std::move(y);
    return a;
  }
};

inline void hermite_eval(const OdeStep& st, double s, StateVec* y, StateVec* dy) {
  double h = st.s1 - st.s0;
  double t = (s - st.s0) / h;
  double t2 = t * t, t3 = t2 * t;
  if (y) {
    double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t, h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    *y = h00 * st.y0 + (h10 * h) * st.f0 + h01 * st.y1 + (h11 * h) * st.f1;
  }
  if (dy) {
    double d00 = 6 * t2 - 6 * t, d10 = 3 * t2 - 4 * t + 1, d01 = -6 * t2 + 6 * t, d11 = 3 * t2 - 2 * t;
    *dy = (d00 / h) * st.y0 + d10 * st.f0 + (d01 / h) * st.y1 + d11 * st.f1;
  }
}

// rhs: StateVec f(double s, const StateVec& y), may throw to veto a region.
// after_step: EventAction f(const OdeStep&), called on accepted steps only.
template <class RHS, class Event>
OdeResult integrate_ode(RHS&& rhs, StateVec y, double s0, double s1, const OdeOptions& opt,
                        Event&& after_step) {
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                      b6 = 11.0 / 84;
  static const double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                      e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                      e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;

  OdeResult res;
  double range = s1 - s0;
  if (!(range > 0.0)) {
    res.status = OdeStatus::ok;
    res.s_reached = s0;
    return res;
  }
  double s = s0;
  double h = std::min(opt.max_step, range * 1e-3);
  double h_floor = range * 1e-14;
  StateVec f0;
  try {
    f0 = rhs(s, y);
  } catch (const std::exception& ex) {
    res.status = OdeStatus::step_underflow;
    res.message = std::string("initial state rejected: ") + ex.what();
    res.s_reached = s;
    return res;
  }

  for (int it = 0; it < opt.max_steps; ++it) {
    if (s >= s1 - 1e-14 * range) {
      res.status = OdeStatus::ok;
      res.s_reached = s1;
      return res;
    }
    h = std::min(h, s1 - s);
    bool bad = false;
    StateVec k2, k3, k4, k5, k6, k7, y5;
    try {
      k2 = rhs(s + c2 * h, y + h * (a21 * f0));
      k3 = rhs(s + c3 * h, y + h * (a31 * f0 + a32 * k2));
      k4 = rhs(s + c4 * h, y + h * (a41 * f0 + a42 * k2 + a43 * k3));
      k5 = rhs(s + c5 * h, y + h * (a51 * f0 + a52 * k2 + a53 * k3 + a54 * k4));
      k6 = rhs(s + h, y + h * (a61 * f0 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      y5 = y + h * (b1 * f0 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      k7 = rhs(s + h, y5);
    } catch (const std::exception&) {
      bad = true;
    }

    double err = std::numeric_limits<double>::infinity();
    if (!bad) {
      StateVec ev = h * (e1 * f0 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      double acc = 0.0;
      bool finite = true;
      for (int i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y5[i])) {
          finite = false;
          break;
        }
        double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
        double q = ev[i] / sc;
        acc += q * q;
      }
      err = finite ? std::sqrt(acc / y.size()) : std::numeric_limits<double>::infinity();
    }

    if (err <= 1.0) {
      OdeStep st;
      st.s0 = s;
      st.s1 = s + h;
      st.y0 = y;
      st.y1 = y5;
      st.f0 = f0;
      st.f1 = k7;
      res.steps.push_back(st);
      s += h;
      y = y5;
      f0 = k7;

      EventAction act = after_step(res.steps.back());
      if (act.kind == EventAction::Kind::stop) {
        res.status = OdeStatus::stopped_by_event;
        res.s_reached = s;
        return res;
      }
      if (act.kind == EventAction::Kind::replace_state) {
        y = act.replacement;
        try {
          f0 = rhs(s, y);  // FSAL value is stale after a state replacement
        } catch (const std::exception& ex) {
          res.status = OdeStatus::step_underflow;
          res.message = std::string("replacement state rejected: ") + ex.what();
          res.s_reached = s;
          return res;
        }
      }
      double grow = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
      h = std::min(opt.max_step, h * std::min(5.0, std::max(0.2, grow)));
    } else {
      double shrink = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
      h *= shrink;
      if (h < h_floor) {
        res.status = OdeStatus::step_underflow;
        res.message = "step size underflow (stiffness or a singular region)";
        res.s_reached = s;
        return res;
      }
    }
  }
  res.status = OdeStatus::too_many_steps;
  res.message = "exceeded max_steps";
  res.s_reached = s;
  return res;
}

}  // namespace lplab
