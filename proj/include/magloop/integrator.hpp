#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>

#include "magloop/errors.hpp"

namespace magloop {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double initial_step = 0.0;  // 0 selects a step from the tolerances
  double max_step = 0.0;      // 0 means unbounded
  long max_steps = 2'000'000;
};

/// Dormand-Prince 5(4) with FSAL and the standard quartic dense output.
template <int D>
class DormandPrince {
 public:
  using Vec = Eigen::Matrix<double, D, 1>;
  using Rhs = std::function<Vec(double, const Vec&)>;

  /// One accepted step with its dense interpolant.
  struct Step {
    double t0 = 0.0;
    double t1 = 0.0;
    Vec y0;
    Vec y1;
    Vec f1;
    std::array<Vec, 7> k;

    double h() const { return t1 - t0; }
    Vec eval(double t) const {
      const double h = t1 - t0;
      const double s = (t - t0) / h;
      Vec acc = Vec::Zero(y0.size());
      double sp = s;
      for (int p = 0; p < 4; ++p) {
        Vec q = Vec::Zero(y0.size());
        for (int i = 0; i < 7; ++i) q += kP[i][p] * k[i];
        acc += q * sp;
        sp *= s;
      }
      return y0 + h * acc;
    }
  };

  /// Observer returns false to stop the integration after this step.
  using Observer = std::function<bool(const Step&)>;

  explicit DormandPrince(OdeOptions opts = {}) : opts_(opts) {}

  /// Integrates from (t0, y0) towards t_end. Returns the final (t, y) reached.
  std::pair<double, Vec> integrate(const Rhs& f, double t0, const Vec& y0, double t_end,
                                   const Observer& observer = {}) const {
    const double dir = t_end >= t0 ? 1.0 : -1.0;
    double t = t0;
    Vec y = y0;
    Vec fy = f(t, y);
    if (t_end == t0) return {t, y};
    double h = opts_.initial_step > 0 ? opts_.initial_step : initial_step(f, t, y, fy, dir);
    long steps = 0;
    double err_prev = 1e-4;
    while (dir * (t_end - t) > 0) {
      if (++steps > opts_.max_steps) throw Error(ErrorKind::StepFailure, "step budget exhausted");
      if (opts_.max_step > 0) h = std::min(h, opts_.max_step);
      bool last = false;
      if (h >= dir * (t_end - t)) {
        h = dir * (t_end - t);
        last = true;
      }
      const double h_min = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
      if (h < h_min) throw Error(ErrorKind::StepFailure, "step size underflow at t=" + std::to_string(t));

      Step st;
      st.t0 = t;
      st.y0 = y;
      const double err = attempt(f, t, y, fy, dir * h, st);
      if (!(err <= 1.0)) {
        const double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
        h *= fac;
        continue;
      }
      st.t1 = last ? t_end : t + dir * h;
      t = st.t1;
      y = st.y1;
      fy = st.f1;
      // PI step control
      double fac = err == 0.0 ? 10.0 : 0.9 * std::pow(err, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
      fac = std::clamp(fac, 0.2, 10.0);
      err_prev = std::max(err, 1e-4);
      h *= fac;
      if (observer && !observer(st)) break;
    }
    return {t, y};
  }

  /// One explicit step of size h without error control (5th-order solution).
  static Vec single_step(const Rhs& f, double t, const Vec& y, double h) {
    Step st;
    st.t0 = t;
    st.y0 = y;
    attempt_raw(f, t, y, f(t, y), h, st);
    return st.y1;
  }

 private:
  static constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static constexpr double kA[7][6] = {
      {0, 0, 0, 0, 0, 0},
      {1.0 / 5, 0, 0, 0, 0, 0},
      {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
      {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
      {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  static constexpr double kE[7] = {-71.0 / 57600, 0, 71.0 / 16695, -71.0 / 1920, 17253.0 / 339200, -22.0 / 525,
                                   1.0 / 40};
  static constexpr double kP[7][4] = {
      {1.0, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608, -12715105075.0 / 11282082432},
      {0, 0, 0, 0},
      {0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933, 87487479700.0 / 32700410799},
      {0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304, -10690763975.0 / 1880347072},
      {0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408, 701980252875.0 / 199316789632},
      {0, -282668133.0 / 205662961, 2019193451.0 / 616988883, -1453857185.0 / 822651844},
      {0, 40617522.0 / 29380423, -110615467.0 / 29380423, 69997945.0 / 29380423}};

  static void attempt_raw(const Rhs& f, double t, const Vec& y, const Vec& fy, double h, Step& st) {
    st.k[0] = fy;
    for (int s = 1; s < 7; ++s) {
      Vec ys = y;
      for (int j = 0; j < s; ++j)
        if (kA[s][j] != 0.0) ys += h * kA[s][j] * st.k[j];
      st.k[s] = f(t + kC[s] * h, ys);
      if (s == 6) st.y1 = ys;
    }
    st.f1 = st.k[6];
  }

  double attempt(const Rhs& f, double t, const Vec& y, const Vec& fy, double h, Step& st) const {
    attempt_raw(f, t, y, fy, h, st);
    Vec e = Vec::Zero(y.size());
    for (int i = 0; i < 7; ++i) e += kE[i] * st.k[i];
    e *= h;
    double acc = 0.0;
    for (int i = 0; i < y.size(); ++i) {
      const double sc = opts_.atol + opts_.rtol * std::max(std::abs(y(i)), std::abs(st.y1(i)));
      acc += (e(i) / sc) * (e(i) / sc);
    }
    return std::sqrt(acc / static_cast<double>(y.size()));
  }

  double initial_step(const Rhs& f, double t, const Vec& y, const Vec& fy, double dir) const {
    auto scaled_norm = [&](const Vec& v) {
      double acc = 0.0;
      for (int i = 0; i < y.size(); ++i) {
        const double sc = opts_.atol + opts_.rtol * std::abs(y(i));
        acc += (v(i) / sc) * (v(i) / sc);
      }
      return std::sqrt(acc / static_cast<double>(y.size()));
    };
    const double d0 = scaled_norm(y);
    const double d1 = scaled_norm(fy);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    const Vec y1 = y + dir * h0 * fy;
    const double d2 = scaled_norm(f(t + dir * h0, y1) - fy) / h0;
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                 : std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
    return std::min(100 * h0, h1);
  }

  OdeOptions opts_;
};

}  // namespace magloop
