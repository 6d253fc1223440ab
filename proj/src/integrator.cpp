#include "orbitshade/integrator.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace orbitshade {
namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

// Evaluates sign * X(x); false on non-finite output.
struct Rhs {
  const VectorFieldDef& field;
  double sign;
  bool operator()(const Vec& x, Vec& out) const {
    if (!field.evaluate_into(x.data(), out.data())) return false;
    if (sign < 0) out = -out;
    return true;
  }
};

}  // namespace

Vec DenseSegment::at_theta(double th) const {
  const double u = 1.0 - th;
  Vec y = rcont.col(0) + th * (rcont.col(1) + u * (rcont.col(2) + th * (rcont.col(3) + u * rcont.col(4))));
  if (normalize) y.normalize();
  return y;
}

Vec DenseSegment::eval(double t) const {
  const double span = t1 - t0;
  const double th = span == 0.0 ? 0.0 : (t - t0) / span;
  return at_theta(std::clamp(th, 0.0, 1.0));
}

FlowResult integrate(const VectorFieldDef& field, const Vec& x, double t, const IntegratorOptions& opt,
                     const StepObserver& observer) {
  const auto n = static_cast<Eigen::Index>(field.dimension());
  if (x.size() != n) throw DimensionError("initial point has wrong dimension");
  if (!(opt.tol > 0.0)) throw PreconditionError("integration tolerance must be positive");
  if (!x.allFinite()) throw IntegrationError("non-finite initial state", 0.0);
  FlowResult res;
  res.state = x;
  if (t == 0.0) return res;

  const bool sphere = field.constraint() == Constraint::UnitSphere;
  const double dir = t > 0 ? 1.0 : -1.0;
  const double total = std::fabs(t);
  Rhs rhs{field, dir};

  Vec y = field.project(x);
  Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y1(n), err(n);
  if (!rhs(y, k1)) throw IntegrationError("non-finite field value at initial state", 0.0);

  DenseSegment seg;
  seg.rcont.resize(n, 5);
  seg.normalize = sphere;

  double tau = 0.0;  // elapsed |time|
  double h = std::min({opt.initial_step, total, opt.max_step});
  std::size_t steps = 0;
  int rejects_in_row = 0;

  while (tau < total) {
    if (++steps > opt.max_steps) throw IntegrationError("step budget exhausted", dir * tau);
    const double remaining = total - tau;
    bool last = false;
    if (h >= remaining * (1.0 - 1e-12)) {
      h = remaining;
      last = true;
    }
    const double hmin = 1e-14 * std::max(1.0, tau);
    if (h < hmin) throw IntegrationError("step size underflow", dir * tau);

    bool ok = true;
    tmp = y + h * a21 * k1;
    ok = ok && rhs(tmp, k2);
    tmp = y + h * (a31 * k1 + a32 * k2);
    ok = ok && rhs(tmp, k3);
    tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    ok = ok && rhs(tmp, k4);
    tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    ok = ok && rhs(tmp, k5);
    tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    ok = ok && rhs(tmp, k6);
    y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    ok = ok && y1.allFinite() && rhs(y1, k7);

    double ratio = std::numeric_limits<double>::infinity();
    if (ok) {
      err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const double scale = std::max({1.0, y.lpNorm<Eigen::Infinity>(), y1.lpNorm<Eigen::Infinity>()});
      ratio = err.lpNorm<Eigen::Infinity>() / (opt.tol * h * scale);
      if (!std::isfinite(ratio)) ok = false;
    }
    if (!ok) {
      // Non-finite stage: shrink hard and retry.
      h *= 0.1;
      last = false;
      if (++rejects_in_row > 200) throw IntegrationError("non-finite state", dir * tau);
      continue;
    }
    if (ratio > 1.0) {
      h *= std::max(0.1, 0.9 * std::pow(ratio, -0.25));
      ++rejects_in_row;
      if (rejects_in_row > 200) throw IntegrationError("step size underflow", dir * tau);
      continue;
    }
    rejects_in_row = 0;

    // Dense output coefficients.
    seg.rcont.col(0) = y;
    seg.rcont.col(1) = y1 - y;
    seg.rcont.col(2) = h * k1 - seg.rcont.col(1);
    seg.rcont.col(3) = seg.rcont.col(1) - h * k7 - seg.rcont.col(2);
    seg.rcont.col(4) = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
    seg.t0 = dir * tau;
    const double tau_next = last ? total : tau + h;
    seg.t1 = dir * tau_next;

    tau = tau_next;
    if (sphere) {
      y = y1.normalized();
      if (!rhs(y, k1)) throw IntegrationError("non-finite field value", seg.t0);
    } else {
      y = y1;
      k1 = k7;
    }
    if (y.lpNorm<Eigen::Infinity>() > opt.blowup_norm) throw IntegrationError("solution blow-up", seg.t0);

    if (observer && !observer(seg)) {
      res.state = y;
      res.time = seg.t1;
      res.stopped = true;
      res.steps = steps;
      return res;
    }
    const double fac = ratio > 0 ? std::min(5.0, 0.9 * std::pow(ratio, -0.25)) : 5.0;
    h = std::min(h * std::max(0.2, fac), opt.max_step);
  }
  res.state = y;
  res.time = t;
  res.steps = steps;
  return res;
}

Vec flow(const VectorFieldDef& field, const Vec& x, double t, double tol) {
  IntegratorOptions opt;
  opt.tol = tol;
  return integrate(field, x, t, opt).state;
}

Trajectory flow_trajectory(const VectorFieldDef& field, const Vec& x, double T, double dt_out, double tol) {
  if (!(dt_out > 0.0)) throw PreconditionError("dt_out must be positive");
  if (T == 0.0) throw PreconditionError("trajectory window must be nonzero");
  const double dir = T > 0 ? 1.0 : -1.0;
  const double total = std::fabs(T);
  const auto count = static_cast<std::size_t>(std::floor(total / dt_out * (1.0 + 1e-12)));

  Trajectory tr;
  tr.tolerance = tol;
  tr.times.reserve(count + 2);
  tr.points.reserve(count + 2);
  tr.times.push_back(0.0);
  tr.points.push_back(field.project(x));
  std::size_t next = 1;

  IntegratorOptions opt;
  opt.tol = tol;
  auto res = integrate(field, x, T, opt, [&](const DenseSegment& seg) {
    const double hi = std::fabs(seg.t1);
    while (next <= count) {
      const double ts = static_cast<double>(next) * dt_out;
      if (ts > hi || ts >= total * (1.0 - 1e-12)) break;
      tr.times.push_back(dir * ts);
      tr.points.push_back(seg.eval(dir * ts));
      ++next;
    }
    return true;
  });
  tr.times.push_back(T);
  tr.points.push_back(res.state);
  return tr;
}

std::vector<EventCrossing> find_events(const DenseSegment& seg, const std::function<double(const Vec&)>& g,
                                       int resolution) {
  std::vector<EventCrossing> out;
  resolution = std::max(1, resolution);
  auto gt = [&](double th) { return g(seg.at_theta(th)); };
  double tha = 0.0;
  double ga = gt(0.0);
  for (int k = 1; k <= resolution; ++k) {
    const double thb = static_cast<double>(k) / resolution;
    const double gb = gt(thb);
    const bool sa = ga >= 0.0;
    const bool sb = gb >= 0.0;
    if (sa != sb) {
      double root;
      if (gb == 0.0) {
        root = thb;
      } else {
        std::uintmax_t iters = 100;
        auto tol = [](double a, double b) { return std::fabs(b - a) <= 1e-15; };
        auto r = boost::math::tools::toms748_solve(gt, tha, thb, ga, gb, tol, iters);
        // Keep the side where the new sign already holds.
        root = r.second;
      }
      EventCrossing ev;
      ev.t = seg.t0 + root * (seg.t1 - seg.t0);
      ev.x = seg.at_theta(root);
      ev.direction = sb ? +1 : -1;
      out.push_back(std::move(ev));
    }
    tha = thb;
    ga = gb;
  }
  return out;
}

}  // namespace orbitshade
