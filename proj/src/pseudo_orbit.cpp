#include "orbitshade/pseudo_orbit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace orbitshade {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double van_der_corput(unsigned k) {
  double v = 0, base = 0.5;
  while (k) {
    if (k & 1u) v += base;
    base *= 0.5;
    k >>= 1;
  }
  return v;
}

Vec random_unit(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec v(n);
  do {
    for (auto& c : v) c = g(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

}  // namespace

GaugeFunction::GaugeFunction(VectorFieldDef field, std::vector<Vec> singular_set,
                             std::function<double(double)> profile, double cap, std::string description)
    : field_(std::move(field)),
      sing_(std::move(singular_set)),
      profile_(std::move(profile)),
      cap_(cap),
      desc_(std::move(description)) {
  if (!profile_) throw PreconditionError("gauge profile is empty");
  if (!(cap_ > 0)) throw PreconditionError("gauge cap must be positive");
}

GaugeFunction GaugeFunction::linear(const VectorFieldDef& field, std::vector<Vec> singular_set, double k,
                                    double cap) {
  if (!(k > 0)) throw PreconditionError("gauge slope must be positive");
  return GaugeFunction(field, std::move(singular_set), [k](double s) { return k * s; }, cap,
                       "min(" + fmt(k) + "*s, " + fmt(cap) + ")");
}

double GaugeFunction::distance_to_singular_set(const Vec& x) const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& s : sing_) d = std::min(d, field_.distance(x, s));
  return d;
}

double GaugeFunction::profile(double s) const { return std::min(profile_(s), cap_); }

double GaugeFunction::operator()(const Vec& x) const {
  const double d = distance_to_singular_set(x);
  if (d == 0.0) return 0.0;
  return profile(d);
}

std::vector<double> PseudoOrbit::accumulated_times() const {
  std::vector<double> s(entries.size() + 1, 0.0);
  for (std::size_t i = 0; i < entries.size(); ++i) s[i + 1] = s[i] + entries[i].t;
  return s;
}

double PseudoOrbit::total_time() const { return accumulated_times().back(); }

double PseudoOrbit::allowed_jump(std::size_t i) const {
  if (rule == JumpRule::Uniform) return delta;
  if (!gauge) throw PreconditionError("gauge rule without a gauge function");
  return (*gauge)(entries.at(i).x);
}

double segment_tolerance(const PseudoOrbit& po, std::size_t i, const ValidationOptions& opt) {
  const double allowed = po.allowed_jump(i);
  if (!(allowed > 0)) return opt.tol;
  return std::clamp(allowed / 100, 1e-13, opt.tol);
}

ValidationReport validate(const VectorFieldDef& field, const PseudoOrbit& po, const ValidationOptions& opt) {
  if (po.entries.empty()) throw PreconditionError("pseudo-orbit has no entries");
  ValidationReport rep;
  rep.valid = true;
  for (std::size_t i = 0; i < po.entries.size(); ++i) {
    if (po.entries[i].t < po.T) {
      rep.valid = false;
      rep.first_violation = i;
      rep.failed_rule = "T";
      return rep;
    }
  }
  for (std::size_t i = 0; i + 1 < po.entries.size(); ++i) {
    const double tol = segment_tolerance(po, i, opt);
    const double slack = opt.slack >= 0 ? opt.slack : 10 * tol;
    const Vec end = flow(field, po.entries[i].x, po.entries[i].t, tol);
    const double jump = field.distance(end, po.entries[i + 1].x);
    const double allowed = po.allowed_jump(i);
    rep.jumps.push_back(jump);
    rep.max_jump = std::max(rep.max_jump, jump);
    double ratio = 0.0;
    if (allowed > 0)
      ratio = jump / allowed;
    else if (jump > slack)
      ratio = std::numeric_limits<double>::infinity();
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    if (rep.valid && jump > allowed + slack) {
      rep.valid = false;
      rep.first_violation = i;
      rep.failed_rule = po.rule == JumpRule::Uniform ? "uniform" : "gauge";
    }
  }
  return rep;
}

PseudoOrbit build_kicked_chain(const VectorFieldDef& field, const Vec& x, int segments, double delta,
                               std::uint64_t seed, double tmin, double tmax, double tol) {
  if (segments < 1) throw PreconditionError("kicked chain needs at least one segment");
  if (!(delta > 0.0)) throw PreconditionError("kicked chain needs delta > 0");
  if (!(tmin > 0.0) || tmax < tmin) throw PreconditionError("kicked chain needs 0 < tmin <= tmax");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dur(tmin, tmax), frac(0.0, 0.9);
  const bool sphere = field.constraint() == Constraint::UnitSphere;
  PseudoOrbit po;
  po.delta = delta;
  po.T = std::min(1.0, tmin);
  Vec cur = sphere ? field.project(x) : x;
  for (int i = 0; i < segments; ++i) {
    const double t = dur(rng);
    po.entries.push_back({cur, t});
    const Vec end = flow(field, cur, t, tol);
    Vec next = end + frac(rng) * delta * random_unit(end.size(), rng);
    if (sphere) {
      next = field.project(next);
      // projection can lengthen the kick; pull it back toward the flow point
      while (field.distance(next, end) > 0.95 * delta) next = field.project(end + 0.5 * (next - end));
    }
    cur = next;
  }
  return po;
}

PseudoOrbit slice_orbit(const VectorFieldDef& field, const Vec& x, const std::vector<double>& durations, double delta,
                        double tol) {
  if (durations.empty()) throw PreconditionError("no durations to slice");
  PseudoOrbit po;
  po.rule = JumpRule::Uniform;
  po.delta = delta;
  po.T = *std::min_element(durations.begin(), durations.end());
  ValidationOptions vo;
  vo.tol = tol;
  Vec cur = x;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    po.entries.push_back({cur, durations[i]});
    if (i + 1 < durations.size()) cur = flow(field, cur, durations[i], segment_tolerance(po, i, vo));
  }
  return po;
}

namespace {

PseudoOrbit loop_chain(const VectorFieldDef& field, const Vec& sigma, const Vec& x0, double t0, int repeats,
                       std::size_t tail_length, double delta_target) {
  if (!(delta_target > 0)) throw PreconditionError("delta must be positive");
  if (t0 < 1.0) throw PreconditionError("t0 = " + fmt(t0) + " is below T = 1");
  const double tol = std::clamp(delta_target / 100, 1e-13, kDefaultTol);
  const double slack = 10 * tol;
  const double d_in = field.distance(sigma, x0);
  const Vec end = flow(field, x0, t0, tol);
  const double d_out = field.distance(end, sigma);
  if (d_in > delta_target + slack || d_out > delta_target + slack)
    throw PreconditionError("loop seed preconditions fail: d(sigma, x0) = " + fmt(d_in) +
                            ", d(X_t0(x0), sigma) = " + fmt(d_out) + ", delta = " + fmt(delta_target));
  if (repeats > 1) {
    const double d_close = field.distance(end, x0);
    if (d_close > delta_target + slack)
      throw PreconditionError("repeated entry does not close: d(X_t0(x0), x0) = " + fmt(d_close) +
                              ", delta = " + fmt(delta_target));
  }
  PseudoOrbit po;
  po.rule = JumpRule::Uniform;
  po.delta = delta_target;
  po.T = 1.0;
  // the chain always keeps one tail entry per side
  const std::size_t tails = std::max<std::size_t>(1, tail_length);
  for (std::size_t i = 0; i < tails; ++i) po.entries.push_back({sigma, 1.0});
  for (int i = 0; i < repeats; ++i) po.entries.push_back({x0, t0});
  for (std::size_t i = 0; i < tails; ++i) po.entries.push_back({sigma, 1.0});
  po.tail_point_before = sigma;
  po.tail_point_after = sigma;
  po.tail_before = tails;
  po.tail_after = tails;
  const auto rep = validate(field, po);
  if (!rep.valid)
    throw PreconditionError("chain fails validation at jump " + std::to_string(*rep.first_violation) +
                            " (measured " + fmt(rep.jumps.empty() ? 0.0 : rep.max_jump) + ")");
  return po;
}

}  // namespace

PseudoOrbit build_loop_seed_chain(const VectorFieldDef& field, const Vec& sigma, const Vec& x0, double t0,
                                  std::size_t tail_length, double delta_target) {
  return loop_chain(field, sigma, x0, t0, 1, tail_length, delta_target);
}

PseudoOrbit build_loop_multiplication_chain(const VectorFieldDef& field, const Vec& sigma, const Vec& x0, double t0,
                                            int N, std::size_t tail_length, double delta_target) {
  if (N < 0) throw PreconditionError("N must be nonnegative");
  return loop_chain(field, sigma, x0, t0, N + 1, tail_length, delta_target);
}

std::optional<double> first_return_time(const VectorFieldDef& field, const Vec& x, double horizon, double t_min,
                                        double radius, double tol) {
  const Vec n = field.evaluate(x);
  if (n.norm() == 0.0) throw PreconditionError("first return from a singular point");
  auto g = [&](const Vec& y) { return (y - x).dot(n); };
  std::optional<double> hit;
  IntegratorOptions opt;
  opt.tol = tol;
  integrate(field, x, horizon, opt, [&](const DenseSegment& seg) {
    if (seg.t1 < t_min) return true;
    for (const auto& ev : find_events(seg, g, 8)) {
      if (ev.direction > 0 && ev.t >= t_min && field.distance(ev.x, x) <= radius) {
        hit = ev.t;
        return false;
      }
    }
    return true;
  });
  return hit;
}

namespace {

// Seed k on the diamond in the band window around n.
Vec diamond_seed(const BoxNeighborhood& box, int n, unsigned k, std::mt19937_64& rng) {
  const Eigen::Index s = box.stable_frame().cols(), u = box.unstable_frame().cols();
  const double lo = std::max(static_cast<double>(n - 1), static_cast<double>(box.K()));
  const double hi = static_cast<double>(n + 2);
  Vec ds, du;
  unsigned level = k;
  if (s == 1 && u == 1) {
    ds = Vec::Constant(1, (k & 1u) ? -1.0 : 1.0);
    du = Vec::Constant(1, (k & 2u) ? -1.0 : 1.0);
    level = k / 4;
  } else {
    ds = random_unit(s, rng);
    du = random_unit(u, rng);
  }
  // centre of band n first, then spread over the window
  double frac = level == 0 ? 0.5 : van_der_corput(level);
  double e = (n + frac);
  if (level != 0) e = lo + (hi - lo) * frac;
  e = std::clamp(e, lo + 1e-9, hi - 1e-9);
  const double rho = std::min(std::exp(-e), box.r() * (1 - 1e-9));
  return box.from_chart(rho * ds, rho * du);
}

struct SectionHit {
  double t = 0.0;
  Vec x;
};

// Forward time from an entry point to the diamond, staying inside the box.
std::optional<SectionHit> time_to_diamond(const VectorFieldDef& field, const BoxNeighborhood& box, const Vec& x,
                                          double tol) {
  std::optional<SectionHit> hit;
  bool left = false;
  IntegratorOptions opt;
  opt.tol = tol;
  opt.max_step = 0.05;
  auto gd = [&](const Vec& y) { return box.diamond_function(y); };
  auto gb = [&](const Vec& y) { return box.boundary_function(y); };
  integrate(field, x, 50.0 / box.lambda(), opt, [&](const DenseSegment& seg) {
    auto evd = find_events(seg, gd, 8);
    auto evb = find_events(seg, gb, 8);
    double t_exit = std::numeric_limits<double>::infinity();
    for (const auto& ev : evb)
      if (ev.direction > 0 && ev.t > 0) {
        t_exit = std::min(t_exit, ev.t);
      }
    for (const auto& ev : evd) {
      if (ev.t < t_exit) {
        hit = SectionHit{ev.t, ev.x};
        return false;
      }
    }
    if (t_exit < std::numeric_limits<double>::infinity()) {
      left = true;
      return false;
    }
    return true;
  });
  if (left) return std::nullopt;
  return hit;
}

}  // namespace

std::optional<ReturnTriple> find_return_point(const VectorFieldDef& field, const BoxNeighborhood& box, int n,
                                              const ReturnSearch& search) {
  if (search.budget <= 0) throw PreconditionError("return search budget must be positive");
  if (n < box.K()) throw PreconditionError("band " + std::to_string(n) + " is below K = " + std::to_string(box.K()));
  std::mt19937_64 rng(20240611u + static_cast<unsigned>(n));
  const double exit_horizon = 50.0 / box.lambda();
  for (int k = 0; k < search.budget; ++k) {
    const Vec q = diamond_seed(box, n, static_cast<unsigned>(k), rng);
    const int qn = band_index(box, q).n;
    if (std::abs(qn - n) > 1) continue;
    try {
      auto u = exit_time_forward(field, box, q, exit_horizon, search.tol);
      if (!u) continue;
      const Vec xe = flow(field, q, *u, search.tol);
      // outer excursion until the orbit enters the box again
      std::optional<double> back;
      Vec xr;
      IntegratorOptions opt;
      opt.tol = search.tol;
      auto gb = [&](const Vec& y) { return box.boundary_function(y); };
      integrate(field, xe, search.horizon, opt, [&](const DenseSegment& seg) {
        for (const auto& ev : find_events(seg, gb, 8)) {
          if (ev.direction < 0 && ev.t > 0) {
            back = ev.t;
            xr = ev.x;
            return false;
          }
        }
        return true;
      });
      if (!back) continue;
      auto hit = time_to_diamond(field, box, xr, search.tol);
      if (!hit) continue;
      const double rho = box.chart(hit->x).rho();
      if (!(rho < box.r())) continue;
      const int rn = band_index_of_radius(box, rho).n;
      if (std::abs(rn - n) > 1) continue;
      ReturnTriple tr;
      tr.q = q;
      tr.u = *u;
      tr.s = *u + *back;
      tr.s_section = tr.s + hit->t;
      tr.n = qn;
      tr.return_band = rn;
      tr.exit_point = xe;
      tr.reentry_point = xr;
      tr.section_point = hit->x;
      return tr;
    } catch (const IntegrationError&) {
      continue;  // escaping branch
    }
  }
  return std::nullopt;
}

double boundary_gauge_infimum(const BoxNeighborhood& box, const GaugeFunction& gauge, int samples) {
  if (samples < 2) throw PreconditionError("need at least two boundary samples");
  const Eigen::Index s = box.stable_frame().cols(), u = box.unstable_frame().cols();
  std::mt19937_64 rng(7);
  double best = std::numeric_limits<double>::infinity();
  const double r = box.r();
  for (int i = 0; i < samples; ++i) {
    const double a = -1.0 + 2.0 * i / (samples - 1);
    for (int side = 0; side < 2; ++side)
      for (int sign = -1; sign <= 1; sign += 2) {
        Vec ds, du;
        if (s == 1 && u == 1) {
          ds = Vec::Constant(1, 1.0);
          du = Vec::Constant(1, 1.0);
        } else {
          ds = random_unit(s, rng);
          du = random_unit(u, rng);
        }
        const Vec x = side == 0 ? box.from_chart(sign * r * ds, a * r * du) : box.from_chart(a * r * ds, sign * r * du);
        best = std::min(best, gauge(x));
      }
  }
  return best;
}

namespace {

Vec manifold_boundary_point(const VectorFieldDef& field, const BoxNeighborhood& box, int sign, double tol,
                            bool unstable) {
  if (sign != 1 && sign != -1) throw PreconditionError("branch sign must be +1 or -1");
  const Mat& frame = unstable ? box.unstable_frame() : box.stable_frame();
  if (frame.cols() == 0) throw PreconditionError("no such invariant direction");
  const double eta = box.r() * 1e-6;
  const Vec seed = box.sigma() + sign * eta * frame.col(0);
  const double horizon = 50.0 / box.lambda();
  auto t = unstable ? exit_time_forward(field, box, seed, horizon, tol) : exit_time_backward(field, box, seed, horizon, tol);
  if (!t) throw PreconditionError("manifold seed did not leave the box");
  return flow(field, seed, unstable ? *t : -*t, tol);
}

}  // namespace

Vec unstable_boundary_point(const VectorFieldDef& field, const BoxNeighborhood& box, int sign, double tol) {
  return manifold_boundary_point(field, box, sign, tol, true);
}

Vec stable_boundary_point(const VectorFieldDef& field, const BoxNeighborhood& box, int sign, double tol) {
  return manifold_boundary_point(field, box, sign, tol, false);
}

RescaledChain build_rescaled_chain(const VectorFieldDef& field, const BoxNeighborhood& box,
                                   const GaugeFunction& gauge, const RescaledChainOptions& opt) {
  const double d0 = boundary_gauge_infimum(box, gauge);
  if (!(d0 > 0)) throw PreconditionError("gauge vanishes on the box boundary");
  std::vector<Vec> wu, ws;
  for (int sign : {1, -1}) {
    if (box.unstable_frame().cols() >= 1) wu.push_back(unstable_boundary_point(field, box, sign));
    if (box.stable_frame().cols() >= 1) ws.push_back(stable_boundary_point(field, box, sign));
  }
  auto nearest = [&](const std::vector<Vec>& pts, const Vec& x) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
      if (field.distance(pts[i], x) < field.distance(pts[best], x)) best = i;
    return pts[best];
  };

  bool any_return = false;
  double best_required = std::numeric_limits<double>::infinity();
  for (int n = box.K(); n <= opt.max_band; ++n) {
    auto tr = find_return_point(field, box, n, opt.search);
    if (!tr) continue;
    any_return = true;
    const double transit = tr->s - tr->u;
    if (transit < 1.0) continue;
    const Vec x0p = nearest(wu, tr->exit_point);
    const Vec x2 = nearest(ws, tr->reentry_point);
    const Vec x0 = flow(field, x0p, -1.0, 1e-12);
    const double jin = field.distance(x0p, tr->exit_point);
    const double jout = field.distance(x2, tr->reentry_point);
    const double limit_in = std::min(d0, gauge(x0));
    const double limit_out = std::min(d0, gauge(tr->exit_point));
    best_required = std::min(best_required, std::max(jin, jout));
    // leave room for integration error in the two jumps
    if (jin > 0.9 * limit_in || jout > 0.9 * limit_out) continue;

    PseudoOrbit po;
    po.rule = JumpRule::Gauge;
    po.gauge = gauge;
    po.T = 1.0;
    const std::size_t L = opt.tail_length;
    Vec z = L > 0 ? flow(field, x0, -static_cast<double>(L), 1e-12) : x0;
    for (std::size_t k = 0; k <= L; ++k) {
      po.entries.push_back({z, 1.0});
      if (k < L) z = flow(field, z, 1.0, segment_tolerance(po, po.entries.size() - 1));
    }
    po.entries.push_back({tr->exit_point, transit});
    z = x2;
    for (std::size_t k = 0; k < std::max<std::size_t>(L, 1); ++k) {
      po.entries.push_back({z, 1.0});
      if (k + 1 < std::max<std::size_t>(L, 1)) z = flow(field, z, 1.0, segment_tolerance(po, po.entries.size() - 1));
    }
    const auto rep = validate(field, po);
    if (!rep.valid) continue;
    for (const auto& e : po.entries)
      if (gauge(e.x) <= 0) throw PreconditionError("rescaled chain produced a singular entry");
    RescaledChain out;
    out.orbit = std::move(po);
    out.triple = *tr;
    out.unstable_exit = x0p;
    out.stable_entry = x2;
    out.d0 = d0;
    out.jump_in = jin;
    out.jump_out = jout;
    return out;
  }
  if (!any_return) throw PreconditionError("no return point found in bands " + std::to_string(box.K()) + ".." +
                                           std::to_string(opt.max_band));
  throw PreconditionError("gauge too small for available returns: required jump " + fmt(best_required) +
                          ", available d0 = " + fmt(d0));
}

PseudoOrbit periodize(const VectorFieldDef& field, const PseudoOrbit& po, int copies) {
  if (copies < 1) throw PreconditionError("copies must be at least 1");
  if (po.entries.empty()) throw PreconditionError("pseudo-orbit has no entries");
  if (!po.finite) throw PreconditionError("periodize needs a finite chain");
  const std::size_t last = po.entries.size() - 1;
  const double tol = segment_tolerance(po, last);
  const Vec end = flow(field, po.entries[last].x, po.entries[last].t, tol);
  const double gap = field.distance(end, po.entries.front().x);
  if (gap > po.allowed_jump(last) + 10 * tol)
    throw PreconditionError("chain does not close: gap " + fmt(gap) + " exceeds " + fmt(po.allowed_jump(last)));
  PseudoOrbit out = po;
  out.entries.clear();
  out.tail_point_before.reset();
  out.tail_point_after.reset();
  out.tail_before = out.tail_after = 0;
  for (int c = 0; c < copies; ++c) out.entries.insert(out.entries.end(), po.entries.begin(), po.entries.end());
  const auto rep = validate(field, out);
  if (!rep.valid) throw PreconditionError("periodized chain fails validation at jump " + std::to_string(*rep.first_violation));
  return out;
}

}  // namespace orbitshade
