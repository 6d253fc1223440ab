#include "orbitshade/shadowing.hpp"

#include "warp_impl.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace orbitshade {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool on_sphere(const VectorFieldDef& f) { return f.constraint() == Constraint::UnitSphere; }

double point_distance(const VectorFieldDef& f, const Vec& a, const Vec& b) {
  return on_sphere(f) ? f.distance(a, b) : (a - b).norm();
}

double ratio(double d, double e) {
  if (e > 0.0) return d / e;
  return d == 0.0 ? 0.0 : kInf;
}

std::pair<std::size_t, std::size_t> regular_range(const PseudoOrbit& po) {
  const std::size_t b = po.tail_point_before ? po.tail_before : 0;
  const std::size_t a = po.tail_point_after ? po.tail_after : 0;
  if (b + a >= po.size()) throw PreconditionError("pseudo-orbit has no entries outside its declared tails");
  return {b, po.size() - a};
}

double halton(std::uint64_t index, unsigned base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

// Halton point of the cube [-1,1]^d pushed radially onto the unit ball.
Vec halton_ball(std::uint64_t index, std::size_t d) {
  Vec u(static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < d; ++k) u[static_cast<Eigen::Index>(k)] = 2.0 * halton(index, kPrimes[k % 12]) - 1.0;
  const double n2 = u.norm();
  if (n2 == 0.0) return u;
  return u * (u.cwiseAbs().maxCoeff() / n2);
}

double hermite_component(double p0, double p1, double m0, double m1, double u) {
  const double u2 = u * u, u3 = u2 * u;
  return (2 * u3 - 3 * u2 + 1) * p0 + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * p1 + (u3 - u2) * m1;
}

// Candidate orbit sampled on a uniform grid, with field values for Hermite interpolation.
struct SampledCandidate {
  std::vector<Vec> x;
  std::vector<Vec> f;
  double dt = 0.0;

  Vec at(const VectorFieldDef& field, double t) const {
    const double s = t / dt;
    long j = static_cast<long>(std::floor(s));
    j = std::clamp(j, 0L, static_cast<long>(x.size()) - 2);
    const double u = s - static_cast<double>(j);
    const auto a = static_cast<std::size_t>(j);
    Vec out(x[a].size());
    for (Eigen::Index k = 0; k < out.size(); ++k)
      out[k] = hermite_component(x[a][k], x[a + 1][k], f[a][k] * dt, f[a + 1][k] * dt, u);
    return on_sphere(field) ? field.project(out) : out;
  }
};

struct Evaluation {
  double score = kInf;
  double h_end = 0.0;
  bool ok = false;
};

class Problem {
 public:
  Problem(const VectorFieldDef& field, const PseudoOrbit& po, const ShadowRule& rule, const SearchOptions& search)
      : field_(field), po_(po), rule_(rule), search_(search), set_(shadow_settings(field, po, search)) {
    if (rule_.kind == ShadowRuleKind::Rescaled && !rule_.gauge)
      throw PreconditionError("rescaled rule needs a gauge function");
    if (rule_.kind == ShadowRuleKind::Strong) slope_run_length(rule_.slope_eps);
    ref_ = reference_path(field, po, set_);
    n_ = static_cast<long>(ref_.size());
    w_ = static_cast<long>(std::ceil(set_.band_time / set_.dt));
    L_ = set_.tail_before || set_.tail_after ? static_cast<long>(std::ceil(set_.tail_horizon / set_.dt)) : 0;
    if (rule_.kind == ShadowRuleKind::Rescaled) {
      for (const Vec& r : ref_) inv_gauge_.push_back(1.0 / (*rule_.gauge)(r));
      if (po.tail_point_before) e_before_ = (*rule_.gauge)(*po.tail_point_before);
      if (po.tail_point_after) e_after_ = (*rule_.gauge)(*po.tail_point_after);
    }
    m_dp_ = n_ + w_;
    m_total_ = m_dp_ + L_ + 2;
    y0_ = po.entries[regular_range(po).first].x;
  }

  const ShadowSettings& settings() const { return set_; }
  const Vec& y0() const { return y0_; }
  long reference_size() const { return n_; }

  // cost space: squared distance (or squared chord on the sphere, squared ratio when rescaled)
  double to_cost(double v) const {
    if (rule_.kind != ShadowRuleKind::Rescaled && on_sphere(field_)) {
      const double c = 2.0 * std::sin(std::min(v, M_PI) / 2.0);
      return c * c;
    }
    return v * v;
  }
  double from_cost(double c) const {
    if (!std::isfinite(c)) return kInf;
    if (rule_.kind != ShadowRuleKind::Rescaled && on_sphere(field_)) return 2.0 * std::asin(std::min(1.0, std::sqrt(c) / 2.0));
    return std::sqrt(c);
  }

  // rule value of a reference sample against a candidate point
  double value(long i, const Vec& c) const {
    const double d = point_distance(field_, ref_[static_cast<std::size_t>(i)], c);
    if (rule_.kind == ShadowRuleKind::Rescaled) return d * inv_gauge_[static_cast<std::size_t>(i)];
    return d;
  }
  double tail_value(const Vec& c, bool before) const {
    const Vec& p = before ? *po_.tail_point_before : *po_.tail_point_after;
    const double d = point_distance(field_, p, c);
    if (rule_.kind == ShadowRuleKind::Rescaled) return ratio(d, before ? e_before_ : e_after_);
    return d;
  }

  double backward_stay(const Vec& y) const {
    if (!set_.tail_before) return 0.0;
    std::vector<double> times;
    for (long k = 0; k <= L_; ++k) times.push_back(-static_cast<double>(k) * set_.dt);
    double worst = 0.0;
    for (const Vec& p : sample_orbit(field_, y, times, set_.tol)) worst = std::max(worst, tail_value(p, true));
    return worst;
  }

  SampledCandidate sample(const Vec& y) const {
    SampledCandidate c;
    c.dt = set_.dt;
    std::vector<double> times(static_cast<std::size_t>(m_total_));
    for (long j = 0; j < m_total_; ++j) times[static_cast<std::size_t>(j)] = static_cast<double>(j) * set_.dt;
    c.x = sample_orbit(field_, y, times, set_.tol, true);
    if (c.x.size() < 2) throw IntegrationError("candidate fails immediately", 0.0);
    c.f.reserve(c.x.size());
    for (const Vec& p : c.x) c.f.push_back(field_.evaluate(p));
    return c;
  }

  // forward stay penalty (cost space) for ending the match at candidate index j
  // (+inf where the window runs past the samples of an escaping candidate)
  std::vector<double> end_penalty(const SampledCandidate& c, long m) const {
    const long avail = static_cast<long>(c.x.size());
    std::vector<double> stay(static_cast<std::size_t>(avail));
    for (long k = 0; k < avail; ++k) stay[static_cast<std::size_t>(k)] = to_cost(tail_value(c.x[static_cast<std::size_t>(k)], false));
    std::vector<double> pen(static_cast<std::size_t>(m));
    std::deque<long> dq;  // sliding window max over [j, j + L]
    long next = 0;
    for (long j = 0; j < m; ++j) {
      if (j + L_ >= avail) {
        pen[static_cast<std::size_t>(j)] = kInf;
        continue;
      }
      while (next <= j + L_) {
        while (!dq.empty() && stay[static_cast<std::size_t>(dq.back())] <= stay[static_cast<std::size_t>(next)]) dq.pop_back();
        dq.push_back(next++);
      }
      while (dq.front() < j) dq.pop_front();
      pen[static_cast<std::size_t>(j)] = stay[static_cast<std::size_t>(dq.front())];
    }
    return pen;
  }

  WarpOptions warp_options(double abandon) const {
    WarpOptions o;
    o.open_end = true;
    o.abandon_above = abandon;
    if (rule_.kind == ShadowRuleKind::Strong) {
      o.constraint = WarpConstraint::Slope;
      o.eps = rule_.slope_eps;
      o.band = std::min(w_, n_ / slope_run_length(rule_.slope_eps) + 2);
    } else {
      o.band = w_;
    }
    return o;
  }

  WarpPath match(const SampledCandidate& c, double abandon_cost, bool keep_path) const {
    const long m = std::min(m_dp_, static_cast<long>(c.x.size()));
    if (m < n_ - w_) return WarpPath{kInf, {}, true};  // escaped before the band reaches the last row
    std::vector<double> pen;
    if (set_.tail_after) pen = end_penalty(c, m);
    const WarpOptions o = warp_options(abandon_cost);
    if (rule_.kind == ShadowRuleKind::Rescaled) {
      auto cost = [&](long i, long j) {
        const double r = value(i, c.x[static_cast<std::size_t>(j)]);
        return r * r;
      };
      return detail::run_warp(n_, m, cost, o, set_.tail_after ? &pen : nullptr, keep_path);
    }
    auto cost = [&](long i, long j) {
      return (ref_[static_cast<std::size_t>(i)] - c.x[static_cast<std::size_t>(j)]).squaredNorm();
    };
    return detail::run_warp(n_, m, cost, o, set_.tail_after ? &pen : nullptr, keep_path);
  }

  Evaluation evaluate(const Vec& y_in, double abandon) const {
    Evaluation ev;
    const Vec y = on_sphere(field_) ? field_.project(y_in) : y_in;
    try {
      const double back = backward_stay(y);
      if (back > abandon) return ev;
      const SampledCandidate c = sample(y);
      const WarpPath p = match(c, std::isfinite(abandon) ? to_cost(abandon) : kInf, false);
      if (p.abandoned || !std::isfinite(p.cost)) return ev;
      ev.score = std::max(back, from_cost(p.cost));
      ev.ok = true;
    } catch (const IntegrationError&) {
    } catch (const FieldError&) {
    }
    return ev;
  }

  struct Detail {
    Reparametrization warp;
    double score = kInf;
    double achieved = kInf;
    double h_end = 0.0;
  };

  Detail detail(const Vec& y) const {
    Detail d;
    const double back = backward_stay(y);
    const SampledCandidate c = sample(y);
    const WarpPath p = match(c, kInf, true);
    d.score = std::max(back, from_cost(p.cost));
    if (rule_.kind == ShadowRuleKind::Strong) {
      d.warp = reparametrization_from_path(p.path, set_.dt, rule_.slope_eps);
    } else {
      auto cost = [&](long i, long j) { return value(i, c.x[static_cast<std::size_t>(j)]); };
      d.warp = reparametrization_from_matches(row_matches(p.path, cost), set_.dt);
    }
    d.h_end = d.warp(set_.span);
    double a = back;
    for (long i = 0; i < n_; ++i) a = std::max(a, value(i, c.at(field_, d.warp(static_cast<double>(i) * set_.dt))));
    if (set_.tail_after)
      for (long k = 0; k <= L_; ++k)
        a = std::max(a, tail_value(c.at(field_, d.h_end + static_cast<double>(k) * set_.dt), false));
    d.achieved = a;
    return d;
  }

 private:
  const VectorFieldDef& field_;
  const PseudoOrbit& po_;
  const ShadowRule& rule_;
  SearchOptions search_;
  ShadowSettings set_;
  std::vector<Vec> ref_;
  std::vector<double> inv_gauge_;
  double e_before_ = 0.0, e_after_ = 0.0;
  long n_ = 0, w_ = 0, L_ = 0, m_dp_ = 0, m_total_ = 0;
  Vec y0_;
};

// Points of the numerical unstable manifold of the leading tail point at
// distances around |y0 - sigma|, on the branch closest to y0.
std::vector<Vec> unstable_manifold_seeds(const VectorFieldDef& field, const Vec& sigma, const Vec& y0, double tol) {
  std::vector<Vec> out;
  HyperbolicityCertificate cert;
  try {
    cert = classify_singularity(field, sigma);
  } catch (const Error&) {
    return out;
  }
  if (!cert.hyperbolic || cert.unstable_index != 1 || cert.stable_index < 1) return out;
  const double rho0 = point_distance(field, y0, sigma);
  if (!(rho0 > 0.0)) return out;
  const Vec eu = cert.unstable_frame.col(0);
  const double eta = std::min(1e-10, rho0 * 1e-6);
  const double lambda_u = cert.spectral_gap > 0 ? cert.spectral_gap : 1.0;
  std::vector<double> radii;
  for (int k = -4; k <= 4; ++k) radii.push_back(rho0 * std::pow(2.0, 0.5 * k));
  std::vector<std::vector<Vec>> branches;
  for (int sgn : {1, -1}) {
    Vec start = sigma + static_cast<double>(sgn) * eta * eu;
    if (on_sphere(field)) start = field.project(start);
    std::vector<Vec> pts;
    std::size_t next = 0;
    IntegratorOptions io;
    io.tol = tol;
    auto g = [&](const Vec& x) { return point_distance(field, x, sigma) - radii[next]; };
    try {
      integrate(field, start, 40.0 / lambda_u + std::log(radii.back() / eta) / lambda_u * 4.0, io,
                [&](const DenseSegment& seg) {
                  while (next < radii.size()) {
                    auto ev = find_events(seg, g, 8);
                    auto it = std::find_if(ev.begin(), ev.end(), [](const EventCrossing& e) { return e.direction > 0; });
                    if (it == ev.end()) break;
                    pts.push_back(it->x);
                    ++next;
                  }
                  return next < radii.size();
                });
    } catch (const IntegrationError&) {
    }
    branches.push_back(std::move(pts));
  }
  const auto& a = branches[0];
  const auto& b = branches[1];
  auto closest = [&](const std::vector<Vec>& pts) {
    double best = kInf;
    for (const Vec& p : pts) best = std::min(best, point_distance(field, p, y0));
    return best;
  };
  const auto& chosen = closest(a) <= closest(b) ? a : b;
  out.assign(chosen.begin(), chosen.end());
  return out;
}

struct Search {
  const VectorFieldDef& field;
  const Problem& prob;
  const SearchOptions& opt;
  double threshold;  // early stop once a candidate reaches it
  int spent = 0;
  Vec best_y;
  double best = kInf;
  bool done = false;

  bool exhausted() const { return done || spent >= opt.budget; }

  double eval(const Vec& y, double abandon) {
    if (exhausted()) return kInf;
    ++spent;
    const Evaluation e = prob.evaluate(y, abandon);
    if (e.ok && e.score < best) {
      best = e.score;
      best_y = on_sphere(field) ? field.project(y) : y;
    }
    if (best <= threshold) done = true;
    return e.score;
  }

  Vec proj(const Vec& y) const { return on_sphere(field) ? field.project(y) : y; }

  // Nelder-Mead on the initial point.
  std::pair<Vec, double> refine(const Vec& start, double f0, double h) {
    const auto d = static_cast<Eigen::Index>(start.size());
    std::vector<Vec> xs{start};
    std::vector<double> fs{f0};
    for (Eigen::Index k = 0; k < d && !exhausted(); ++k) {
      Vec v = start;
      v[k] += h;
      v = proj(v);
      xs.push_back(v);
      fs.push_back(eval(v, kInf));
    }
    if (static_cast<Eigen::Index>(xs.size()) < d + 1) return {start, f0};
    std::vector<std::size_t> idx(xs.size());
    for (int it = 0; it < opt.refine_iters && !exhausted(); ++it) {
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
      const std::size_t ib = idx.front(), iw = idx.back(), is = idx[idx.size() - 2];
      double size = 0.0;
      for (const Vec& x : xs) size = std::max(size, (x - xs[ib]).norm());
      if (size < 1e-15 * (1.0 + xs[ib].norm())) break;
      Vec c = Vec::Zero(d);
      for (std::size_t k = 0; k + 1 < idx.size(); ++k) c += xs[idx[k]];
      c /= static_cast<double>(d);
      const Vec xr = proj(c + (c - xs[iw]));
      const double fr = eval(xr, fs[iw]);
      if (fr < fs[ib]) {
        const Vec xe = proj(c + 2.0 * (c - xs[iw]));
        const double fe = eval(xe, fr);
        if (fe < fr) {
          xs[iw] = xe;
          fs[iw] = fe;
        } else {
          xs[iw] = xr;
          fs[iw] = fr;
        }
        continue;
      }
      if (fr < fs[is]) {
        xs[iw] = xr;
        fs[iw] = fr;
        continue;
      }
      const bool outside = fr < fs[iw];
      const Vec xc = proj(outside ? Vec(c + 0.5 * (xr - c)) : Vec(c + 0.5 * (xs[iw] - c)));
      const double fc = eval(xc, outside ? fr : fs[iw]);
      if (fc < (outside ? fr : fs[iw])) {
        xs[iw] = xc;
        fs[iw] = fc;
        continue;
      }
      for (std::size_t k = 0; k < xs.size() && !exhausted(); ++k) {
        if (k == ib) continue;
        xs[k] = proj(xs[ib] + 0.5 * (xs[k] - xs[ib]));
        fs[k] = eval(xs[k], kInf);
      }
    }
    std::size_t ib = 0;
    for (std::size_t k = 1; k < xs.size(); ++k)
      if (fs[k] < fs[ib]) ib = k;
    return {xs[ib], fs[ib]};
  }
};

ShadowingResult run(const VectorFieldDef& field, const PseudoOrbit& po, double epsilon, const ShadowRule& rule,
                    const SearchOptions& search, bool estimate) {
  if (search.budget <= 0) throw PreconditionError("shadow search budget must be positive");
  if (!estimate && rule.kind != ShadowRuleKind::Rescaled && !(epsilon > 0.0))
    throw PreconditionError("shadow search needs epsilon > 0");
  const ValidationReport rep = validate(field, po);
  if (!rep.valid) throw PreconditionError("shadow search needs a valid pseudo-orbit");

  Problem prob(field, po, rule, search);
  const double threshold = estimate ? -kInf : (rule.kind == ShadowRuleKind::Rescaled ? 1.0 : epsilon);
  const double radius = search.seed_radius > 0 ? search.seed_radius
                        : (!estimate && rule.kind != ShadowRuleKind::Rescaled ? epsilon : 0.01);
  Search s{field, prob, search, threshold, 0, Vec(), kInf, false};

  // seeds: x0, manifold seeds, Halton points in the ball
  std::vector<Vec> seeds{prob.y0()};
  if (search.manifold_seeds && po.tail_point_before && prob.settings().tail_before)
    for (const Vec& p : unstable_manifold_seeds(field, *po.tail_point_before, prob.y0(), prob.settings().tol))
      seeds.push_back(p);
  for (int k = 0; k < search.seed_count; ++k) {
    Vec p = prob.y0() + radius * halton_ball(search.seed + static_cast<std::uint64_t>(k) + 1, prob.y0().size());
    seeds.push_back(on_sphere(field) ? field.project(p) : p);
  }
  const std::size_t keep = static_cast<std::size_t>(std::max(1, search.refine_starts));
  std::vector<std::pair<double, std::size_t>> ranked;  // (score, seed index)
  for (std::size_t k = 0; k < seeds.size() && !s.exhausted(); ++k) {
    const double abandon = ranked.size() < keep ? kInf : ranked[keep - 1].first;
    const double f = s.eval(seeds[k], abandon);
    ranked.push_back({f, k});
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
  }

  ShadowingResult res;
  std::vector<std::pair<Vec, double>> refined;
  for (std::size_t r = 0; r < std::min(keep, ranked.size()) && !s.exhausted(); ++r) {
    if (!std::isfinite(ranked[r].first)) break;
    refined.push_back(s.refine(seeds[ranked[r].second], ranked[r].first, 0.25 * radius));
  }

  res.budget_spent = s.spent;
  res.settings = prob.settings();
  res.epsilon = estimate ? kInf : threshold;
  res.rule = rule.name();
  if (!std::isfinite(s.best)) {
    res.status = estimate ? ShadowStatus::Estimate : ShadowStatus::NotFound;
    res.witness_y = prob.y0();
    res.achieved = kInf;
    res.score = kInf;
    return res;
  }
  const Problem::Detail det = prob.detail(s.best_y);
  res.witness_y = s.best_y;
  res.warp = det.warp;
  res.score = det.score;
  res.achieved = det.achieved;
  if (estimate)
    res.status = ShadowStatus::Estimate;
  else
    res.status = res.achieved <= threshold ? ShadowStatus::Found : ShadowStatus::NotFound;

  const ShadowSettings& st = prob.settings();
  auto crossings = [&](const Vec& y, double h_end) -> std::optional<int> {
    if (!search.box) return std::nullopt;
    try {
      return crossing_count(field, *search.box, y, st.tail_before ? st.tail_horizon : 0.0,
                            h_end + (st.tail_after ? st.tail_horizon : 0.0), 8, st.tol)
          .count;
    } catch (const IntegrationError&) {
      return std::nullopt;
    }
  };
  res.crossing_count_of_witness = crossings(res.witness_y, det.h_end);
  for (auto& [y, f] : refined) {
    ShadowCandidate c;
    c.y = y;
    c.score = f;
    if (std::isfinite(f)) {
      const Problem::Detail d = prob.detail(y);
      c.h_end = d.h_end;
      c.crossing_count = crossings(y, d.h_end);
    }
    res.refined.push_back(std::move(c));
  }
  return res;
}

}  // namespace

std::string ShadowRule::name() const {
  switch (kind) {
    case ShadowRuleKind::Plain:
      return "plain";
    case ShadowRuleKind::Strong:
      return "strong";
    case ShadowRuleKind::Rescaled:
      return "rescaled";
  }
  return "plain";
}

std::string ShadowingResult::status_name() const {
  switch (status) {
    case ShadowStatus::Found:
      return "found";
    case ShadowStatus::NotFound:
      return "not-found-within-budget";
    case ShadowStatus::Estimate:
      return "estimate";
  }
  return "";
}

std::vector<Vec> sample_orbit(const VectorFieldDef& field, const Vec& x, const std::vector<double>& times,
                              double tol, bool partial) {
  std::vector<Vec> out;
  if (times.empty()) return out;
  out.reserve(times.size());
  const double T = times.back();
  std::size_t k = 0;
  while (k < times.size() && times[k] == 0.0) {
    out.push_back(x);
    ++k;
  }
  if (k == times.size()) return out;
  const bool fwd = T > 0;
  IntegratorOptions io;
  io.tol = tol;
  FlowResult fr;
  try {
    fr = integrate(field, x, T, io, [&](const DenseSegment& seg) {
      while (k < times.size() && (fwd ? times[k] <= seg.t1 : times[k] >= seg.t1)) out.push_back(seg.eval(times[k++]));
      return true;
    });
  } catch (const IntegrationError&) {
    if (!partial) throw;
    return out;
  }
  while (k < times.size()) {
    out.push_back(fr.state);
    ++k;
  }
  return out;
}

ShadowSettings shadow_settings(const VectorFieldDef& field, const PseudoOrbit& po, const SearchOptions& search) {
  ShadowSettings s;
  const auto [b, e] = regular_range(po);
  double tmin = kInf;
  for (const auto& en : po.entries) tmin = std::min(tmin, en.t);
  double dt = std::min(0.01, tmin / 50.0);
  double span = 0.0;
  for (std::size_t i = b; i < e; ++i) span += po.entries[i].t;
  s.samples = static_cast<long>(std::ceil(span / dt - 1e-9)) + 1;
  s.dt = span / static_cast<double>(s.samples - 1);
  s.span = span;
  s.tail_before = po.tail_point_before.has_value() && b > 0;
  s.tail_after = po.tail_point_after.has_value() && e < po.size();
  const bool tails = s.tail_before || s.tail_after;
  s.tol = tails ? std::min(search.tol, search.tail_tol) : search.tol;
  double H = search.tail_horizon;
  if (!(H > 0)) {
    H = 20.0;
    if (tails) {
      const Vec& p = s.tail_before ? *po.tail_point_before : *po.tail_point_after;
      try {
        const auto cert = classify_singularity(field, p);
        if (cert.hyperbolic && cert.spectral_gap > 0) H = 20.0 / cert.spectral_gap;
      } catch (const Error&) {
      }
    }
  }
  s.tail_horizon = H;
  s.band_time = search.band_time > 0 ? search.band_time : std::max(20.0, H);
  return s;
}

std::vector<Vec> reference_path(const VectorFieldDef& field, const PseudoOrbit& po, const ShadowSettings& st) {
  const auto [b, e] = regular_range(po);
  std::vector<Vec> ref;
  ref.reserve(static_cast<std::size_t>(st.samples));
  double s0 = 0.0;
  long k = 0;
  for (std::size_t i = b; i < e; ++i) {
    const double s1 = s0 + po.entries[i].t;
    const bool last = i + 1 == e;
    std::vector<double> times;
    for (; k < st.samples; ++k) {
      const double t = static_cast<double>(k) * st.dt;
      if (!last && t >= s1) break;
      times.push_back(std::min(t - s0, po.entries[i].t));
    }
    const auto pts = sample_orbit(field, po.entries[i].x, times, segment_tolerance(po, i));
    ref.insert(ref.end(), pts.begin(), pts.end());
    s0 = s1;
  }
  return ref;
}

ShadowingResult shadow_search(const VectorFieldDef& field, const PseudoOrbit& po, double epsilon,
                              const ShadowRule& rule, const SearchOptions& search) {
  return run(field, po, epsilon, rule, search, false);
}

ShadowingResult shadowing_distance_estimate(const VectorFieldDef& field, const PseudoOrbit& po,
                                            const ShadowRule& rule, const SearchOptions& search) {
  return run(field, po, 0.0, rule, search, true);
}

double verify_shadow(const VectorFieldDef& field, const Vec& y, const Reparametrization& warp, const PseudoOrbit& po,
                     const ShadowRule& rule, const ShadowSettings& st) {
  if (!warp.valid()) throw PreconditionError("verify_shadow: warp is not strictly increasing from (0,0)");
  if (rule.kind == ShadowRuleKind::Strong && !warp.satisfies_slope(rule.slope_eps))
    throw PreconditionError("verify_shadow: warp violates the slope constraint");
  if (rule.kind == ShadowRuleKind::Rescaled && !rule.gauge)
    throw PreconditionError("verify_shadow: rescaled rule needs a gauge function");
  const std::vector<Vec> ref = reference_path(field, po, st);
  const long L = st.tail_before || st.tail_after ? static_cast<long>(std::ceil(st.tail_horizon / st.dt)) : 0;

  auto measure = [&](const Vec& p, const Vec& c) {
    const double d = point_distance(field, p, c);
    return rule.kind == ShadowRuleKind::Rescaled ? ratio(d, (*rule.gauge)(p)) : d;
  };

  // forward times: h(t_i) then the trailing stay
  std::vector<double> times;
  for (std::size_t i = 0; i < ref.size(); ++i) times.push_back(warp(static_cast<double>(i) * st.dt));
  const double h_end = warp(st.span);
  const std::size_t n_ref = times.size();
  if (st.tail_after)
    for (long k = 0; k <= L; ++k) times.push_back(h_end + static_cast<double>(k) * st.dt);
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  std::vector<double> sorted;
  for (std::size_t k : order) sorted.push_back(times[k]);
  const std::vector<Vec> pts = sample_orbit(field, y, sorted, st.tol);

  double worst = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t id = order[k];
    if (id < n_ref)
      worst = std::max(worst, measure(ref[id], pts[k]));
    else
      worst = std::max(worst, measure(*po.tail_point_after, pts[k]));
  }
  if (st.tail_before) {
    std::vector<double> back;
    for (long k = 0; k <= L; ++k) back.push_back(-static_cast<double>(k) * st.dt);
    for (const Vec& p : sample_orbit(field, y, back, st.tol)) worst = std::max(worst, measure(*po.tail_point_before, p));
  }
  return worst;
}

}  // namespace orbitshade
