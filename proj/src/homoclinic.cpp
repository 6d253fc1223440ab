#include "orbitshade/homoclinic.hpp"

#include "orbitshade/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace orbitshade {

namespace {

double point_segment_distance(const Vec& x, const Vec& a, const Vec& b) {
  const Vec ab = b - a;
  const double L2 = ab.squaredNorm();
  if (L2 == 0.0) return (x - a).norm();
  const double s = std::clamp((x - a).dot(ab) / L2, 0.0, 1.0);
  return (x - (a + s * ab)).norm();
}

double to_polyline(const Vec& x, const std::vector<Vec>& poly) {
  if (poly.size() == 1) return (x - poly[0]).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < poly.size(); ++k) best = std::min(best, point_segment_distance(x, poly[k], poly[k + 1]));
  return best;
}

struct BranchRun {
  enum Phase { Inside, Outside, Contracting, Done };
  Phase phase = Inside;
  double t_exit = 0.0, t_re = 0.0, rho_re = 0.0, closeness = 0.0;
  Vec p;
  std::vector<Vec> samples;
  double next_sample = 0.0;
};

// Smallest |v^u| on [a, b] of a dense segment, sampled finely. Near a true
// loop it decays through the whole window; a near miss bottoms out around
// the diamond crossing and turns away.
double passage_min_nu(const BoxNeighborhood& box, const DenseSegment& seg, double a, double b) {
  double best = std::numeric_limits<double>::infinity();
  if (b < a) return best;
  constexpr int kSub = 32;
  for (int k = 0; k <= kSub; ++k) best = std::min(best, box.chart(seg.eval(a + (b - a) * k / kSub)).nu());
  return best;
}

}  // namespace

std::vector<Vec> unstable_branch_seeds(const HyperbolicityCertificate& cert, double eta, int ring_size) {
  if (!cert.hyperbolic || cert.unstable_index < 1 || cert.stable_index < 1)
    throw PreconditionError("unstable branch seeds need a hyperbolic saddle");
  if (!(eta > 0.0)) throw PreconditionError("seed offset must be positive");
  std::vector<Vec> out;
  const Mat& U = cert.unstable_frame;
  if (cert.unstable_index == 1) {
    out.push_back(cert.sigma + eta * U.col(0));
    out.push_back(cert.sigma - eta * U.col(0));
    return out;
  }
  for (int k = 0; k < ring_size; ++k) {
    const double a = 2.0 * M_PI * k / ring_size;
    out.push_back(cert.sigma + eta * (std::cos(a) * U.col(0) + std::sin(a) * U.col(1)));
  }
  return out;
}

namespace {
// seeds along the chart's unstable axes, so vs = 0 exactly
std::vector<Vec> chart_seeds(const BoxNeighborhood& box, double eta, int ring_size) {
  const auto& cert = box.cert();
  if (!cert.hyperbolic || cert.unstable_index < 1 || cert.stable_index < 1)
    throw PreconditionError("unstable branch seeds need a hyperbolic saddle");
  if (!(eta > 0.0)) throw PreconditionError("seed offset must be positive");
  const Vec vs = Vec::Zero(cert.stable_index);
  const int u = cert.unstable_index;
  std::vector<Vec> out;
  if (u == 1) {
    out.push_back(box.from_chart(vs, Vec::Constant(1, eta)));
    out.push_back(box.from_chart(vs, Vec::Constant(1, -eta)));
    return out;
  }
  for (int k = 0; k < ring_size; ++k) {
    const double a = 2.0 * M_PI * k / ring_size;
    Vec vu = Vec::Zero(u);
    vu[0] = eta * std::cos(a);
    vu[1] = eta * std::sin(a);
    out.push_back(box.from_chart(vs, vu));
  }
  return out;
}
}  // namespace

std::vector<Vec> unstable_branch_seeds(const BoxNeighborhood& box) { return chart_seeds(box, box.r() / 100.0, 8); }

std::vector<HomoclinicWitness> detect_homoclinic_loops(const VectorFieldDef& field, const BoxNeighborhood& box,
                                                       const LoopDetectionOptions& opt) {
  const auto& cert = box.cert();
  const double eta = opt.eta > 0 ? opt.eta : box.r() / 100.0;
  const double lambda = cert.spectral_gap;
  const double window = 5.0 / lambda;
  std::vector<Vec> seeds = chart_seeds(box, eta, opt.ring_size);
  const bool sphere = field.constraint() == Constraint::UnitSphere;
  std::vector<HomoclinicWitness> out;
  auto g = [&](const Vec& x) { return box.boundary_function(x); };

  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const Vec seed = sphere ? field.project(seeds[s]) : seeds[s];
    BranchRun run;
    run.samples.push_back(seed);
    run.next_sample = opt.polyline_dt;
    IntegratorOptions io;
    io.tol = opt.integration_tol;
    std::optional<HomoclinicWitness> found;
    auto observer = [&](const DenseSegment& seg) {
      while (run.next_sample <= seg.t1) {
        run.samples.push_back(seg.eval(run.next_sample));
        run.next_sample += opt.polyline_dt;
      }
      double scanned_from = seg.t0;
      for (const auto& ev : find_events(seg, g, 8)) {
        if (run.phase == BranchRun::Inside && ev.direction > 0) {
          run.phase = BranchRun::Outside;
          run.t_exit = ev.t;
          run.p = ev.x;
        } else if (run.phase == BranchRun::Outside && ev.direction < 0) {
          run.phase = BranchRun::Contracting;
          run.t_re = ev.t;
          run.rho_re = box.chart(ev.x).rho();
          run.closeness = box.chart(ev.x).nu();
          scanned_from = ev.t;
        } else if (run.phase == BranchRun::Contracting && ev.direction > 0) {
          run.phase = BranchRun::Outside;  // left before the window closed
        }
      }
      if (run.phase != BranchRun::Contracting) return true;
      const double t_end = run.t_re + window;
      run.closeness = std::min(run.closeness, passage_min_nu(box, seg, scanned_from, std::min(seg.t1, t_end)));
      if (seg.t1 < t_end) return true;
      const Vec end = seg.eval(t_end);
      if (run.closeness <= opt.tol && box.chart(end).rho() < run.rho_re) {
        HomoclinicWitness w;
        w.sigma = cert.sigma;
        w.p = run.p;
        w.branch = cert.unstable_index == 1 ? (s == 0 ? 1 : -1) : static_cast<int>(s) + 1;
        w.transit_time = run.t_re - run.t_exit;
        w.closeness = run.closeness;
        w.seed_eta = eta;
        w.polyline.push_back(cert.sigma);
        w.polyline.insert(w.polyline.end(), run.samples.begin(), run.samples.end());
        w.polyline.push_back(end);
        w.polyline.push_back(cert.sigma);
        found = std::move(w);
        run.phase = BranchRun::Done;
        return false;
      }
      run.phase = BranchRun::Outside;  // near miss; wait for the next exit and re-entry
      return true;
    };
    try {
      integrate(field, seed, opt.horizon, io, observer);
    } catch (const IntegrationError&) {
      // escaping branch: no loop on this side
    }
    if (found) {
      found->crossings = loop_crossing_count(field, *found, box);
      out.push_back(std::move(*found));
    }
  }
  return out;
}

double witness_audit(const VectorFieldDef& field, const HomoclinicWitness& w, const BoxNeighborhood& box,
                     double integration_tol) {
  const double window = 5.0 / box.lambda();
  IntegratorOptions io;
  io.tol = integration_tol;
  double best = std::numeric_limits<double>::infinity();
  integrate(field, w.p, w.transit_time + window, io, [&](const DenseSegment& seg) {
    if (seg.t1 >= w.transit_time) best = std::min(best, passage_min_nu(box, seg, std::max(seg.t0, w.transit_time), seg.t1));
    return true;
  });
  return best;
}

int loop_crossing_count(const VectorFieldDef& field, const HomoclinicWitness& w, const BoxNeighborhood& box) {
  const double slack = 5.0 / box.lambda();
  return crossing_count(field, box, w.p, slack, w.transit_time + slack, 8, 1e-11).count;
}

HLBoundReport hl_bound_report(const VectorFieldDef& field, const BoxNeighborhood& box,
                              const LoopDetectionOptions& opt) {
  HLBoundReport rep;
  const auto& cert = box.cert();
  rep.bound_applies = cert.unstable_index == 1;
  rep.branch_count = rep.bound_applies ? 2 : opt.ring_size;
  rep.witnesses = detect_homoclinic_loops(field, box, opt);
  rep.loops_found = static_cast<int>(rep.witnesses.size());
  for (const auto& w : rep.witnesses) rep.max_crossings = std::max(rep.max_crossings, w.crossings);
  return rep;
}

std::vector<SaddleLoops> detect_loops_in_region(const VectorFieldDef& field, const Region& region,
                                                const LoopDetectionOptions& opt, int grid_density) {
  std::vector<SaddleLoops> out;
  for (const auto& s : find_singularities(field, region, grid_density)) {
    HyperbolicityCertificate cert;
    try {
      cert = classify_singularity(field, s.location);
    } catch (const PreconditionError&) {
      continue;
    }
    if (!cert.hyperbolic || cert.stable_index < 1 || cert.unstable_index < 1) continue;
    const double r = default_box_radius(field, cert);
    try {
      const BoxNeighborhood box = make_box(field, s.location, cert, r);
      out.push_back({s.location, r, hl_bound_report(field, box, opt)});
    } catch (const PreconditionError&) {
      continue;
    }
  }
  return out;
}

double hausdorff_distance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  if (a.empty() || b.empty()) throw PreconditionError("hausdorff distance of an empty polyline");
  double h = 0.0;
  for (const Vec& x : a) h = std::max(h, to_polyline(x, b));
  for (const Vec& y : b) h = std::max(h, to_polyline(y, a));
  return h;
}

}  // namespace orbitshade
