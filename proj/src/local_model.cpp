#include "orbitshade/local_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace orbitshade {

BoxNeighborhood::BoxNeighborhood(Vec sigma, HyperbolicityCertificate cert, double r, Mat stable_frame,
                                 Mat unstable_frame)
    : sigma_(std::move(sigma)), cert_(std::move(cert)), r_(r), es_(std::move(stable_frame)), eu_(std::move(unstable_frame)) {
  if (!(r_ > 0)) throw PreconditionError("box radius must be positive");
  Mat both(es_.rows(), es_.cols() + eu_.cols());
  both << es_, eu_;
  pinv_ = both.completeOrthogonalDecomposition().pseudoInverse();
}

ChartPoint BoxNeighborhood::chart(const Vec& x) const {
  const Vec c = pinv_ * (x - sigma_);
  return {c.head(es_.cols()), c.tail(eu_.cols())};
}

Vec BoxNeighborhood::from_chart(const Vec& vs, const Vec& vu) const { return sigma_ + es_ * vs + eu_ * vu; }

bool BoxNeighborhood::contains(const Vec& x) const {
  const auto c = chart(x);
  return c.ns() <= r_ && c.nu() <= r_;
}

double BoxNeighborhood::boundary_function(const Vec& x) const { return chart(x).rho() - r_; }

double BoxNeighborhood::diamond_function(const Vec& x) const {
  const auto c = chart(x);
  return c.ns() - c.nu();
}

double BoxNeighborhood::radial_rate(const VectorFieldDef& field, const Vec& x) const {
  const auto c = chart(x);
  const Vec fc = pinv_ * field.evaluate(x);
  const Vec fs = fc.head(es_.cols()), fu = fc.tail(eu_.cols());
  if (c.ns() >= c.nu()) return c.ns() > 0 ? c.vs.dot(fs) / c.ns() : fs.norm();
  return c.vu.dot(fu) / c.nu();
}

int BoxNeighborhood::K() const {
  // smallest integer K with exp(-K) < r
  int k = static_cast<int>(std::floor(-std::log(r_))) + 1;
  while (k > -1000 && std::exp(-(k - 1)) < r_) --k;
  while (!(std::exp(-k) < r_)) ++k;
  return k;
}

namespace {

std::string describe(const Vec& x) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

std::optional<double> exit_time(const VectorFieldDef& field, const BoxNeighborhood& box, const Vec& x,
                                double horizon, double tol, double dir) {
  if (!(horizon > 0)) throw PreconditionError("exit horizon must be positive");
  const double g0 = box.boundary_function(x);
  if (g0 > 1e-12 * box.r()) throw PreconditionError("point " + describe(x) + " is outside the box");
  if (field.evaluate(x).norm() == 0.0) return std::nullopt;
  if (g0 >= -1e-12 * box.r() && dir * box.radial_rate(field, x) > 0) return 0.0;
  std::optional<double> hit;
  IntegratorOptions opt;
  opt.tol = tol;
  auto g = [&](const Vec& y) { return box.boundary_function(y); };
  integrate(field, x, dir * horizon, opt, [&](const DenseSegment& seg) {
    for (const auto& ev : find_events(seg, g, 8)) {
      if (ev.direction > 0) {
        hit = std::fabs(ev.t);
        return false;
      }
    }
    return true;
  });
  return hit;
}

struct ArcSample {
  double t;
  Vec x;
};

// Samples of the orbit through x while it stays in the box, in time order.
std::vector<ArcSample> in_box_arc(const VectorFieldDef& field, const BoxNeighborhood& box, const Vec& x, double tol,
                                  int per_step = 16) {
  const double horizon = 50.0 / box.lambda();
  std::vector<ArcSample> back, fwd;
  IntegratorOptions opt;
  opt.tol = tol;
  opt.max_step = 0.05;
  for (double dir : {-1.0, 1.0}) {
    auto& out = dir < 0 ? back : fwd;
    integrate(field, x, dir * horizon, opt, [&](const DenseSegment& seg) {
      for (int k = 1; k <= per_step; ++k) {
        const double th = static_cast<double>(k) / per_step;
        Vec y = seg.at_theta(th);
        if (box.boundary_function(y) > 0) return false;
        out.push_back({seg.t0 + th * (seg.t1 - seg.t0), std::move(y)});
      }
      return true;
    });
  }
  std::vector<ArcSample> arc(back.rbegin(), back.rend());
  arc.push_back({0.0, x});
  arc.insert(arc.end(), fwd.begin(), fwd.end());
  return arc;
}

}  // namespace

BoxNeighborhood make_box_with_frames(const Vec& sigma, const HyperbolicityCertificate& cert, double r,
                                     const Mat& stable_frame, const Mat& unstable_frame) {
  return BoxNeighborhood(sigma, cert, r, stable_frame, unstable_frame);
}

BoxNeighborhood make_box(const VectorFieldDef& field, const Vec& sigma, const HyperbolicityCertificate& cert,
                         double r, const BoxOptions& opt) {
  if (!cert.hyperbolic) throw PreconditionError("box neighborhoods need a hyperbolic singularity");
  if (cert.stable_index == 0 || cert.unstable_index == 0)
    throw PreconditionError("box neighborhoods need a saddle (both E^s and E^u nontrivial)");
  BoxNeighborhood box(sigma, cert, r, cert.stable_frame, cert.unstable_frame);

  if (opt.check_uniqueness) {
    const auto n = sigma.size();
    Region hull{Vec(n), Vec(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = r * (cert.stable_frame.row(i).norm() + cert.unstable_frame.row(i).norm());
      hull.lo[i] = sigma[i] - w;
      hull.hi[i] = sigma[i] + w;
    }
    for (const auto& s : find_singularities(field, hull, opt.uniqueness_grid)) {
      if ((s.location - sigma).norm() > 1e-6 && box.contains(s.location))
        throw PreconditionError("another singularity " + describe(s.location) + " lies inside the box of radius " +
                                std::to_string(r));
    }
  }

  if (opt.check_exits) {
    const double horizon = 50.0 / cert.spectral_gap;
    const auto ns = cert.stable_frame.cols(), nu = cert.unstable_frame.cols();
    for (int k = 1; k <= 3; ++k) {
      const double a = r * k / 4.0;
      for (Eigen::Index i = 0; i < ns; ++i)
        for (Eigen::Index j = 0; j < nu; ++j)
          for (double si : {1.0, -1.0})
            for (double sj : {1.0, -1.0}) {
              Vec vs = Vec::Zero(ns), vu = Vec::Zero(nu);
              vs[i] = si * a;
              vu[j] = sj * a;
              const Vec x = field.project(box.from_chart(vs, vu));
              if (!box.contains(x)) continue;
              if (!exit_time_forward(field, box, x, horizon, opt.tol) &&
                  !exit_time_backward(field, box, x, horizon, opt.tol))
                throw PreconditionError("sample point " + describe(x) + " does not leave the box within 50/lambda; "
                                        "shrink r");
            }
    }
  }
  return box;
}

double default_box_radius(const VectorFieldDef& field, const HyperbolicityCertificate& cert) {
  const Vec& s = cert.sigma;
  const auto n = s.size();
  const Mat j0 = field.jacobian(s);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  double l2 = 0.0;
  for (int k = 0; k < 64; ++k) {
    Vec d(n);
    for (auto& c : d) c = g(rng);
    d.normalize();
    for (double rho : {0.05, 0.1, 0.2}) {
      const Vec x = field.project(s + rho * d);
      const double dist = (x - s).norm();
      if (dist == 0) continue;
      l2 = std::max(l2, (field.jacobian(x) - j0).norm() / dist);
    }
  }
  if (l2 == 0.0) return 0.2;
  return std::min(0.2, cert.spectral_gap / (10.0 * l2));
}

bool diamond_membership(const BoxNeighborhood& box, const Vec& x, double tol) {
  const auto c = box.chart(x);
  return std::fabs(c.ns() - c.nu()) <= tol * std::max({c.ns(), c.nu(), 1e-300});
}

BandIndex band_index_of_radius(const BoxNeighborhood& box, double rho) {
  const int K = box.K();
  if (!(rho > 0)) throw PreconditionError("band index needs a regular point (rho > 0)");
  if (!(rho < std::exp(-K)))
    throw PreconditionError("chart radius " + std::to_string(rho) + " is outside the admissible bands (needs < e^-" +
                            std::to_string(K) + ")");
  const double v = -std::log(rho);
  double n = std::floor(v);
  if (std::fabs(v - std::round(v)) < 1e-12) n = std::round(v);
  return {static_cast<int>(n), K};
}

BandIndex band_index(const BoxNeighborhood& box, const Vec& x, double section_tol) {
  if (!diamond_membership(box, x, section_tol)) throw PreconditionError("point is not on the diamond section");
  return band_index_of_radius(box, box.chart(x).rho());
}

std::optional<double> exit_time_forward(const VectorFieldDef& field, const BoxNeighborhood& box, const Vec& x,
                                        double horizon, double tol) {
  return exit_time(field, box, x, horizon, tol, 1.0);
}

std::optional<double> exit_time_backward(const VectorFieldDef& field, const BoxNeighborhood& box, const Vec& x,
                                         double horizon, double tol) {
  return exit_time(field, box, x, horizon, tol, -1.0);
}

CrossingReport crossing_count(const VectorFieldDef& field, const BoxNeighborhood& box, const Vec& x,
                              double horizon_backward, double horizon_forward, int resolution, double tol) {
  CrossingReport rep;
  IntegratorOptions opt;
  opt.tol = tol;
  auto g = [&](const Vec& y) { return box.boundary_function(y); };
  std::vector<Crossing> back, fwd;
  for (double dir : {-1.0, 1.0}) {
    const double h = dir < 0 ? horizon_backward : horizon_forward;
    if (h <= 0) continue;
    auto& out = dir < 0 ? back : fwd;
    integrate(field, x, dir * h, opt, [&](const DenseSegment& seg) {
      for (auto& ev : find_events(seg, g, resolution)) {
        Crossing c;
        c.t = ev.t;
        // direction is relative to the integration direction
        c.entering = ev.direction * dir < 0;
        c.chart = box.chart(ev.x);
        c.grazing = std::fabs(box.radial_rate(field, ev.x)) < 1e-8;
        c.x = std::move(ev.x);
        out.push_back(std::move(c));
      }
      return true;
    });
  }
  rep.crossings.assign(back.rbegin(), back.rend());
  rep.crossings.insert(rep.crossings.end(), fwd.begin(), fwd.end());
  rep.count = static_cast<int>(rep.crossings.size());
  for (const auto& c : rep.crossings) rep.any_grazing = rep.any_grazing || c.grazing;
  return rep;
}

SingleCrossingResult single_crossing_check(const VectorFieldDef& field, const BoxNeighborhood& box, const Vec& x,
                                           double tol) {
  if (!box.contains(x)) throw PreconditionError("point is outside the box");
  const auto arc = in_box_arc(field, box, x, tol);
  SingleCrossingResult res;
  int last_sign = 0;
  double last_t = 0.0;
  for (const auto& s : arc) {
    const auto c = box.chart(s.x);
    const double q = c.ns() - c.nu();
    if (std::fabs(q) <= 1e-12 * std::max(c.rho(), 1e-300)) continue;
    const int sg = q > 0 ? 1 : -1;
    if (last_sign != 0 && sg != last_sign) res.crossing_times.push_back(0.5 * (last_t + s.t));
    last_sign = sg;
    last_t = s.t;
  }
  res.single = res.crossing_times.size() == 1;
  return res;
}

std::optional<Vec> diamond_crossing(const VectorFieldDef& field, const BoxNeighborhood& box, const Vec& x,
                                    double tol) {
  if (!box.contains(x)) throw PreconditionError("point is outside the box");
  const double q0 = box.diamond_function(x);
  if (q0 == 0.0) return x;
  // |v^s| - |v^u| decreases along in-box arcs, so the section lies ahead when q0 > 0.
  const double dir = q0 > 0 ? 1.0 : -1.0;
  std::optional<Vec> hit;
  IntegratorOptions opt;
  opt.tol = tol;
  auto q = [&](const Vec& y) { return box.diamond_function(y); };
  integrate(field, x, dir * 50.0 / box.lambda(), opt, [&](const DenseSegment& seg) {
    for (auto& ev : find_events(seg, q, 8)) {
      if (box.contains(ev.x)) hit = std::move(ev.x);
      return false;
    }
    return box.boundary_function(seg.end()) <= 0;
  });
  return hit;
}

ConeViolation cone_violation(const VectorFieldDef& field, const BoxNeighborhood& box, const Vec& x, double tol) {
  const auto arc = in_box_arc(field, box, x, tol);
  ConeViolation v;
  double min_s = INFINITY, max_u = -INFINITY;
  for (const auto& s : arc) {
    const auto c = box.chart(s.x);
    min_s = std::min(min_s, c.ns());
    max_u = std::max(max_u, c.nu());
    v.stable = std::max(v.stable, (c.ns() - min_s) / box.r());
    v.unstable = std::max(v.unstable, (max_u - c.nu()) / box.r());
  }
  return v;
}

}  // namespace orbitshade
