#pragma once

#include "orbitshade/core.hpp"
#include "orbitshade/field.hpp"
#include "orbitshade/integrator.hpp"
#include "orbitshade/singularity.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace orbitshade {

// Components of x - sigma in the stable/unstable frames.
struct ChartPoint {
  Vec vs;  // coefficients in the stable frame
  Vec vu;  // coefficients in the unstable frame
  double ns() const { return vs.norm(); }
  double nu() const { return vu.norm(); }
  double rho() const { return std::max(ns(), nu()); }
};

// Box neighborhood {|v^s| <= r, |v^u| <= r} in an affine eigenframe chart.
class BoxNeighborhood {
 public:
  BoxNeighborhood(Vec sigma, HyperbolicityCertificate cert, double r, Mat stable_frame, Mat unstable_frame);

  const Vec& sigma() const { return sigma_; }
  const HyperbolicityCertificate& cert() const { return cert_; }
  double r() const { return r_; }
  const Mat& stable_frame() const { return es_; }
  const Mat& unstable_frame() const { return eu_; }
  double lambda() const { return cert_.spectral_gap; }

  ChartPoint chart(const Vec& x) const;
  Vec from_chart(const Vec& vs, const Vec& vu) const;
  bool contains(const Vec& x) const;
  // max(|v^s|, |v^u|) - r: negative inside, zero on the boundary.
  double boundary_function(const Vec& x) const;
  // |v^s| - |v^u|: zero on the diamond section.
  double diamond_function(const Vec& x) const;
  // Rate of change of max(|v^s|,|v^u|) along the field at x.
  double radial_rate(const VectorFieldDef& field, const Vec& x) const;
  // Smallest integer K with exp(-K) < r.
  int K() const;

 private:
  Vec sigma_;
  HyperbolicityCertificate cert_;
  double r_;
  Mat es_;
  Mat eu_;
  Mat pinv_;  // (s+u) x n
};

struct BoxOptions {
  bool check_uniqueness = true;
  bool check_exits = true;
  int uniqueness_grid = 7;
  double tol = kDefaultTol;
};

// Validates the saddle certificate, that sigma is the only singularity in the
// box, and that sampled regular points leave within 50/lambda.
BoxNeighborhood make_box(const VectorFieldDef& field, const Vec& sigma, const HyperbolicityCertificate& cert,
                         double r, const BoxOptions& opt = {});

// Diagnostic: a box with caller-supplied (possibly non-invariant) frames, not validated.
BoxNeighborhood make_box_with_frames(const Vec& sigma, const HyperbolicityCertificate& cert, double r,
                                     const Mat& stable_frame, const Mat& unstable_frame);

// min(0.2, lambda / (10 L2)) with L2 a sampled bound on the second derivative near sigma.
double default_box_radius(const VectorFieldDef& field, const HyperbolicityCertificate& cert);

bool diamond_membership(const BoxNeighborhood& box, const Vec& x, double tol);

struct BandIndex {
  int n = 0;
  int K = 0;
};

// n = floor(-ln rho) for a point on the diamond; exact powers exp(-n) map to n.
BandIndex band_index(const BoxNeighborhood& box, const Vec& x, double section_tol = 1e-6);
BandIndex band_index_of_radius(const BoxNeighborhood& box, double rho);

std::optional<double> exit_time_forward(const VectorFieldDef& field, const BoxNeighborhood& box, const Vec& x,
                                        double horizon, double tol = kDefaultTol);
std::optional<double> exit_time_backward(const VectorFieldDef& field, const BoxNeighborhood& box, const Vec& x,
                                         double horizon, double tol = kDefaultTol);

struct Crossing {
  double t = 0.0;
  bool entering = false;
  Vec x;
  ChartPoint chart;
  bool grazing = false;
};

struct CrossingReport {
  int count = 0;
  std::vector<Crossing> crossings;  // ordered by time
  bool any_grazing = false;
};

// Crossings of the box boundary by X_t(x) for t in [-horizon_backward, horizon_forward].
CrossingReport crossing_count(const VectorFieldDef& field, const BoxNeighborhood& box, const Vec& x,
                              double horizon_backward, double horizon_forward, int resolution = 8,
                              double tol = kDefaultTol);

struct SingleCrossingResult {
  bool single = false;
  std::vector<double> crossing_times;
};

// Counts diamond crossings of the in-box arc through an on-section point.
SingleCrossingResult single_crossing_check(const VectorFieldDef& field, const BoxNeighborhood& box, const Vec& x,
                                           double tol = kDefaultTol);

// The point where the in-box arc through x meets the diamond section, if any.
std::optional<Vec> diamond_crossing(const VectorFieldDef& field, const BoxNeighborhood& box, const Vec& x,
                                    double tol = kDefaultTol);

struct ConeViolation {
  double stable = 0.0;    // largest growth of |v^s| along the arc, relative to r
  double unstable = 0.0;  // largest decay of |v^u| along the arc, relative to r
  double worst() const { return std::max(stable, unstable); }
};

// Monotonicity defect of the chart components along the in-box arc through x.
ConeViolation cone_violation(const VectorFieldDef& field, const BoxNeighborhood& box, const Vec& x,
                             double tol = kDefaultTol);

}  // namespace orbitshade
