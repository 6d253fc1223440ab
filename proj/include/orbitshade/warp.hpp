#pragma once

#include "orbitshade/core.hpp"

#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace orbitshade {

// Piecewise-linear increasing map from reference time to orbit time, h(0) = 0.
// Beyond the last knot h continues with slope 1.
struct Reparametrization {
  std::vector<std::pair<double, double>> knots;

  static Reparametrization identity() { return {{{0.0, 0.0}}}; }
  double operator()(double t) const;
  // strictly increasing in both coordinates, first knot (0,0)
  bool valid() const;
  // every segment slope within [1 - eps, 1 + eps]
  bool satisfies_slope(double eps) const;
  // sup |h(t) - t| over the knots (the sup over t is attained there)
  double max_deviation() const;
};

enum class WarpConstraint { None, Slope };

struct WarpOptions {
  WarpConstraint constraint = WarpConstraint::None;
  double eps = 0.0;    // slope constraint
  long band = -1;      // |i - j| <= band; negative: no band (or the minimal band for the slope constraint)
  bool open_end = false;  // path may end at any candidate index
  // early abandon: return +inf as soon as every cell of a row exceeds this cost
  double abandon_above = std::numeric_limits<double>::infinity();
};

struct WarpPath {
  double cost = 0.0;  // bottleneck of the supplied cost function
  std::vector<std::pair<long, long>> path;  // (reference index, candidate index) from (0,0)
  bool abandoned = false;
};

// Bottleneck DTW over monotone lattice paths with steps (1,0), (0,1), (1,1).
// cost(i, j) must be nonnegative. end_penalty (size m, optional) is maxed into
// the cost of ending at (n-1, j) under open_end. Ties prefer the smaller
// running sum of costs, then diagonal steps.
WarpPath warp_path(long n, long m, const std::function<double(long, long)>& cost, const WarpOptions& opt,
                   const std::vector<double>* end_penalty = nullptr, bool keep_path = true);

struct WarpResult {
  double distance = 0.0;
  Reparametrization warp;
  std::vector<std::pair<long, long>> path;
};

// Euclidean bottleneck distance between two paths sampled at a common step dt.
WarpResult warp_distance(const std::vector<Vec>& reference, const std::vector<Vec>& candidate, double dt,
                         const WarpOptions& opt = {});

// Knots at the corners of a lattice path, thinned to be strictly increasing.
// With slope_eps > 0 a final knot breaking the slope bound is dropped.
Reparametrization reparametrization_from_path(const std::vector<std::pair<long, long>>& path, double dt,
                                             double slope_eps = 0.0);

// For each reference index, the candidate index of least cost among the
// path's cells in that row; the first entry is always 0.
std::vector<long> row_matches(const std::vector<std::pair<long, long>>& path,
                              const std::function<double(long, long)>& cost);

// h through (i dt, c_i dt) for nondecreasing c. Repeated values are separated
// by dt / 2^30 per repeat so h is strictly increasing; collinear knots are merged.
Reparametrization reparametrization_from_matches(const std::vector<long>& c, double dt);

// Exhaustive oracle: enumerates every monotone lattice path (closed end).
// With a slope constraint, paths violating the diagonal-run rule are skipped.
double brute_force_warp_distance(const std::vector<std::vector<double>>& cost, const WarpOptions& opt = {});

// Number of diagonal steps required between off-diagonal steps for slope eps.
long slope_run_length(double eps);

}  // namespace orbitshade
