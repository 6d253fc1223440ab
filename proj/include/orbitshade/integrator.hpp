#pragma once

#include "orbitshade/core.hpp"
#include "orbitshade/field.hpp"

#include <functional>
#include <vector>

namespace orbitshade {

inline constexpr double kDefaultTol = 1e-9;
inline constexpr double kDefaultDtOut = 0.01;

struct IntegratorOptions {
  double tol = kDefaultTol;  // local error per unit time
  double initial_step = 1e-3;
  double max_step = 0.5;
  std::size_t max_steps = 20'000'000;
  double blowup_norm = 1e150;
};

// One accepted Dormand-Prince step with its quartic continuous extension.
// t0/t1 are physical times (t1 < t0 when integrating backward).
struct DenseSegment {
  double t0 = 0.0;
  double t1 = 0.0;
  Mat rcont;  // n x 5
  bool normalize = false;

  Vec eval(double t) const;
  Vec at_theta(double theta) const;
  Vec start() const { return at_theta(0.0); }
  Vec end() const { return at_theta(1.0); }
};

// Return false to stop after the current segment.
using StepObserver = std::function<bool(const DenseSegment&)>;

struct FlowResult {
  Vec state;
  double time = 0.0;  // physical time reached
  bool stopped = false;
  std::size_t steps = 0;
};

// Integrates X from x over signed duration t. Throws IntegrationError on step
// underflow, non-finite state, blow-up or step exhaustion.
FlowResult integrate(const VectorFieldDef& field, const Vec& x, double t, const IntegratorOptions& opt,
                     const StepObserver& observer = {});

Vec flow(const VectorFieldDef& field, const Vec& x, double t, double tol = kDefaultTol);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> points;
  double tolerance = kDefaultTol;

  std::size_t size() const { return times.size(); }
};

// Samples at 0, dt, 2 dt, ... and the endpoint T (T may be negative).
Trajectory flow_trajectory(const VectorFieldDef& field, const Vec& x, double T, double dt_out = kDefaultDtOut,
                           double tol = kDefaultTol);

struct EventCrossing {
  double t = 0.0;
  Vec x;
  int direction = 0;  // +1: g goes from < 0 to >= 0, -1: the reverse
};

// Scans a segment for sign changes of g (zero counts as nonnegative) on a
// uniform sub-grid of `resolution` intervals and refines each root.
std::vector<EventCrossing> find_events(const DenseSegment& seg, const std::function<double(const Vec&)>& g,
                                       int resolution = 8);

}  // namespace orbitshade
