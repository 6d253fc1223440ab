#pragma once

#include "orbitshade/core.hpp"
#include "orbitshade/field.hpp"
#include "orbitshade/integrator.hpp"
#include "orbitshade/local_model.hpp"
#include "orbitshade/singularity.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace orbitshade {

// e(x) = min(g(dist(x, Sing)), cap).
class GaugeFunction {
 public:
  GaugeFunction(VectorFieldDef field, std::vector<Vec> singular_set, std::function<double(double)> profile,
                double cap, std::string description = "custom");

  // g(s) = k * s, capped.
  static GaugeFunction linear(const VectorFieldDef& field, std::vector<Vec> singular_set, double k = 0.5,
                              double cap = 1.0);

  double operator()(const Vec& x) const;
  double distance_to_singular_set(const Vec& x) const;
  double profile(double s) const;
  double cap() const { return cap_; }
  const std::vector<Vec>& singular_set() const { return sing_; }
  const std::string& description() const { return desc_; }

 private:
  VectorFieldDef field_;
  std::vector<Vec> sing_;
  std::function<double(double)> profile_;
  double cap_;
  std::string desc_;
};

enum class JumpRule { Uniform, Gauge };

struct PseudoEntry {
  Vec x;
  double t = 1.0;
};

struct PseudoOrbit {
  std::vector<PseudoEntry> entries;
  double T = 1.0;
  JumpRule rule = JumpRule::Uniform;
  double delta = 0.0;                  // uniform rule
  std::optional<GaugeFunction> gauge;  // gauge rule
  bool finite = true;
  // Declared constant tails: the first tail_before and last tail_after entries
  // stand for bi-infinite repetitions of these points.
  std::optional<Vec> tail_point_before;
  std::optional<Vec> tail_point_after;
  std::size_t tail_before = 0;
  std::size_t tail_after = 0;

  std::size_t size() const { return entries.size(); }
  // s_0 = 0, s_{i+1} = s_i + t_i; size() + 1 values.
  std::vector<double> accumulated_times() const;
  double total_time() const;
  // Allowed jump after entry i.
  double allowed_jump(std::size_t i) const;
};

struct ValidationOptions {
  double tol = kDefaultTol;  // upper bound; lowered to allowed/100 per segment
  double slack = -1.0;       // absolute slack on every jump; negative means 10 * tol
};

struct ValidationReport {
  bool valid = false;
  double max_jump = 0.0;
  double max_ratio = 0.0;  // jump / allowed, infinite when allowed = 0 and jump > slack
  std::optional<std::size_t> first_violation;  // index i of the failing jump i -> i+1, or of a short segment
  std::string failed_rule;                     // "", "T", "uniform", "gauge"
  std::vector<double> jumps;
};

// Integration tolerance used for segment i (shared by construction and validation).
double segment_tolerance(const PseudoOrbit& po, std::size_t i, const ValidationOptions& opt = {});

ValidationReport validate(const VectorFieldDef& field, const PseudoOrbit& po, const ValidationOptions& opt = {});

// A true orbit cut into consecutive segments of the given durations.
PseudoOrbit slice_orbit(const VectorFieldDef& field, const Vec& x, const std::vector<double>& durations,
                        double delta, double tol = kDefaultTol);

// Random valid uniform chain: flow x for t_i ~ U[tmin, tmax], then kick the
// end point by at most 0.9 delta in a random direction. T = min(1, tmin).
PseudoOrbit build_kicked_chain(const VectorFieldDef& field, const Vec& x, int segments, double delta,
                               std::uint64_t seed, double tmin = 1.0, double tmax = 2.0, double tol = 1e-12);

// max(1, tail_length) copies of (sigma, 1) on each side of (x0, t0).
PseudoOrbit build_loop_seed_chain(const VectorFieldDef& field, const Vec& sigma, const Vec& x0, double t0,
                                  std::size_t tail_length, double delta_target);

// N + 1 consecutive (x0, t0) entries between sigma tails.
PseudoOrbit build_loop_multiplication_chain(const VectorFieldDef& field, const Vec& sigma, const Vec& x0, double t0,
                                            int N, std::size_t tail_length, double delta_target);

// First time t >= t_min at which the orbit of x crosses the hyperplane through
// x normal to X(x) in the same direction and within `radius` of x.
std::optional<double> first_return_time(const VectorFieldDef& field, const Vec& x, double horizon,
                                        double t_min = 1.0, double radius = 1e-2, double tol = kDefaultTol);

struct ReturnTriple {
  Vec q;              // start on the diamond section
  double u = 0.0;     // exit time t+_q
  double s = 0.0;     // time of re-entry into the box
  double s_section = 0.0;  // time of the next diamond crossing
  int n = 0;          // band of q
  int return_band = 0;
  Vec exit_point;     // X_u(q), on the boundary
  Vec reentry_point;  // X_s(q), on the boundary
  Vec section_point;  // X_{s_section}(q), on the diamond
};

struct ReturnSearch {
  int budget = 400;           // seeds tried
  double horizon = 200.0;     // outer integration time from the exit point
  double tol = kDefaultTol;
};

// Seeds the diamond in bands n-1, n, n+1 and follows each seed out of the box
// and back. nullopt when the budget runs out.
std::optional<ReturnTriple> find_return_point(const VectorFieldDef& field, const BoxNeighborhood& box, int n,
                                              const ReturnSearch& search = {});

struct RescaledChainOptions {
  std::size_t tail_length = 8;
  int max_band = 30;
  ReturnSearch search;
};

struct RescaledChain {
  PseudoOrbit orbit;
  ReturnTriple triple;
  Vec unstable_exit;  // x0', on W^u_loc and the box boundary
  Vec stable_entry;   // x2, on W^s_loc and the box boundary
  double d0 = 0.0;    // infimum of the gauge over the box boundary
  double jump_in = 0.0;
  double jump_out = 0.0;
};

// All-regular gauge chain: backward orbit of x0 = X_{-1}(x0'), the transit
// (X_u(q), s - u), forward orbit of x2.
RescaledChain build_rescaled_chain(const VectorFieldDef& field, const BoxNeighborhood& box,
                                   const GaugeFunction& gauge, const RescaledChainOptions& opt = {});

// Repeats a closed chain; throws with the measured closing gap otherwise.
PseudoOrbit periodize(const VectorFieldDef& field, const PseudoOrbit& po, int copies);

// Inf of the gauge over sampled points of the box boundary.
double boundary_gauge_infimum(const BoxNeighborhood& box, const GaugeFunction& gauge, int samples = 64);

// Point of W^u_loc (sign +1/-1 along the first unstable axis) or W^s_loc on the box boundary.
Vec unstable_boundary_point(const VectorFieldDef& field, const BoxNeighborhood& box, int sign, double tol = 1e-11);
Vec stable_boundary_point(const VectorFieldDef& field, const BoxNeighborhood& box, int sign, double tol = 1e-11);

}  // namespace orbitshade
