#pragma once

#include "orbitshade/core.hpp"
#include "orbitshade/field.hpp"
#include "orbitshade/integrator.hpp"
#include "orbitshade/local_model.hpp"
#include "orbitshade/pseudo_orbit.hpp"
#include "orbitshade/warp.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace orbitshade {

enum class ShadowRuleKind { Plain, Strong, Rescaled };

struct ShadowRule {
  ShadowRuleKind kind = ShadowRuleKind::Plain;
  double slope_eps = 0.0;              // strong
  std::optional<GaugeFunction> gauge;  // rescaled

  static ShadowRule plain() { return {}; }
  static ShadowRule strong(double slope_eps) { return {ShadowRuleKind::Strong, slope_eps, std::nullopt}; }
  static ShadowRule rescaled(GaugeFunction g) { return {ShadowRuleKind::Rescaled, 0.0, std::move(g)}; }
  std::string name() const;
};

struct SearchOptions {
  double seed_radius = -1.0;  // negative: epsilon, or 0.01 when estimating
  int seed_count = 16;
  int refine_iters = 40;      // simplex iterations per refinement start
  int refine_starts = 2;
  int budget = 120;           // candidate evaluations
  std::uint64_t seed = 0;     // offset into the Halton sequence
  double tol = kDefaultTol;   // candidate integration without declared tails
  double tail_tol = 1e-13;    // candidate integration with declared tails
  double tail_horizon = -1.0; // negative: 20 / lambda of the tail point (20 if not hyperbolic)
  double band_time = -1.0;    // warp band in time units; negative: max(20, tail horizon)
  bool manifold_seeds = true; // extra seeds on W^u of a hyperbolic leading tail point
  std::optional<BoxNeighborhood> box;  // enables crossing counts
};

// Sampling and integration settings shared by the search and the audit.
struct ShadowSettings {
  double dt = 0.01;
  long samples = 0;  // reference samples, covering [0, span]
  double span = 0.0; // time of the non-tail part of the chain
  double tol = kDefaultTol;
  double tail_horizon = 0.0;
  double band_time = 0.0;
  bool tail_before = false;
  bool tail_after = false;
};

ShadowSettings shadow_settings(const VectorFieldDef& field, const PseudoOrbit& po, const SearchOptions& search = {});

struct ShadowCandidate {
  Vec y;
  double score = 0.0;  // discrete bottleneck objective
  double h_end = 0.0;  // candidate time matched to the end of the chain
  std::optional<int> crossing_count;
};

enum class ShadowStatus { Found, NotFound, Estimate };

struct ShadowingResult {
  ShadowStatus status = ShadowStatus::NotFound;
  Vec witness_y;
  Reparametrization warp;
  double achieved = 0.0;  // continuous re-evaluation under warp
  double score = 0.0;     // discrete DP objective of the witness
  double epsilon = 0.0;
  std::string rule;
  int budget_spent = 0;
  std::optional<int> crossing_count_of_witness;
  ShadowSettings settings;
  std::vector<ShadowCandidate> refined;  // end points of the simplex refinements

  bool found() const { return status == ShadowStatus::Found; }
  std::string status_name() const;
};

// Shadowing is measured from the first non-tail entry: time 0 of the warp is
// the start of that entry. Declared tails become "stay within epsilon of the
// tail point" for tail_horizon before time 0 and after h(end).
ShadowingResult shadow_search(const VectorFieldDef& field, const PseudoOrbit& po, double epsilon,
                              const ShadowRule& rule = ShadowRule::plain(), const SearchOptions& search = {});

// shadow_search without the found threshold; status = Estimate.
ShadowingResult shadowing_distance_estimate(const VectorFieldDef& field, const PseudoOrbit& po,
                                            const ShadowRule& rule = ShadowRule::plain(),
                                            const SearchOptions& search = {});

// Re-simulates y and measures the rule's sup objective under the warp.
double verify_shadow(const VectorFieldDef& field, const Vec& y, const Reparametrization& warp, const PseudoOrbit& po,
                     const ShadowRule& rule, const ShadowSettings& settings);

// Samples X_t(x) at the given times (all of one sign, sorted by |t|). With
// partial = true an integration failure ends the list instead of throwing.
std::vector<Vec> sample_orbit(const VectorFieldDef& field, const Vec& x, const std::vector<double>& times,
                              double tol, bool partial = false);

// The non-tail part of the chain sampled at settings.dt.
std::vector<Vec> reference_path(const VectorFieldDef& field, const PseudoOrbit& po, const ShadowSettings& settings);

}  // namespace orbitshade
