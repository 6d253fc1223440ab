#pragma once

#include "orbitshade/core.hpp"
#include "orbitshade/field.hpp"
#include "orbitshade/local_model.hpp"
#include "orbitshade/singularity.hpp"

#include <optional>
#include <string>
#include <vector>

namespace orbitshade {

struct HomoclinicWitness {
  Vec sigma;
  Vec p;                     // unstable exit point on the box boundary
  int branch = 0;            // +1 / -1 along the unstable axis; ring index + 1 for u > 1
  double transit_time = 0.0; // exit to stable re-entry
  double closeness = 0.0;    // smallest |v^u| over the return passage, chart units
  int crossings = 0;
  double seed_eta = 0.0;
  std::vector<Vec> polyline;  // sigma, seed orbit through the loop, sigma
};

struct LoopDetectionOptions {
  double horizon = 100.0;
  double tol = 1e-5;             // detection tolerance, chart units
  double eta = -1.0;             // seed offset; negative: r / 100
  double integration_tol = 1e-11;
  double polyline_dt = 0.01;
  int ring_size = 8;             // seeds per ring when u > 1
};

// sigma +- eta e_u for u = 1; a ring in the first two unstable axes for u > 1.
std::vector<Vec> unstable_branch_seeds(const HyperbolicityCertificate& cert, double eta, int ring_size = 8);
std::vector<Vec> unstable_branch_seeds(const BoxNeighborhood& box);

std::vector<HomoclinicWitness> detect_homoclinic_loops(const VectorFieldDef& field, const BoxNeighborhood& box,
                                                       const LoopDetectionOptions& opt = {});

// Re-integrates from p and returns the smallest |v^u| over
// [transit_time, transit_time + 5/lambda]; comparable to closeness.
double witness_audit(const VectorFieldDef& field, const HomoclinicWitness& w, const BoxNeighborhood& box,
                     double integration_tol = 1e-12);

int loop_crossing_count(const VectorFieldDef& field, const HomoclinicWitness& w, const BoxNeighborhood& box);

struct HLBoundReport {
  int branch_count = 0;
  int loops_found = 0;
  int max_crossings = 0;  // N, 0 when no loop is found
  bool bound_applies = false;  // u = 1
  std::vector<HomoclinicWitness> witnesses;
};

HLBoundReport hl_bound_report(const VectorFieldDef& field, const BoxNeighborhood& box,
                              const LoopDetectionOptions& opt = {});

// Loops of every hyperbolic saddle found in the region, each with its default box.
struct SaddleLoops {
  Vec sigma;
  double box_radius = 0.0;
  HLBoundReport report;
};
std::vector<SaddleLoops> detect_loops_in_region(const VectorFieldDef& field, const Region& region,
                                                const LoopDetectionOptions& opt = {}, int grid_density = 12);

// One-sided Hausdorff terms between two polylines (vertex-to-segment).
double hausdorff_distance(const std::vector<Vec>& a, const std::vector<Vec>& b);

}  // namespace orbitshade
