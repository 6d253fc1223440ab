#pragma once

#include "orbitshade/core.hpp"
#include "orbitshade/field.hpp"
#include "orbitshade/pseudo_orbit.hpp"
#include "orbitshade/singularity.hpp"

#include <optional>
#include <vector>

namespace orbitshade {

struct ChainRecurrenceOptions {
  double T = 1.0;
  double T_max = -1.0;       // negative: T + 1
  double delta_edge = -1.0;  // negative: box_size / 10
  int samples_per_axis = 2;
  double tol = 1e-6;  // well below the edge slack
  // R-variant: the edge slack out of box b is e(center of b) instead of delta_edge.
  std::optional<GaugeFunction> gauge;
};

struct ChainRecurrenceResult {
  Vec lo;
  double box_size = 0.0;
  std::vector<long> shape;
  std::vector<long> box_ids;          // active boxes, sorted
  std::vector<int> class_of;          // parallel to box_ids, -1 for transient boxes
  std::vector<std::vector<long>> classes;  // sorted box ids per class, classes ordered by first id
  std::vector<long> singular_boxes;
  std::vector<long> failed_boxes;     // integration failures, excluded from the graph

  Vec center(long id) const;
  long box_of(const Vec& x) const;  // -1 outside the grid
  // -1 when the box is inactive or transient
  int class_of_box(long id) const;
  int class_of_point(const Vec& x) const { return class_of_box(box_of(x)); }
};

ChainRecurrenceResult chain_recurrence_classes(const VectorFieldDef& field, const Region& region, double box_size,
                                               const ChainRecurrenceOptions& opt = {});

// Strongly connected components of a directed graph (iterative Tarjan).
std::vector<std::vector<int>> strongly_connected_components(const std::vector<std::vector<int>>& adjacency);

}  // namespace orbitshade
