#pragma once

#include "orbitshade/core.hpp"
#include "orbitshade/field.hpp"

#include <complex>
#include <vector>

namespace orbitshade {

inline constexpr double kHyperbolicityTol = 1e-8;
inline constexpr double kRegularityThreshold = 1e-8;

// Axis-aligned search box.
struct Region {
  Vec lo;
  Vec hi;
  bool contains(const Vec& x, double slack = 0.0) const;
  static Region cube(std::size_t dim, double half_width);
};

struct Singularity {
  Vec location;
  double residual = 0.0;
};

// Newton from a uniform grid of seeds; roots with residual <= 1e-10 inside the
// region are kept and roots closer than 1e-6 are merged. On the sphere the
// iteration runs in the tangent plane and is renormalized.
std::vector<Singularity> find_singularities(const VectorFieldDef& field, const Region& region, int grid_density);

struct HyperbolicityCertificate {
  Vec sigma;
  std::vector<std::complex<double>> eigenvalues;  // of the tangent-restricted Jacobian
  int stable_index = 0;
  int unstable_index = 0;
  double spectral_gap = 0.0;      // lambda = min |Re|
  double growth_constant = 1.0;   // C = cond_2(eigenvector matrix)
  bool hyperbolic = false;
  Mat stable_frame;    // ambient coordinates, orthonormal columns
  Mat unstable_frame;
  Mat jacobian;        // tangent-restricted Jacobian A
  Mat tangent_basis;   // ambient columns spanning the tangent space at sigma

  int dimension() const { return stable_index + unstable_index; }
};

// Throws PreconditionError if the residual at sigma exceeds 1e-10 or the
// Jacobian is not diagonalizable to working precision. A non-hyperbolic
// spectrum is a valid outcome (hyperbolic == false).
HyperbolicityCertificate classify_singularity(const VectorFieldDef& field, const Vec& sigma,
                                              double tolerance = kHyperbolicityTol);

enum class IndexCategory { Sink, Source, Saddle };

struct IndexInfo {
  IndexCategory category;
  bool is_index_one;
};

IndexInfo index_category(const HyperbolicityCertificate& cert);
const char* to_string(IndexCategory c);

struct AttachedResult {
  bool attached = false;
  std::vector<Vec> witnesses;  // one per radius, while found
};

// Sample-based evidence that sigma is accumulated by regular points.
AttachedResult is_attached(const VectorFieldDef& field, const Vec& sigma, const std::vector<Vec>& sample,
                           const std::vector<double>& radii, double regularity = kRegularityThreshold);

}  // namespace orbitshade
