#include "orbitshade/singularity.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace orbitshade {

bool Region::contains(const Vec& x, double slack) const {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
  return true;
}

Region Region::cube(std::size_t dim, double half_width) {
  const auto n = static_cast<Eigen::Index>(dim);
  return {Vec::Constant(n, -half_width), Vec::Constant(n, half_width)};
}

namespace {

constexpr double kResidualMax = 1e-10;
constexpr double kMergeDistance = 1e-6;

std::optional<Vec> newton(const VectorFieldDef& field, Vec x) {
  const bool sphere = field.constraint() == Constraint::UnitSphere;
  Vec f(x.size());
  if (!field.evaluate_into(x.data(), f.data())) return std::nullopt;
  double res = f.norm();
  for (int it = 0; it < 60 && res > 1e-14; ++it) {
    Vec step;
    if (sphere) {
      const Mat b = sphere_tangent_basis(x);
      const Mat a = b.transpose() * field.jacobian(x) * b;
      const Vec d = a.completeOrthogonalDecomposition().solve(-(b.transpose() * f));
      step = b * d;
    } else {
      step = field.jacobian(x).completeOrthogonalDecomposition().solve(-f);
    }
    if (!step.allFinite()) return std::nullopt;
    // Backtracking on the residual norm.
    double alpha = 1.0;
    bool improved = false;
    for (int k = 0; k < 30; ++k) {
      Vec xn = field.project(x + alpha * step);
      Vec fn(x.size());
      if (field.evaluate_into(xn.data(), fn.data()) && fn.norm() < res) {
        x = xn;
        f = fn;
        res = fn.norm();
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) break;
    if (x.norm() > 1e8) return std::nullopt;
  }
  if (res > kResidualMax) return std::nullopt;
  return x;
}

// Makes the first component that is not negligible positive.
void fix_signs(Mat& frame) {
  for (Eigen::Index c = 0; c < frame.cols(); ++c) {
    const double big = frame.col(c).cwiseAbs().maxCoeff();
    for (Eigen::Index r = 0; r < frame.rows(); ++r) {
      if (std::fabs(frame(r, c)) > 1e-6 * big) {
        if (frame(r, c) < 0) frame.col(c) = -frame.col(c);
        break;
      }
    }
  }
}

Mat orthonormal_span(const Mat& vectors) {
  if (vectors.cols() == 0) return Mat(vectors.rows(), 0);
  Eigen::HouseholderQR<Mat> qr(vectors);
  Mat q = qr.householderQ() * Mat::Identity(vectors.rows(), vectors.cols());
  fix_signs(q);
  return q;
}

}  // namespace

std::vector<Singularity> find_singularities(const VectorFieldDef& field, const Region& region, int grid_density) {
  const auto n = static_cast<Eigen::Index>(field.dimension());
  if (region.lo.size() != n || region.hi.size() != n) throw DimensionError("search region has wrong dimension");
  if (grid_density < 2) throw PreconditionError("grid density must be at least 2 per axis");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(region.lo[i] <= region.hi[i])) throw PreconditionError("search region is empty");

  std::vector<Singularity> found;
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  const bool sphere = field.constraint() == Constraint::UnitSphere;
  while (true) {
    Vec seed(n);
    for (Eigen::Index i = 0; i < n; ++i)
      seed[i] = region.lo[i] + (region.hi[i] - region.lo[i]) * idx[static_cast<std::size_t>(i)] / (grid_density - 1);
    bool usable = true;
    if (sphere) {
      if (seed.norm() < 1e-12) usable = false;
      else seed.normalize();
    }
    if (usable) {
      if (auto root = newton(field, seed); root && region.contains(*root, 1e-9)) {
        const double res = field.evaluate(*root).norm();
        auto dup = std::find_if(found.begin(), found.end(),
                                [&](const Singularity& s) { return (s.location - *root).norm() < kMergeDistance; });
        if (dup == found.end()) {
          found.push_back({*root, res});
        } else if (res < dup->residual) {
          *dup = {*root, res};
        }
      }
    }
    Eigen::Index k = 0;
    while (k < n && ++idx[static_cast<std::size_t>(k)] == grid_density) idx[static_cast<std::size_t>(k++)] = 0;
    if (k == n) break;
  }
  std::sort(found.begin(), found.end(), [](const Singularity& a, const Singularity& b) {
    for (Eigen::Index i = 0; i < a.location.size(); ++i) {
      if (std::fabs(a.location[i] - b.location[i]) > kMergeDistance) return a.location[i] < b.location[i];
    }
    return false;
  });
  return found;
}

HyperbolicityCertificate classify_singularity(const VectorFieldDef& field, const Vec& sigma, double tolerance) {
  const double res = field.evaluate(sigma).norm();
  if (res > kResidualMax)
    throw PreconditionError("not a singularity: residual " + std::to_string(res) + " exceeds 1e-10");
  HyperbolicityCertificate cert;
  cert.sigma = sigma;
  const auto n = sigma.size();
  if (field.constraint() == Constraint::UnitSphere) {
    cert.tangent_basis = sphere_tangent_basis(sigma);
  } else {
    cert.tangent_basis = Mat::Identity(n, n);
  }
  const Mat& b = cert.tangent_basis;
  cert.jacobian = b.transpose() * field.jacobian(sigma) * b;
  const auto d = cert.jacobian.rows();

  Eigen::EigenSolver<Mat> es(cert.jacobian);
  if (es.info() != Eigen::Success) throw FieldError("eigen-decomposition failed");
  const Eigen::VectorXcd mu = es.eigenvalues();
  Eigen::MatrixXcd v = es.eigenvectors();
  for (Eigen::Index c = 0; c < d; ++c) v.col(c).normalize();

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(v);
  const auto sv = svd.singularValues();
  const double cond = sv[sv.size() - 1] > 0 ? sv[0] / sv[sv.size() - 1] : INFINITY;
  if (!(cond < 1e10))
    throw PreconditionError("Jacobian at the singularity is not diagonalizable (eigenvector condition " +
                            std::to_string(cond) + ")");
  cert.growth_constant = cond;

  // Order eigenvalues by real part, then imaginary part.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index c) {
    if (mu[a].real() != mu[c].real()) return mu[a].real() < mu[c].real();
    return mu[a].imag() < mu[c].imag();
  });

  double gap = INFINITY;
  std::vector<Vec> sv_s, sv_u;
  for (Eigen::Index i : order) {
    cert.eigenvalues.push_back(mu[i]);
    const double re = mu[i].real();
    gap = std::min(gap, std::fabs(re));
    if (re < 0) ++cert.stable_index;
    if (re > 0) ++cert.unstable_index;
    auto& bucket = re < 0 ? sv_s : sv_u;
    if (re == 0.0) continue;
    if (mu[i].imag() > 0) {
      bucket.push_back(v.col(i).real());
      bucket.push_back(v.col(i).imag());
    } else if (mu[i].imag() == 0.0) {
      bucket.push_back(v.col(i).real());
    }
  }
  cert.spectral_gap = gap;
  cert.hyperbolic = gap > tolerance && cert.stable_index + cert.unstable_index == d;

  auto to_mat = [&](const std::vector<Vec>& cols) {
    Mat m(d, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) m.col(static_cast<Eigen::Index>(c)) = cols[c];
    return m;
  };
  Mat fs = orthonormal_span(b * to_mat(sv_s));
  Mat fu = orthonormal_span(b * to_mat(sv_u));
  cert.stable_frame = fs;
  cert.unstable_frame = fu;
  return cert;
}

IndexInfo index_category(const HyperbolicityCertificate& cert) {
  if (!cert.hyperbolic) throw PreconditionError("index category needs a hyperbolic certificate");
  IndexCategory c = cert.unstable_index == 0   ? IndexCategory::Sink
                    : cert.stable_index == 0   ? IndexCategory::Source
                                               : IndexCategory::Saddle;
  return {c, cert.stable_index == 1 || cert.unstable_index == 1};
}

const char* to_string(IndexCategory c) {
  switch (c) {
    case IndexCategory::Sink: return "sink";
    case IndexCategory::Source: return "source";
    case IndexCategory::Saddle: return "saddle";
  }
  return "?";
}

AttachedResult is_attached(const VectorFieldDef& field, const Vec& sigma, const std::vector<Vec>& sample,
                           const std::vector<double>& radii, double regularity) {
  if (sample.empty()) throw PreconditionError("attachedness needs a nonempty sample");
  if (radii.empty()) throw PreconditionError("attachedness needs at least one radius");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0)) throw PreconditionError("radii must be positive");
    if (i > 0 && !(radii[i] < radii[i - 1])) throw PreconditionError("radii must be strictly decreasing");
  }
  AttachedResult out;
  out.attached = true;
  for (double r : radii) {
    const Vec* best = nullptr;
    double best_d = INFINITY;
    for (const Vec& x : sample) {
      const double d = field.distance(x, sigma);
      if (d > 0 && d <= r && field.evaluate(x).norm() > regularity && d < best_d) {
        best = &x;
        best_d = d;
      }
    }
    if (!best) {
      out.attached = false;
      break;
    }
    out.witnesses.push_back(*best);
  }
  return out;
}

}  // namespace orbitshade
