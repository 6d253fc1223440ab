#include <doctest.h>

#include "orbitshade/singularity.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <random>

using namespace orbitshade;

namespace {
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

Mat random_rotation(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = g(rng);
  Eigen::HouseholderQR<Mat> qr(m);
  Mat q = qr.householderQ();
  if (q.determinant() < 0) q.col(0) = -q.col(0);
  return q;
}

bool contains_point(const std::vector<Singularity>& s, const Vec& p, double tol) {
  for (const auto& x : s)
    if ((x.location - p).norm() < tol) return true;
  return false;
}
}  // namespace

TEST_CASE("duffing singularities") {
  auto f = builtin_field("duffing-saddle");
  auto s = find_singularities(f, Region::cube(2, 2.0), 9);
  REQUIRE(s.size() == 2);
  CHECK(contains_point(s, v2(0, 0), 1e-12));
  CHECK(contains_point(s, v2(1, 0), 1e-12));
  for (const auto& x : s) CHECK(x.residual <= 1e-10);
}

TEST_CASE("lorenz equilibria match the closed form") {
  auto f = builtin_field("lorenz");
  // z = rho - 1 = 27 for the two symmetric equilibria, so the box extends above 20 in z.
  Region reg{v3(-20, -20, -20), v3(20, 20, 30)};
  auto s = find_singularities(f, reg, 6);
  REQUIRE(s.size() == 3);
  const double q = std::sqrt(8.0 / 3 * 27);
  CHECK(contains_point(s, v3(0, 0, 0), 1e-10));
  CHECK(contains_point(s, v3(q, q, 27), 1e-9));
  CHECK(contains_point(s, v3(-q, -q, 27), 1e-9));
  // the symmetric pair lies outside a cube of half-width 20
  auto inner = find_singularities(f, Region::cube(3, 20.0), 6);
  CHECK(inner.size() == 1);
}

TEST_CASE("linear saddle has only the origin; empty result is valid") {
  auto s = find_singularities(builtin_field("linear-saddle-2d"), Region::cube(2, 1.0), 3);
  REQUIRE(s.size() == 1);
  CHECK(s[0].location.norm() < 1e-14);
  auto none = find_singularities(parse_field_definition("x' = 1; y' = x"), Region::cube(2, 1.0), 4);
  CHECK(none.empty());
  CHECK_THROWS_AS(find_singularities(builtin_field("linear-saddle-2d"), Region::cube(2, 1.0), 1), PreconditionError);
}

TEST_CASE("duffing origin is an index-one saddle") {
  auto f = builtin_field("duffing-saddle");
  auto c = classify_singularity(f, v2(0, 0));
  REQUIRE(c.hyperbolic);
  CHECK(c.stable_index == 1);
  CHECK(c.unstable_index == 1);
  CHECK(c.spectral_gap == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.eigenvalues[0].real() == doctest::Approx(-1.0));
  CHECK(c.eigenvalues[1].real() == doctest::Approx(1.0));
  const double h = 1 / std::sqrt(2.0);
  CHECK((c.unstable_frame.col(0) - v2(h, h)).norm() < 1e-12);
  CHECK((c.stable_frame.col(0) - v2(h, -h)).norm() < 1e-12);
  auto info = index_category(c);
  CHECK(info.category == IndexCategory::Saddle);
  CHECK(info.is_index_one);
}

TEST_CASE("duffing center is certified non-hyperbolic") {
  auto c = classify_singularity(builtin_field("duffing-saddle"), v2(1, 0));
  CHECK_FALSE(c.hyperbolic);
  CHECK(std::fabs(c.eigenvalues[0].imag()) == doctest::Approx(1.0));
  CHECK_THROWS_AS(index_category(c), PreconditionError);
}

TEST_CASE("lorenz origin spectrum matches the block roots") {
  auto f = builtin_field("lorenz");
  auto c = classify_singularity(f, v3(0, 0, 0));
  const double s = 10, r = 28, b = 8.0 / 3;
  // mu^2 + (s+1) mu - s (r-1) = 0 and mu = -b
  const double disc = std::sqrt((s + 1) * (s + 1) + 4 * s * (r - 1));
  const double plus = (-(s + 1) + disc) / 2, minus = (-(s + 1) - disc) / 2;
  REQUIRE(c.eigenvalues.size() == 3);
  CHECK(std::fabs(c.eigenvalues[0].real() - minus) < 1e-9);
  CHECK(std::fabs(c.eigenvalues[1].real() + b) < 1e-9);
  CHECK(std::fabs(c.eigenvalues[2].real() - plus) < 1e-9);
  for (const auto& m : c.eigenvalues) CHECK(m.imag() == 0.0);
  CHECK(c.unstable_index == 1);
  CHECK(c.stable_index == 2);
  CHECK(index_category(c).is_index_one);
  CHECK(c.spectral_gap == doctest::Approx(b));
}

TEST_CASE("sinks, sources and the sphere poles") {
  auto sink = classify_singularity(parse_field_definition("x' = -x; y' = -y"), v2(0, 0));
  CHECK(sink.stable_index == 2);
  CHECK(index_category(sink).category == IndexCategory::Sink);
  CHECK_FALSE(index_category(sink).is_index_one);

  auto f = builtin_field("sphere-morse-smale");
  auto s = find_singularities(f, Region::cube(3, 1.0), 5);
  REQUIRE(s.size() == 2);
  CHECK(contains_point(s, v3(0, 0, -1), 1e-10));
  CHECK(contains_point(s, v3(0, 0, 1), 1e-10));
  auto north = classify_singularity(f, v3(0, 0, 1));
  auto south = classify_singularity(f, v3(0, 0, -1));
  CHECK(north.dimension() == 2);
  CHECK(index_category(north).category == IndexCategory::Source);
  CHECK(index_category(south).category == IndexCategory::Sink);
  CHECK(north.spectral_gap == doctest::Approx(1.0));
  CHECK((north.unstable_frame.transpose() * v3(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("index categories from indices") {
  HyperbolicityCertificate c;
  c.hyperbolic = true;
  c.stable_index = 2;
  c.unstable_index = 1;
  CHECK(index_category(c).category == IndexCategory::Saddle);
  CHECK(index_category(c).is_index_one);
  c.stable_index = 3;
  c.unstable_index = 0;
  CHECK(index_category(c).category == IndexCategory::Sink);
  CHECK_FALSE(index_category(c).is_index_one);
  c.stable_index = 1;
  c.unstable_index = 1;
  CHECK(index_category(c).is_index_one);
}

TEST_CASE("defective jacobians are rejected") {
  CHECK_THROWS_AS(classify_singularity(parse_field_definition("x' = -x + y; y' = -y"), v2(0, 0)), PreconditionError);
  CHECK_THROWS_AS(classify_singularity(builtin_field("duffing-saddle"), v2(0.5, 0)), PreconditionError);
}

TEST_CASE("frames are invariant subspaces") {
  std::mt19937_64 rng(12);
  for (const char* id : {"duffing-saddle", "lorenz", "linear-saddle-3d"}) {
    auto f = builtin_field(id);
    auto c = classify_singularity(f, Vec::Zero(static_cast<Eigen::Index>(f.dimension())));
    for (const Mat* e : {&c.stable_frame, &c.unstable_frame}) {
      const Mat& fr = *e;
      const Mat restricted = fr.transpose() * c.jacobian * fr;
      CHECK((c.jacobian * fr - fr * restricted).norm() <= 1e-8);
      CHECK((fr.transpose() * fr - Mat::Identity(fr.cols(), fr.cols())).norm() < 1e-12);
    }
  }
  // A complex stable pair: frames still invariant.
  auto spiral = parse_field_definition("x' = -0.5*x - 2*y; y' = 2*x - 0.5*y; z' = z");
  auto c = classify_singularity(spiral, v3(0, 0, 0));
  CHECK(c.stable_index == 2);
  CHECK(c.stable_frame.cols() == 2);
  const Mat r = c.stable_frame.transpose() * c.jacobian * c.stable_frame;
  CHECK((c.jacobian * c.stable_frame - c.stable_frame * r).norm() <= 1e-8);
}

TEST_CASE("linearized contraction bound on the stable space") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> ut(0, 5);
  std::normal_distribution<double> g;
  for (const char* src : {"x' = y; y' = x - x^2", "x' = -x + 3*y; y' = -4*y; z' = 2*z",
                          "x' = -0.5*x - 2*y; y' = 2*x - 0.5*y; z' = z"}) {
    auto f = parse_field_definition(src);
    auto c = classify_singularity(f, Vec::Zero(static_cast<Eigen::Index>(f.dimension())));
    REQUIRE(c.hyperbolic);
    for (int i = 0; i < 50; ++i) {
      Vec w(c.stable_frame.cols());
      for (auto& x : w) x = g(rng);
      const Vec v = c.stable_frame * w;
      const double t = ut(rng);
      const Mat e = (c.jacobian * t).exp();
      CHECK((e * v).norm() <= c.growth_constant * std::exp(-c.spectral_gap * t) * v.norm() * (1 + 1e-12));
    }
  }
}

TEST_CASE("classification is invariant under rotations") {
  std::mt19937_64 rng(44);
  for (const char* id : {"duffing-saddle", "lorenz", "linear-saddle-3d"}) {
    auto f = builtin_field(id);
    const auto n = static_cast<int>(f.dimension());
    auto c0 = classify_singularity(f, Vec::Zero(n));
    for (int k = 0; k < 5; ++k) {
      const Mat q = random_rotation(n, rng);
      auto g = conjugate_by_orthogonal(f, q);
      auto c1 = classify_singularity(g, Vec::Zero(n));
      CHECK(c1.stable_index == c0.stable_index);
      CHECK(c1.unstable_index == c0.unstable_index);
      CHECK(std::fabs(c1.spectral_gap - c0.spectral_gap) <= 1e-9);
    }
  }
}

TEST_CASE("roots move continuously with parameters") {
  auto f = builtin_field("lorenz");
  auto g = f.with_parameter("r", 28 + 1e-6);
  Region reg{v3(-20, -20, -20), v3(20, 20, 30)};
  auto a = find_singularities(f, reg, 6);
  auto b = find_singularities(g, reg, 6);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i].location - b[i].location).norm() <= 1e-5);
}

TEST_CASE("attachedness from samples") {
  auto f = builtin_field("duffing-saddle");
  std::vector<Vec> loop;
  for (double t = -30; t <= 30; t += 0.05) {
    const double s = 1 / std::cosh(t / 2);
    loop.push_back(v2(1.5 * s * s, -1.5 * s * s * std::tanh(t / 2)));
  }
  auto a = is_attached(f, v2(0, 0), loop, {0.5, 0.1, 0.02});
  CHECK(a.attached);
  CHECK(a.witnesses.size() == 3);

  auto sph = builtin_field("sphere-morse-smale");
  std::vector<Vec> tail;
  for (double z = -0.999; z < -0.9; z += 0.001) tail.push_back(v3(std::sqrt(1 - z * z), 0, z));
  CHECK(is_attached(sph, v3(0, 0, -1), tail, {0.3, 0.1, 0.05}).attached);

  std::vector<Vec> far{v2(1.0, 0.5), v2(-0.7, 0.6)};
  CHECK_FALSE(is_attached(f, v2(0, 0), far, {0.1}).attached);
  CHECK_THROWS_AS(is_attached(f, v2(0, 0), {}, {0.1}), PreconditionError);
  CHECK_THROWS_AS(is_attached(f, v2(0, 0), far, {0.1, 0.2}), PreconditionError);
}
