#include <doctest.h>

#include "orbitshade/field.hpp"

#include <cmath>
#include <random>

using namespace orbitshade;

namespace {
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

Vec random_point(const VectorFieldDef& f, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec x(f.dimension());
  for (auto& c : x) c = u(rng);
  if (f.constraint() == Constraint::UnitSphere) x.normalize();
  return x;
}
}  // namespace

TEST_CASE("duffing text parses and evaluates by hand") {
  auto f = parse_field_definition("x' = y; y' = x - x^2");
  REQUIRE(f.dimension() == 2);
  CHECK(f.evaluate(v2(0, 0)).norm() == 0.0);
  const Vec v = f.evaluate(v2(1.5, 0));
  CHECK(v[0] == 0.0);
  CHECK(v[1] == doctest::Approx(1.5 - 2.25));
}

TEST_CASE("lorenz with parameters") {
  auto f = parse_field_definition("x' = s*(y-x); y' = x*(r-z)-y; z' = x*y-b*z", {{"s", 10}, {"r", 28}, {"b", 8.0 / 3}});
  REQUIRE(f.dimension() == 3);
  CHECK(f.evaluate(v3(0, 0, 0)).norm() == 0.0);
  const Vec v = f.evaluate(v3(1, 2, 3));
  CHECK(v[0] == doctest::Approx(10.0));
  CHECK(v[1] == doctest::Approx(1 * 25 - 2));
  CHECK(v[2] == doctest::Approx(2 - 8.0));
  auto g = builtin_field("lorenz");
  CHECK((g.evaluate(v3(1, 2, 3)) - v).norm() < 1e-14);
  CHECK(g.parameter("b") == doctest::Approx(8.0 / 3));
}

TEST_CASE("precedence and whitespace") {
  auto f = parse_field_definition("  x'=-x^2+2*3 ;y' =  2^3^2 - x / 4 / 2\n# trailing comment\n");
  const Vec v = f.evaluate(v2(3, 0));
  CHECK(v[0] == doctest::Approx(-9 + 6));
  CHECK(v[1] == doctest::Approx(512 - 3.0 / 8));
}

TEST_CASE("syntax errors report position") {
  try {
    parse_field_definition("x' = y +");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
    CHECK(e.column() == 9);
  }
  try {
    parse_field_definition("x' = y\ny' = (x");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_field_definition("x' = y $ 2"), ParseError);
  CHECK_THROWS_AS(parse_field_definition("x"), ParseError);
  CHECK_THROWS_AS(parse_field_definition("param"), ParseError);
}

TEST_CASE("unknown symbols and dimension problems") {
  try {
    parse_field_definition("x' = y; y' = w");
    FAIL("expected unknown symbol");
  } catch (const UnknownSymbolError& e) {
    CHECK(e.symbol() == "w");
    CHECK(e.column() == 14);
  }
  CHECK_THROWS_AS(parse_field_definition("x' = 1; x' = 2"), DimensionError);
  CHECK_THROWS_AS(parse_field_definition("constraint sphere; x' = y; y' = x"), DimensionError);
  CHECK_THROWS_AS(parse_field_definition("param a = 1"), DimensionError);
  CHECK_THROWS_AS(builtin_field("duffing-saddle").evaluate(v3(0, 0, 0)), DimensionError);
}

TEST_CASE("non-finite evaluation is an error") {
  auto f = parse_field_definition("x' = 1/x");
  CHECK_THROWS_AS(f.evaluate((Vec(1) << 0.0).finished()), FieldError);
}

TEST_CASE("jacobian examples") {
  auto f = builtin_field("duffing-saddle");
  Mat j0 = f.jacobian(v2(0, 0));
  CHECK(j0(0, 0) == 0);
  CHECK(j0(0, 1) == 1);
  CHECK(j0(1, 0) == 1);
  CHECK(j0(1, 1) == 0);
  Mat j1 = f.jacobian(v2(1, 0));
  CHECK(j1(1, 0) == -1);
  auto lin = parse_field_definition("x' = 2*x - y; y' = 3*y");
  Mat a(2, 2);
  a << 2, -1, 0, 3;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 5; ++i) CHECK((lin.jacobian(random_point(lin, rng, 5)) - a).norm() == 0.0);
}

TEST_CASE("symbolic jacobian matches finite differences on every builtin") {
  std::mt19937_64 rng(2024);
  for (const auto& id : builtin_ids()) {
    auto f = builtin_field(id);
    for (int i = 0; i < 50; ++i) {
      const Vec x = random_point(f, rng, id == "lorenz" ? 20.0 : 2.0);
      const Mat js = f.jacobian(x);
      const Mat jf = jacobian_fd(f, x);
      const double scale = std::max(1.0, js.norm());
      CHECK_MESSAGE((js - jf).norm() <= 1e-5 * scale, id);
    }
  }
}

TEST_CASE("print then parse round-trips") {
  std::mt19937_64 rng(99);
  std::vector<std::string> sources{"x' = sin(x)*exp(-y/3) - sqrt(1 + x^2); y' = tanh(x - 2*y) + log(2 + cos(y))",
                                   "param a = -0.3; param k = a*2; x' = k*x - (-2)*y^3; y' = -a/(1 + x^2)"};
  for (const auto& id : builtin_ids()) sources.push_back(*builtin_source(id));
  for (const auto& src : sources) {
    auto f = parse_field_definition(src);
    auto g = parse_field_definition(print_field_definition(f));
    REQUIRE(g.dimension() == f.dimension());
    CHECK(g.constraint() == f.constraint());
    for (int i = 0; i < 100; ++i) {
      const Vec x = random_point(f, rng, 2.0);
      const Vec a = f.evaluate(x), b = g.evaluate(x);
      CHECK((a - b).lpNorm<Eigen::Infinity>() <= 1e-14 * std::max(1.0, a.lpNorm<Eigen::Infinity>()));
    }
  }
}

TEST_CASE("sphere field is tangent") {
  auto f = builtin_field("sphere-morse-smale");
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const Vec x = random_point(f, rng, 1.0);
    CHECK(std::fabs(x.dot(f.evaluate(x))) <= 1e-12);
  }
  // A field that is not tangent on its own still gets projected.
  auto g = parse_field_definition("constraint sphere; x' = 1; y' = x*y; z' = z + 3");
  for (int i = 0; i < 200; ++i) {
    const Vec x = random_point(g, rng, 1.0);
    CHECK(std::fabs(x.dot(g.evaluate(x))) <= 1e-12);
  }
  CHECK(f.evaluate(v3(0, 0, 1)).norm() == 0.0);
  CHECK(f.evaluate(v3(0, 0, -1)).norm() == 0.0);
}

TEST_CASE("great-circle distance") {
  auto f = builtin_field("sphere-morse-smale");
  CHECK(f.distance(v3(0, 0, 1), v3(0, 0, -1)) == doctest::Approx(M_PI));
  CHECK(f.distance(v3(1, 0, 0), v3(0, 1, 0)) == doctest::Approx(M_PI / 2));
}

TEST_CASE("orthogonal conjugation") {
  auto f = builtin_field("duffing-saddle");
  const double c = std::cos(0.7), s = std::sin(0.7);
  Mat q(2, 2);
  q << c, -s, s, c;
  auto g = conjugate_by_orthogonal(f, q);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20; ++i) {
    const Vec x = random_point(f, rng, 2.0);
    CHECK((g.evaluate(q * x) - q * f.evaluate(x)).norm() < 1e-13);
  }
}

TEST_CASE("with_parameter changes a copy only") {
  auto f = builtin_field("lorenz");
  auto g = f.with_parameter("r", 10.0);
  CHECK(f.parameter("r") == 28.0);
  CHECK(g.parameter("r") == 10.0);
  CHECK(g.builtin_id() == "lorenz");
  CHECK_THROWS_AS(f.with_parameter("nope", 1.0), PreconditionError);
}

TEST_CASE("tangent basis is orthonormal and orthogonal to x") {
  const Vec x = v3(0.3, -0.4, 0.8).normalized();
  const Mat b = sphere_tangent_basis(x);
  CHECK((b.transpose() * b - Mat::Identity(2, 2)).norm() < 1e-14);
  CHECK((b.transpose() * x).norm() < 1e-14);
}
