#include <doctest.h>

#include "orbitshade/integrator.hpp"

#include <cmath>
#include <random>

using namespace orbitshade;

namespace {
Vec v1(double a) { return (Vec(1) << a).finished(); }
}  // namespace

TEST_CASE("zero duration is the identity") {
  auto f = builtin_field("lorenz");
  const Vec x = (Vec(3) << 1.2, -3.4, 5.6).finished();
  CHECK(flow(f, x, 0.0) == x);
}

TEST_CASE("linear decay matches closed form") {
  auto f = parse_field_definition("x' = -x");
  CHECK(flow(f, v1(1.0), 1.0)[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
  CHECK(flow(f, v1(1.0), -2.0)[0] == doctest::Approx(std::exp(2.0)).epsilon(1e-9));
  auto tr = flow_trajectory(f, v1(1.0), 1.0, 0.5);
  REQUIRE(tr.size() == 3);
  CHECK(tr.times[1] == doctest::Approx(0.5));
  CHECK(tr.points[1][0] == doctest::Approx(std::exp(-0.5)).epsilon(1e-8));
  CHECK(tr.points[2][0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
}

TEST_CASE("window equal to the output step gives two samples") {
  auto f = parse_field_definition("x' = -x");
  auto tr = flow_trajectory(f, v1(1.0), 0.3, 0.3);
  CHECK(tr.size() == 2);
  auto tr2 = flow_trajectory(f, v1(1.0), 1.0, 0.1);
  CHECK(tr2.size() == 11);
  for (std::size_t i = 1; i < tr2.size(); ++i) CHECK(tr2.times[i] > tr2.times[i - 1]);
}

TEST_CASE("trajectory endpoint matches flow") {
  auto f = builtin_field("duffing-saddle");
  const Vec x = (Vec(2) << 0.3, 0.1).finished();
  auto tr = flow_trajectory(f, x, 3.7, 0.01);
  CHECK((tr.points.back() - flow(f, x, 3.7)).norm() <= 10 * kDefaultTol);
}

TEST_CASE("dense output is accurate between steps") {
  auto f = parse_field_definition("x' = y; y' = -x");
  const Vec x = (Vec(2) << 1.0, 0.0).finished();
  auto tr = flow_trajectory(f, x, 10.0, 0.037);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double t = tr.times[i];
    CHECK(std::fabs(tr.points[i][0] - std::cos(t)) < 1e-8);
    CHECK(std::fabs(tr.points[i][1] + std::sin(t)) < 1e-8);
  }
}

TEST_CASE("blow-up is reported with the last valid time") {
  auto f = parse_field_definition("x' = x^2");
  try {
    flow(f, v1(1.0), 2.0);
    FAIL("expected blow-up");
  } catch (const IntegrationError& e) {
    CHECK(e.last_time() < 1.0);
    CHECK(e.last_time() > 0.99);
  }
  CHECK_THROWS_AS(flow_trajectory(f, v1(1.0), 2.0, 0.1), IntegrationError);
}

TEST_CASE("semigroup and reversibility on the catalog") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ut(-10, 10);
  const double tol = 1e-9;
  struct Case {
    const char* id;
    Vec x;
  };
  std::vector<Case> cases{
      {"linear-saddle-2d", (Vec(2) << 0.3, 1e-4).finished()},
      {"linear-saddle-3d", (Vec(3) << 0.2, 0.1, 1e-4).finished()},
      {"duffing-saddle", (Vec(2) << 0.5, 0.0).finished()},  // periodic orbit inside the loop
      {"lorenz", (Vec(3) << 1.0, 1.0, 20.0).finished()},
      {"sphere-morse-smale", (Vec(3) << 0.6, 0.0, 0.8).finished()},
      {"saddle-with-return", (Vec(2) << 0.8, 0.0).finished()},
  };
  for (const auto& c : cases) {
    auto f = builtin_field(c.id);
    const std::string id = c.id;
    // Lorenz is chaotic with strong volume contraction; the backward flow
    // amplifies errors by about exp(14 t), so its windows are short.
    const double lim = id == "lorenz" ? 0.1 : 10.0;
    // Round trips through an expanding direction amplify the forward error
    // by the expansion factor; keep that factor O(1).
    const double rev = (id == "duffing-saddle" || id == "saddle-with-return") ? 10.0 : std::min(lim, 1.0);
    for (int k = 0; k < 5; ++k) {
      const double s = ut(rng) * lim / 10, t = ut(rng) * lim / 10;
      const Vec a = flow(f, flow(f, c.x, s, tol), t, tol);
      const Vec b = flow(f, c.x, s + t, tol);
      const double scale = std::max(1.0, b.norm());
      CHECK_MESSAGE((a - b).norm() <= 10 * tol * scale, id);
      const double tr = ut(rng) * rev / 10;
      const Vec back = flow(f, flow(f, c.x, tr, tol), -tr, tol);
      CHECK_MESSAGE((back - c.x).norm() <= 10 * tol * std::max(1.0, c.x.norm()), id);
    }
  }
}

TEST_CASE("sphere constraint is preserved") {
  auto f = builtin_field("sphere-morse-smale");
  const Vec x = (Vec(3) << 0.1, 0.2, std::sqrt(1 - 0.05)).finished();
  auto tr = flow_trajectory(f, x, 100.0, 0.5);
  for (const auto& p : tr.points) CHECK(std::fabs(p.norm() - 1.0) <= 1e-8);
  auto g = parse_field_definition("constraint sphere; x' = y; y' = -x + z; z' = 0.5");
  auto tr2 = flow_trajectory(g, x, 100.0, 0.5);
  for (const auto& p : tr2.points) CHECK(std::fabs(p.norm() - 1.0) <= 1e-8);
}

TEST_CASE("events are refined to the root") {
  auto f = parse_field_definition("x' = 1");
  std::vector<EventCrossing> hits;
  IntegratorOptions opt;
  integrate(f, v1(0.0), 3.0, opt, [&](const DenseSegment& seg) {
    auto ev = find_events(seg, [](const Vec& x) { return std::sin(3.0 * x[0]); });
    hits.insert(hits.end(), ev.begin(), ev.end());
    return true;
  });
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].t == doctest::Approx(M_PI / 3).epsilon(1e-12));
  CHECK(hits[0].direction == -1);
  CHECK(hits[1].t == doctest::Approx(2 * M_PI / 3).epsilon(1e-12));
  CHECK(hits[1].direction == +1);
}

TEST_CASE("observer can stop integration") {
  auto f = parse_field_definition("x' = 1");
  IntegratorOptions opt;
  auto res = integrate(f, v1(0.0), 100.0, opt, [](const DenseSegment& seg) { return seg.t1 < 2.0; });
  CHECK(res.stopped);
  CHECK(res.time >= 2.0);
  CHECK(res.time < 100.0);
  CHECK(res.state[0] == doctest::Approx(res.time));
}
