#include "doctest.h"

#include "orbitshade/shadowing.hpp"

#include <cmath>
#include <random>

using namespace orbitshade;

namespace {
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

// random valid delta-1-pseudo-orbit: flow t_i, then kick by at most 0.9 delta
PseudoOrbit kicked_chain(const VectorFieldDef& f, Vec x, int segments, double delta, std::mt19937_64& rng,
                         double tmin = 1.0, double tmax = 2.0) {
  std::uniform_real_distribution<double> T(tmin, tmax), u(-1.0, 1.0);
  PseudoOrbit po;
  po.delta = delta;
  po.T = std::min(1.0, tmin);
  for (int i = 0; i < segments; ++i) {
    const double t = T(rng);
    po.entries.push_back({x, t});
    Vec next = flow(f, x, t, 1e-12);
    Vec kick(next.size());
    for (Eigen::Index k = 0; k < kick.size(); ++k) kick[k] = u(rng);
    next += 0.9 * delta * rng() / static_cast<double>(std::mt19937_64::max()) * kick.normalized();
    if (f.constraint() == Constraint::UnitSphere) {
      next = f.project(next);
      // projection can stretch the kick slightly; pull back toward the flow point
      const Vec exact = flow(f, x, t, 1e-12);
      while (f.distance(next, exact) > 0.95 * delta) next = f.project(exact + 0.5 * (next - exact));
    }
    x = next;
  }
  return po;
}

Vec random_sphere_point(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec p(3);
  p << g(rng), g(rng), g(rng);
  return p.normalized();
}
}  // namespace

TEST_CASE("sample_orbit matches flow") {
  auto f = builtin_field("duffing-saddle");
  const Vec x = v2(0.3, -0.2);
  const std::vector<double> ts{0.0, 0.5, 1.0, 1.7};
  const auto pts = sample_orbit(f, x, ts, 1e-11);
  REQUIRE(pts.size() == ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k) CHECK((pts[k] - flow(f, x, ts[k], 1e-11)).norm() < 1e-9);
  const std::vector<double> back{0.0, -0.3, -1.2};
  const auto bp = sample_orbit(f, x, back, 1e-11);
  for (std::size_t k = 0; k < back.size(); ++k) CHECK((bp[k] - flow(f, x, back[k], 1e-11)).norm() < 1e-9);
}

TEST_CASE("shadow settings") {
  auto f = builtin_field("duffing-saddle");
  auto po = slice_orbit(f, v2(0.3, 0.1), {1.0, 1.5}, 1e-3);
  auto s = shadow_settings(f, po);
  CHECK(s.dt == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(s.samples == 251);
  CHECK(s.tol == kDefaultTol);
  CHECK_FALSE(s.tail_before);
  auto short_po = slice_orbit(f, v2(0.3, 0.1), {0.2, 1.0}, 1e-3);
  CHECK(shadow_settings(f, short_po).dt <= 0.004);

  const Vec x0 = v2(0.9e-3, 0);
  auto period = first_return_time(f, x0, 100, 1.0, 1e-2, 1e-11);
  REQUIRE(period);
  auto chain = build_loop_multiplication_chain(f, v2(0, 0), x0, *period, 1, 1, 1e-3);
  auto t = shadow_settings(f, chain);
  CHECK(t.tail_before);
  CHECK(t.tail_after);
  CHECK(t.tail_horizon == doctest::Approx(20.0).epsilon(1e-6));  // lambda = 1 for x - x^2
  CHECK(t.tol == 1e-13);
  CHECK(t.span == doctest::Approx(2 * *period));
  CHECK(reference_path(f, chain, t).size() == static_cast<std::size_t>(t.samples));
}

TEST_CASE("self-shadowing of sliced orbits") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> T(0.5, 1.5);
  struct Case {
    const char* id;
    Vec x;
  };
  std::vector<Case> cases{{"duffing-saddle", v2(0.3, 0.1)},
                          {"saddle-with-return", v2(0.2, 0.5)},
                          {"lorenz", (Vec(3) << 1.0, 2.0, 20.0).finished()}};
  for (const auto& c : cases) {
    auto f = builtin_field(c.id);
    auto po = slice_orbit(f, c.x, {T(rng), T(rng), T(rng)}, 1e-6);
    const double eps = 100 * kDefaultTol;
    auto r = shadow_search(f, po, eps);
    CAPTURE(c.id);
    CHECK(r.found());
    CHECK(r.witness_y == c.x);
    CHECK(r.warp.valid());
    CHECK(r.warp.max_deviation() <= 2 * r.settings.dt);
    CHECK(r.achieved <= 10 * kDefaultTol);
    const double audit = verify_shadow(f, r.witness_y, r.warp, po, ShadowRule::plain(), r.settings);
    CHECK(std::abs(audit - r.achieved) <= 10 * kDefaultTol);
  }
}

TEST_CASE("estimate of a sliced orbit and determinism") {
  auto f = builtin_field("saddle-with-return");
  auto po = slice_orbit(f, v2(0.4, 0.3), {1.0, 0.8}, 1e-3);
  SearchOptions so;
  so.budget = 20;
  auto a = shadowing_distance_estimate(f, po, ShadowRule::plain(), so);
  auto b = shadowing_distance_estimate(f, po, ShadowRule::plain(), so);
  CHECK(a.status == ShadowStatus::Estimate);
  CHECK(a.achieved <= 10 * kDefaultTol);
  CHECK(a.achieved == b.achieved);
  CHECK(a.witness_y == b.witness_y);
  CHECK(a.budget_spent == 20);
}

TEST_CASE("sphere control chains are shadowed") {
  auto f = builtin_field("sphere-morse-smale");
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    auto po = kicked_chain(f, random_sphere_point(rng), 30, 1e-3, rng);
    REQUIRE(validate(f, po).valid);
    auto r = shadow_search(f, po, 0.1);
    CHECK(r.found());
    CHECK(r.achieved <= 0.1);
    const double audit = verify_shadow(f, r.witness_y, r.warp, po, ShadowRule::plain(), r.settings);
    CHECK(std::abs(audit - r.achieved) <= 10 * kDefaultTol);
  }
}

TEST_CASE("loop seed chain: manifold witness, crossings, audit") {
  auto f = builtin_field("duffing-saddle");
  const Vec x0 = v2(0.9e-3, 0);
  auto period = first_return_time(f, x0, 100, 1.0, 1e-2, 1e-11);
  REQUIRE(period);
  auto chain = build_loop_multiplication_chain(f, v2(0, 0), x0, *period, 0, 1, 1e-3);
  SearchOptions so;
  so.box = make_box(f, v2(0, 0), classify_singularity(f, v2(0, 0)), 0.1);
  so.budget = 40;
  auto r = shadowing_distance_estimate(f, chain, ShadowRule::plain(), so);
  CHECK(r.achieved < 5e-3);
  REQUIRE(r.crossing_count_of_witness);
  CHECK(*r.crossing_count_of_witness == 2);
  const double audit = verify_shadow(f, r.witness_y, r.warp, chain, ShadowRule::plain(), r.settings);
  CHECK(std::abs(audit - r.achieved) <= 10 * kDefaultTol);
  // identity warp does worse than the optimized one
  const double ident = verify_shadow(f, r.witness_y, Reparametrization::identity(), chain, ShadowRule::plain(),
                                     r.settings);
  CHECK(ident > audit);
}

TEST_CASE("corrupted warps are rejected") {
  auto f = builtin_field("duffing-saddle");
  auto po = slice_orbit(f, v2(0.3, 0.1), {1.0}, 1e-3);
  auto s = shadow_settings(f, po);
  Reparametrization bad{{{0.0, 0.0}, {0.5, 0.6}, {0.7, 0.4}}};
  CHECK_THROWS_AS(verify_shadow(f, v2(0.3, 0.1), bad, po, ShadowRule::plain(), s), PreconditionError);
  Reparametrization steep{{{0.0, 0.0}, {0.5, 1.0}}};
  CHECK_NOTHROW(verify_shadow(f, v2(0.3, 0.1), steep, po, ShadowRule::plain(), s));
  CHECK_THROWS_AS(verify_shadow(f, v2(0.3, 0.1), steep, po, ShadowRule::strong(0.1), s), PreconditionError);
}

TEST_CASE("strong rule never beats the plain rule") {
  auto f = builtin_field("saddle-with-return");
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (int trial = 0; trial < 4; ++trial) {
    auto po = kicked_chain(f, v2(u(rng), u(rng)), 3, 1e-2, rng, 0.5, 1.0);
    REQUIRE(validate(f, po).valid);
    SearchOptions so;
    so.budget = 30;
    auto p = shadowing_distance_estimate(f, po, ShadowRule::plain(), so);
    auto s = shadowing_distance_estimate(f, po, ShadowRule::strong(0.05), so);
    CAPTURE(trial);
    CHECK(s.achieved >= p.achieved);
    CHECK(s.warp.satisfies_slope(0.05));
    CHECK(std::abs(verify_shadow(f, s.witness_y, s.warp, po, ShadowRule::strong(0.05), s.settings) - s.achieved) <=
          10 * kDefaultTol);
  }
}

TEST_CASE("rescaled rule on an all-regular gauge chain") {
  auto f = builtin_field("saddle-with-return");
  auto box = make_box(f, v2(0, 0), classify_singularity(f, v2(0, 0)), 0.1);
  auto gauge = GaugeFunction::linear(f, {v2(0, 0), v2(1, 0), v2(-1, 0)});
  auto chain = build_rescaled_chain(f, box, gauge);
  SearchOptions so;
  so.budget = 30;
  auto rule = ShadowRule::rescaled(gauge);
  auto r = shadow_search(f, chain.orbit, 1.0, rule, so);
  CHECK(r.rule == "rescaled");
  CHECK(r.budget_spent <= 30);
  if (std::isfinite(r.achieved)) {
    const double audit = verify_shadow(f, r.witness_y, r.warp, chain.orbit, rule, r.settings);
    CHECK(std::abs(audit - r.achieved) <= 10 * kDefaultTol * std::max(1.0, r.achieved));
  }
  CHECK(r.found() == (r.achieved <= 1.0));
  CHECK_THROWS_AS(shadow_search(f, chain.orbit, 1.0, ShadowRule{ShadowRuleKind::Rescaled, 0.0, std::nullopt}, so),
                  PreconditionError);
}

TEST_CASE("escaping candidates score infinity instead of throwing") {
  auto f = builtin_field("duffing-saddle");
  auto po = slice_orbit(f, v2(-0.3, 0.0), {1.0, 1.0}, 1e-3);
  SearchOptions so;
  so.seed_radius = 3.0;
  so.seed_count = 12;
  so.budget = 20;
  ShadowingResult r;
  CHECK_NOTHROW(r = shadowing_distance_estimate(f, po, ShadowRule::plain(), so));
  CHECK(std::isfinite(r.achieved));
}

TEST_CASE("search preconditions") {
  auto f = builtin_field("duffing-saddle");
  auto po = slice_orbit(f, v2(0.3, 0.1), {1.0, 1.0}, 1e-3);
  SearchOptions zero;
  zero.budget = 0;
  CHECK_THROWS_AS(shadow_search(f, po, 0.1, ShadowRule::plain(), zero), PreconditionError);
  CHECK_THROWS_AS(shadow_search(f, po, 0.0), PreconditionError);
  PseudoOrbit broken = po;
  broken.entries[1].x += v2(0.5, 0.0);
  CHECK_THROWS_AS(shadow_search(f, broken, 0.1), PreconditionError);
}
