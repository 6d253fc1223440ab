#include <doctest.h>

#include "orbitshade/chain_recurrence.hpp"

#include <cmath>
#include <random>
#include <set>

using namespace orbitshade;

namespace {
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

Vec duffing_loop(double t) {
  const double s = 1 / std::cosh(t / 2);
  return v2(1.5 * s * s, -1.5 * s * s * std::tanh(t / 2));
}

// refining never merges two coarse classes
bool no_merges(const ChainRecurrenceResult& coarse, const ChainRecurrenceResult& fine) {
  for (const auto& cls : fine.classes) {
    std::set<int> parents;
    for (long id : cls) {
      const int c = coarse.class_of_point(fine.center(id));
      if (c >= 0) parents.insert(c);
    }
    if (parents.size() > 1) return false;
  }
  return true;
}
}  // namespace

TEST_CASE("tarjan matches reachability on random graphs") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::vector<std::vector<int>> adj(n);
    std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (rng() % 5 == 0) {
          adj[a].push_back(b);
          reach[a][b] = 1;
        }
    for (int k = 0; k < n; ++k)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          if (reach[a][k] && reach[k][b]) reach[a][b] = 1;
    auto comps = strongly_connected_components(adj);
    std::vector<int> comp_of(n, -1);
    int total = 0;
    for (std::size_t c = 0; c < comps.size(); ++c)
      for (int v : comps[c]) {
        comp_of[v] = static_cast<int>(c);
        ++total;
      }
    CHECK(total == n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (a != b) CHECK((comp_of[a] == comp_of[b]) == (reach[a][b] && reach[b][a]));
  }
}

TEST_CASE("grid indexing") {
  ChainRecurrenceResult g;
  g.lo = v2(-1, -1);
  g.box_size = 0.5;
  g.shape = {4, 4};
  CHECK(g.box_of(v2(-0.9, -0.9)) == 0);
  CHECK(g.box_of(v2(0.9, -0.9)) == 12);
  CHECK(g.box_of(v2(1.1, 0)) == -1);
  CHECK((g.center(5) - v2(-0.25, -0.25)).norm() < 1e-15);
}

TEST_CASE("linear saddle: only the origin is chain recurrent") {
  auto f = builtin_field("linear-saddle-2d");
  auto cr = chain_recurrence_classes(f, Region::cube(2, 0.5), 0.02);
  REQUIRE(cr.classes.size() == 1);
  CHECK(cr.class_of_point(v2(0, 0)) == 0);
  for (long id : cr.classes[0]) CHECK(cr.center(id).norm() < 0.02);
  CHECK(cr.class_of_point(v2(0.1, 0.0)) == -1);
  CHECK(cr.failed_boxes.empty());
  // R-variant with a gauge vanishing at the origin
  ChainRecurrenceOptions opt;
  opt.gauge = GaugeFunction::linear(f, {v2(0, 0)}, 0.1, 0.002);
  auto rr = chain_recurrence_classes(f, Region::cube(2, 0.5), 0.02, opt);
  REQUIRE(rr.classes.size() == 1);
  CHECK(rr.class_of_point(v2(0, 0)) == 0);
}

TEST_CASE("duffing: loop and origin share a class") {
  auto f = builtin_field("duffing-saddle");
  const Region reg{v2(-0.5, -0.5), v2(2, 2)};
  auto cr = chain_recurrence_classes(f, reg, 0.02);
  REQUIRE(cr.classes.size() == 1);
  const int c = cr.class_of_point(v2(1e-9, 1e-9));
  REQUIRE(c == 0);
  int inside = 0;
  for (double t = -12; t <= 12; t += 0.25) {
    const Vec p = duffing_loop(t);
    if (!reg.contains(p, 0.0)) continue;  // the loop dips to y = -0.577
    ++inside;
    CHECK(cr.class_of_point(p) == c);
  }
  CHECK(inside > 80);
  CHECK(cr.class_of_point(v2(1, 0)) == c);
  // an escaping orbit on the left is transient
  CHECK(cr.class_of_point(v2(-0.4, -0.3)) == -1);
}

TEST_CASE("sphere gradient field: the two poles only") {
  auto f = builtin_field("sphere-morse-smale");
  Region reg = Region::cube(3, 1.1);
  auto coarse = chain_recurrence_classes(f, reg, 0.1);
  auto fine = chain_recurrence_classes(f, reg, 0.05);
  for (const auto* cr : {&coarse, &fine}) {
    REQUIRE(cr->classes.size() == 2);
    const int n = cr->class_of_point((Vec(3) << 0.01, 0.01, std::sqrt(1 - 2e-4)).finished());
    const int s = cr->class_of_point((Vec(3) << 0.01, 0.01, -std::sqrt(1 - 2e-4)).finished());
    CHECK(n >= 0);
    CHECK(s >= 0);
    CHECK(n != s);
    for (const auto& cls : cr->classes)
      for (long id : cls) CHECK(std::fabs(std::fabs(cr->center(id)[2]) - 1) < 0.1);
  }
  CHECK(no_merges(coarse, fine));
}

TEST_CASE("chain recurrence preconditions") {
  auto f = builtin_field("linear-saddle-2d");
  CHECK_THROWS_AS(chain_recurrence_classes(f, Region::cube(2, 1), 0.0), PreconditionError);
  ChainRecurrenceOptions opt;
  opt.T = 0.5;
  CHECK_THROWS_AS(chain_recurrence_classes(f, Region::cube(2, 1), 0.1, opt), PreconditionError);
  CHECK_THROWS_AS(chain_recurrence_classes(f, Region::cube(3, 1), 0.1), DimensionError);
}
