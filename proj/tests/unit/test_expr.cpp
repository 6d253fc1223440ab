#include <doctest.h>

#include "orbitshade/expr.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace orbitshade::expr;

namespace {
// ((x0 * x1) ^ 2 - sin(x0)) / (1 + exp(x1))
NodePtr sample_tree() {
  auto x0 = variable(0), x1 = variable(1);
  auto num = sub(pow(mul(x0, x1), number(2)), call(Func::Sin, x0));
  auto den = add(number(1), call(Func::Exp, x1));
  return div(num, den);
}
}  // namespace

TEST_CASE("constant folding and identities") {
  CHECK(add(number(2), number(3))->value == 5.0);
  CHECK(mul(variable(0), number(0))->op == Op::Num);
  CHECK(mul(number(1), variable(0))->op == Op::Var);
  CHECK(negate(negate(variable(1)))->op == Op::Var);
  CHECK(pow(number(2), number(10))->value == 1024.0);
}

TEST_CASE("program agrees with tree evaluation") {
  auto e = sample_tree();
  Program p(e, {});
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 200; ++i) {
    double v[2] = {u(rng), u(rng)};
    const double a = evaluate(*e, v, {});
    const double b = p.run(v);
    CHECK(b == doctest::Approx(a).epsilon(1e-14));
  }
}

TEST_CASE("symbolic derivative matches central difference") {
  auto e = sample_tree();
  auto d0 = differentiate(e, 0);
  auto d1 = differentiate(e, 1);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> v{u(rng), u(rng)};
    const double h = 1e-6;
    for (int k = 0; k < 2; ++k) {
      auto vp = v, vm = v;
      vp[k] += h;
      vm[k] -= h;
      const double fd = (evaluate(*e, vp, {}) - evaluate(*e, vm, {})) / (2 * h);
      const double sym = evaluate(*(k == 0 ? d0 : d1), v, {});
      CHECK(sym == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("parameters are bound at compile time") {
  auto e = mul(parameter(0), variable(0));
  std::vector<double> params{2.5};
  Program p(e, params);
  double x = 4.0;
  CHECK(p.run(&x) == 10.0);
}

TEST_CASE("deep trees use the heap stack") {
  NodePtr e = variable(0);
  // right-leaning chain forces a deep evaluation stack
  for (int i = 0; i < 100; ++i) e = add(variable(0), e);
  Program p(e, {});
  double x = 1.0;
  CHECK(p.run(&x) == 101.0);
}

TEST_CASE("substitution") {
  auto e = add(variable(0), mul(number(3), variable(1)));
  auto s = substitute(e, {variable(1), number(2)});
  double v[2] = {5.0, -1.0};
  CHECK(evaluate(*s, v, {}) == doctest::Approx(-1.0 + 6.0));
}
