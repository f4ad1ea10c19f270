#include <cmath>
#include <random>

#include "doctest.h"
#include "finsler/expr.hpp"
#include "oracles.hpp"

using namespace finsler;
using namespace finsler::dsl;

TEST_CASE("parse and evaluate the Euclidean quadratic") {
  NodePtr e = parse("0.5*(y1^2 + y2^2)", 2);
  std::vector<double> xy{0.0, 0.0, 3.0, 4.0};
  CHECK(evaluate_real(*e, xy) == doctest::Approx(12.5));
}

TEST_CASE("variable index out of range is a parse error") {
  CHECK_THROWS_AS(parse("y3", 2), ParseError);
  try {
    parse("y1 + y3", 2);
  } catch (const ParseError& err) {
    CHECK(err.offset == 5);
  }
}

TEST_CASE("syntax errors carry byte offsets") {
  CHECK_THROWS_AS(parse("", 2), ParseError);
  CHECK_THROWS_AS(parse("1 +", 2), ParseError);
  CHECK_THROWS_AS(parse("foo(y1)", 2), ParseError);
  CHECK_THROWS_AS(parse("y1^y2", 2), ParseError);  // exponents must be literals
  CHECK_THROWS_AS(parse("(y1", 2), ParseError);
  CHECK_THROWS_AS(parse("y1 y2", 2), ParseError);
}

TEST_CASE("Randers-type expression value") {
  NodePtr e = parse("0.5*(sqrt(y1^2+y2^2) + 0.3*y1)^2", 2);
  std::vector<double> xy{0.0, 0.0, 1.0, 0.0};
  CHECK(evaluate_real(*e, xy) == doctest::Approx(0.845).epsilon(1e-12));
}

TEST_CASE("precedence: pow > unary minus > mul/div > add/sub, left assoc") {
  std::vector<double> xy{2.0, 0.0, 3.0, 1.0};  // x1=2, y1=3
  CHECK(evaluate_real(*parse("-x1^2", 2), xy) == doctest::Approx(-4.0));
  CHECK(evaluate_real(*parse("2 - 3 - 4", 2), xy) == doctest::Approx(-5.0));
  CHECK(evaluate_real(*parse("12/2/3", 2), xy) == doctest::Approx(2.0));
  CHECK(evaluate_real(*parse("1 + 2*x1^2", 2), xy) == doctest::Approx(9.0));
  CHECK(evaluate_real(*parse("x1^2^3", 2), xy) == doctest::Approx(64.0));  // (x1^2)^3
  CHECK(evaluate_real(*parse("2*-x1", 2), xy) == doctest::Approx(-4.0));
  CHECK(evaluate_real(*parse("y1^-1", 2), xy) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("whitespace insensitivity") {
  NodePtr a = parse("0.5*(y1^2+y2^2)", 2);
  NodePtr b = parse("  0.5 * ( y1 ^ 2\t+ y2 ^ 2 ) ", 2);
  CHECK(structurally_equal(a, b));
}

TEST_CASE("parse . print . parse is the identity on ASTs") {
  std::mt19937_64 rng(99);
  const int n = 2;
  // random trees over the full grammar
  std::uniform_int_distribution<int> pick(0, 7);
  std::uniform_real_distribution<double> lit(-3.0, 3.0);
  std::function<NodePtr(int)> gen = [&](int depth) -> NodePtr {
    if (depth <= 0 || pick(rng) == 0) {
      if (pick(rng) < 4) return number(lit(rng));
      return variable(std::uniform_int_distribution<int>(0, 2 * n - 1)(rng));
    }
    switch (pick(rng)) {
      case 0:
      case 1: return add(gen(depth - 1), gen(depth - 1));
      case 2: return sub(gen(depth - 1), gen(depth - 1));
      case 3: return mul(gen(depth - 1), gen(depth - 1));
      case 4: return div(gen(depth - 1), gen(depth - 1));
      case 5: return neg(gen(depth - 1));
      case 6: return sqrt_of(gen(depth - 1));
      default: return pow_of(gen(depth - 1), double(std::uniform_int_distribution<int>(-3, 5)(rng)));
    }
  };
  for (int trial = 0; trial < 200; ++trial) {
    NodePtr e = gen(4);
    std::string s = to_string(e, n);
    NodePtr e2 = parse(s, n);
    CHECK(structurally_equal(e, e2));
    // and printing is stable
    CHECK(to_string(e2, n) == s);
  }
}

TEST_CASE("shadow consistency: real evaluation equals jet value part exactly") {
  std::mt19937_64 rng(5);
  const int n = 2;
  std::vector<double> base{0.7, -0.4, 1.4, 0.8};
  auto ctx = make_context(n, 3, base);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = oracles::random_poly(2 * n, 3, 5, rng);
    NodePtr e = parse(p.to_expr(n), n);
    double real = evaluate_real(*e, base);
    Jet jet = evaluate_jet(*e, ctx);
    CHECK(jet.value() == real);  // identical operation order, bitwise equal
  }
}

TEST_CASE("jet evaluation exposes the vertical Hessian") {
  LagrangianSpec spec = euclidean(2);
  std::vector<double> base{0.0, 0.0, 3.0, 4.0};
  auto ctx = make_context(2, 2, base);
  Jet L = lagrangian_jet(spec, ctx);
  MultiIndex m{{0, 0, 2, 0}};
  CHECK(L.derivative(m) == doctest::Approx(1.0));  // g_11 of the Euclidean Lagrangian
}

TEST_CASE("Randers vertical Hessian component matches finite differences") {
  std::vector<std::vector<double>> a{{1.0, 0.0}, {0.0, 1.0}};
  LagrangianSpec spec = randers(a, {0.3, 0.0});
  std::vector<double> base{0.0, 0.0, 1.0, 0.0};
  auto ctx = make_context(2, 3, base);
  Jet L = lagrangian_jet(spec, ctx);
  auto f = [&](const std::vector<double>& z) {
    BasePoint p{{z[0], z[1]}, {z[2], z[3]}};
    return lagrangian_value(spec, p);
  };
  MultiIndex m{{0, 0, 0, 2}};
  double fd = oracles::finite_difference(f, base, {0, 0, 0, 2}, 1e-4);
  CHECK(std::abs(L.derivative(m) - fd) < 1e-6);
}

TEST_CASE("homogeneity: Euclidean is exact, Randers is degree two") {
  BasePoint p{{0.2, -0.1}, {0.8, 1.4}};
  std::vector<double> scales{2.0};
  auto rep = check_homogeneity(euclidean(2), p, scales);
  CHECK(rep.lagrangian_residual == 0.0);

  std::vector<std::vector<double>> a{{1.0, 0.1}, {0.1, 2.0}};
  auto spec = randers(a, {0.25, -0.1});
  std::vector<double> scales2{0.5, 2.0, 7.0};
  auto rep2 = check_homogeneity(spec, p, scales2, /*check_metric=*/true);
  CHECK(rep2.lagrangian_residual < 1e-12);
  CHECK(rep2.metric_residual < 1e-12);  // g is homogeneous of degree zero
}

TEST_CASE("homogeneity of a rational degree-2 expression") {
  auto spec = from_expression(2, "y1^3/(y1+y2) + x1*y2^2");
  BasePoint p{{0.4, 0.0}, {1.1, 0.7}};
  std::vector<double> scales{3.0};
  auto rep = check_homogeneity(spec, p, scales);
  CHECK(rep.lagrangian_residual < 1e-12);
}

TEST_CASE("builtin riemannian produces the declared vertical Hessian") {
  // a = [[1, x1],[x1, 2 + x1^2]] stays positive definite near the origin
  std::vector<std::vector<NodePtr>> a(2, std::vector<NodePtr>(2));
  a[0][0] = number(1.0);
  a[0][1] = parse("x1", 2);
  a[1][0] = parse("x1", 2);
  a[1][1] = parse("2 + x1^2", 2);
  auto spec = riemannian(2, a);
  BasePoint p{{0.3, 0.7}, {0.9, -1.2}};
  auto ctx = make_context(2, 2, p.xy());
  Jet L = lagrangian_jet(spec, ctx);
  std::vector<double> expect{1.0, 0.3, 0.3, 2.09};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      MultiIndex m{{0, 0, 0, 0}};
      m.e[2 + i] += 1;
      m.e[2 + j] += 1;
      CHECK(std::abs(L.derivative(m) - expect[2 * i + j]) < 1e-10);
    }
}

TEST_CASE("family validation") {
  CHECK_THROWS_AS(randers({{1.0, 0.0}, {0.0, 1.0}}, {1.0, 0.0}), InvalidArgument);  // |b|_a = 1
  CHECK_THROWS_AS(randers({{1.0, 0.5}, {0.0, 1.0}}, {0.1, 0.0}), InvalidArgument);  // asymmetric
  CHECK_THROWS_AS(randers({{-1.0, 0.0}, {0.0, 1.0}}, {0.1, 0.0}), InvalidArgument); // not SPD
  std::vector<std::vector<NodePtr>> bad(2, std::vector<NodePtr>(2));
  bad[0][0] = number(1.0);
  bad[0][1] = parse("x1", 2);
  bad[1][0] = parse("x2", 2);
  bad[1][1] = number(1.0);
  CHECK_THROWS_AS(riemannian(2, bad), InvalidArgument);
  CHECK_THROWS_AS(quartic_minkowski({1.0, -1.0}), InvalidArgument);
}

TEST_CASE("guard semantics: failing points raise GuardRejected") {
  auto spec = from_expression(2, "0.5*(y1^2+y2^2)", "y1 - 1");
  BasePoint ok{{0, 0}, {2.0, 0.5}};
  BasePoint rejected{{0, 0}, {0.5, 0.5}};
  CHECK(passes_guard(spec, ok));
  CHECK(!passes_guard(spec, rejected));
  CHECK_NOTHROW(lagrangian_value(spec, ok));
  CHECK_THROWS_AS(lagrangian_value(spec, rejected), GuardRejected);
}

TEST_CASE("quartic family is degree-2 homogeneous and non-quadratic") {
  auto spec = quartic_minkowski({1.0, 1.5});
  BasePoint p{{0.0, 0.0}, {1.0, 0.8}};
  std::vector<double> scales{0.5, 2.0};
  auto rep = check_homogeneity(spec, p, scales, true);
  CHECK(rep.lagrangian_residual < 1e-12);
  CHECK(rep.metric_residual < 1e-12);
}
