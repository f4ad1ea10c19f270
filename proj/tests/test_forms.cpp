#include <bit>
#include <cmath>
#include <random>

#include "doctest.h"
#include "finsler/forms.hpp"
#include "finsler/geometry.hpp"
#include "oracles.hpp"

using namespace finsler;
using namespace finsler::forms;

namespace {
JetContextPtr ctx2() {
  std::vector<double> base{0.3, -0.2, 1.1, 0.7};
  return make_context(2, 5, base);
}

Form random_poly_form(const JetContextPtr& ctx, int degree, std::mt19937_64& rng) {
  const int dim = ctx->dim();
  Form f(dim, degree);
  std::vector<Jet> vars;
  for (int i = 0; i < dim; ++i) vars.push_back(Jet::variable(ctx, i));
  // iterate strictly increasing tuples via masks
  for (uint32_t mask = 0; mask < (1u << dim); ++mask) {
    if (std::popcount(mask) != degree) continue;
    auto p = oracles::random_poly(dim, 2, 3, rng);
    Jet coeff = Jet::constant(ctx, 0.0);
    for (auto& [e, v] : p.terms()) {
      Jet term = Jet::constant(ctx, v);
      for (int i = 0; i < dim; ++i)
        if (e[i] > 0) term = term * powi(vars[i], e[i]);
      coeff = coeff + term;
    }
    f.accumulate(mask, coeff);
  }
  return f;
}
}  // namespace

TEST_CASE("wedge: nilpotency and graded anticommutativity of cobasis elements") {
  auto ctx = ctx2();
  Form dx1 = Form::cobasis(ctx, 0);
  Form dy1 = Form::cobasis(ctx, 2);
  CHECK(wedge(dx1, dx1).is_zero());
  Form ab = wedge(dx1, dy1);
  Form ba = wedge(dy1, dx1);
  CHECK((ab + ba).max_abs_value() == 0.0);
  CHECK(ab.terms().begin()->second.value() == 1.0);
}

TEST_CASE("wedge: hand expansion of (dx1 + dy2) ^ dx2") {
  auto ctx = ctx2();
  Form a = Form::cobasis(ctx, 0) + Form::cobasis(ctx, 3);
  Form b = Form::cobasis(ctx, 1);
  Form w = wedge(a, b);
  // dx1 ^ dx2 keeps +1; dy2 ^ dx2 = -(dx2 ^ dy2)
  CHECK(w.terms().at(0b0011u).value() == doctest::Approx(1.0));
  CHECK(w.terms().at(0b1010u).value() == doctest::Approx(-1.0));
}

TEST_CASE("wedge: graded anticommutativity and associativity on random forms") {
  auto ctx = ctx2();
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    Form a1 = random_poly_form(ctx, 1, rng);
    Form b1 = random_poly_form(ctx, 1, rng);
    Form c2 = random_poly_form(ctx, 2, rng);
    // 1-forms anticommute
    CHECK((wedge(a1, b1) + wedge(b1, a1)).max_abs_value() < 1e-14);
    // 1-form and 2-form commute
    CHECK((wedge(a1, c2) - wedge(c2, a1)).max_abs_value() < 1e-14);
    // associativity
    Form l = wedge(wedge(a1, b1), c2);
    Form r = wedge(a1, wedge(b1, c2));
    CHECK((l - r).max_abs_value() < 1e-12);
  }
}

TEST_CASE("exterior derivative: constants and linear coefficients") {
  auto ctx = ctx2();
  Form c(ctx->dim(), 1);
  c.accumulate(0b0001u, Jet::constant(ctx, 3.5));  // 3.5 dx1
  CHECK(exterior_derivative(c).max_abs_value() == 0.0);

  Form f(ctx->dim(), 1);
  f.accumulate(0b0001u, Jet::variable(ctx, 2));  // y1 dx1
  Form df = exterior_derivative(f);
  // d(y1 dx1) = dy1 ^ dx1 = -(dx1 ^ dy1)
  CHECK(df.terms().at(0b0101u).value() == doctest::Approx(-1.0));
}

TEST_CASE("d . d vanishes identically on random polynomial fields") {
  auto ctx = ctx2();
  std::mt19937_64 rng(7);
  for (int deg = 0; deg <= 2; ++deg) {
    Form f = random_poly_form(ctx, deg, rng);
    Form ddf = exterior_derivative(exterior_derivative(f));
    CHECK(ddf.max_abs_value() < 1e-9);  // exact: shared coefficient storage
  }
}

TEST_CASE("Leibniz rule for d over wedges") {
  auto ctx = ctx2();
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 4; ++trial) {
    Form a = random_poly_form(ctx, 1, rng);
    Form b = random_poly_form(ctx, 1, rng);
    Form lhs = exterior_derivative(wedge(a, b));
    Form rhs = wedge(exterior_derivative(a), b) - wedge(a, exterior_derivative(b));
    CHECK((lhs - rhs).max_abs_value() < 1e-8);
  }
}

TEST_CASE("contractions: the Hilbert pairing on the Euclidean plane") {
  auto spec = dsl::euclidean(2);
  BasePoint p{{0.0, 0.0}, {3.0, 4.0}};
  geom::Geometry geo(spec, p);
  auto ctx = geo.ctx();

  VectorValuedForm omega;
  omega.comp = {Form::cobasis(ctx, 0), Form::cobasis(ctx, 1)};
  VectorValuedForm lowered = lower_index(geo.metric_jets(), omega);
  Form hilbert = contract_vector(geo.y_jets(), lowered);
  CHECK(hilbert.terms().at(0b0001u).value() == doctest::Approx(3.0));
  CHECK(hilbert.terms().at(0b0010u).value() == doctest::Approx(4.0));
  // identity metric: lowering leaves components unchanged
  for (int a = 0; a < 2; ++a)
    CHECK((lowered.comp[a] - omega.comp[a]).max_abs_value() < 1e-15);
}

TEST_CASE("evaluation of forms on chart vectors") {
  auto ctx = ctx2();
  Form f(ctx->dim(), 1);
  f.accumulate(0b0001u, Jet::constant(ctx, 2.0));
  f.accumulate(0b0100u, Jet::constant(ctx, -1.0));
  std::vector<std::vector<double>> vec{{1.0, 0.0, 3.0, 0.0}};
  CHECK(evaluate(f, vec).value() == doctest::Approx(2.0 - 3.0));
}

TEST_CASE("adapted cobasis: identity when N = 0, substitution otherwise") {
  // surface metric diag(1, x1^2): nontrivial Barthel N
  std::vector<std::vector<dsl::NodePtr>> a(2, std::vector<dsl::NodePtr>(2));
  a[0][0] = dsl::number(1.0);
  a[0][1] = dsl::number(0.0);
  a[1][0] = dsl::number(0.0);
  a[1][1] = dsl::parse("x1^2", 2);
  auto spec = dsl::riemannian(2, a);
  BasePoint p{{2.0, 0.5}, {0.7, -0.4}};
  geom::Geometry geo(spec, p);
  auto ctx = geo.ctx();
  const int n = 2;

  // cobasis {omega^a = dx^a, tilde^a = dy^a + N^a_b dx^b}
  CobasisMap map;
  map.B = geom::JetMat::build(2 * n, [&](int i, int j) {
    if (i < n) return Jet::constant(ctx, i == j ? 1.0 : 0.0);
    if (j < n) return geo.nonlinear_jets()(i - n, j);
    return Jet::constant(ctx, i - n == j - n ? 1.0 : 0.0);
  });
  map.Binv = geom::jet_matrix_inverse(map.B);

  // dy^1 = tilde^1 - N^1_b omega^b
  Form dy1 = Form::cobasis(ctx, n);
  Form ad = to_adapted(dy1, map);
  CHECK(ad.terms().at(1u << n).value() == doctest::Approx(1.0));
  for (int b = 0; b < n; ++b)
    CHECK(ad.terms().at(1u << b).value() ==
          doctest::Approx(-geo.nonlinear_jets()(0, b).value()).epsilon(1e-12));

  // round trip on random forms
  std::mt19937_64 rng(12);
  for (int deg = 1; deg <= 2; ++deg) {
    Form f = random_poly_form(ctx, deg, rng);
    Form back = from_adapted(to_adapted(f, map), map);
    double scale = f.max_abs_value();
    CHECK((back - f).max_abs_value() < 1e-12 * (1.0 + scale));
  }

  // Euclidean: N = 0, the map is the identity
  auto eu = dsl::euclidean(2);
  geom::Geometry geo2(eu, p);
  CobasisMap id;
  id.B = geom::JetMat::build(2 * n, [&](int i, int j) {
    if (i < n) return Jet::constant(geo2.ctx(), i == j ? 1.0 : 0.0);
    if (j < n) return geo2.nonlinear_jets()(i - n, j);
    return Jet::constant(geo2.ctx(), i == j + n ? 1.0 : 0.0);
  });
  id.Binv = geom::jet_matrix_inverse(id.B);
  Form g1 = Form::cobasis(geo2.ctx(), 1);
  CHECK((to_adapted(g1, id) - g1).max_abs_value() < 1e-15);
}

TEST_CASE("d of the adapted vertical cobasis matches finite differences of N") {
  // components of d(tilde^a) = dN^a_b ^ dx^b carry x- and y-derivatives of N
  auto spec = dsl::from_expression(2, "0.5*(sqrt(y1^2 + y2^2) + (0.3*(0.5 + 0.3*x1))*y1)^2");
  BasePoint p{{0.2, -0.4}, {1.0, 0.6}};
  geom::Geometry geo(spec, p);
  auto ctx = geo.ctx();
  const int n = 2;

  Form tilde0 = Form::cobasis(ctx, n);  // dy^1 + N^1_b dx^b
  for (int b = 0; b < n; ++b)
    tilde0 += Form::cobasis(ctx, b) * geo.nonlinear_jets()(0, b);
  Form dt = exterior_derivative(tilde0);

  auto Nfield = [&](const std::vector<double>& z, int a, int b) {
    BasePoint q{{z[0], z[1]}, {z[2], z[3]}};
    return geom::spray(spec, q).N.at(a, b);
  };
  // coefficient of dx^c ^ dx^b (c < b) is dN^1_b/dx^c - dN^1_c/dx^b
  for (int c = 0; c < n; ++c)
    for (int b = c + 1; b < n; ++b) {
      std::vector<int> mc(2 * n, 0), mb(2 * n, 0);
      mc[c] = 1;
      mb[b] = 1;
      double want =
          oracles::finite_difference([&](const std::vector<double>& z) { return Nfield(z, 0, b); },
                                     p.xy(), mc, 1e-5) -
          oracles::finite_difference([&](const std::vector<double>& z) { return Nfield(z, 0, c); },
                                     p.xy(), mb, 1e-5);
      CHECK(std::abs(dt.terms().at((1u << c) | (1u << b)).value() - want) < 1e-6);
    }
  // coefficient of dy^c ^ dx^b is -dN^1_b/dy^c
  for (int c = 0; c < n; ++c)
    for (int b = 0; b < n; ++b) {
      std::vector<int> m(2 * n, 0);
      m[n + c] = 1;
      double want = oracles::finite_difference(
          [&](const std::vector<double>& z) { return Nfield(z, 0, b); }, p.xy(), m, 1e-5);
      CHECK(std::abs(dt.terms().at((1u << b) | (1u << (n + c))).value() - (-want)) < 1e-6);
    }
}
