#include <cmath>
#include <random>

#include "doctest.h"
#include "finsler/geometry.hpp"
#include "oracles.hpp"

using namespace finsler;
using namespace finsler::dsl;
using namespace finsler::geom;

namespace {

// x-dependent Randers-type Lagrangian: genuinely non-Berwald, so the
// Landsberg tensor and nonlinear curvature are nonzero.
LagrangianSpec randers_xdep(double beta = 0.3) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "0.5*(sqrt(y1^2 + y2^2) + (%.17g*(0.5 + 0.3*x1))*y1)^2", beta);
  return from_expression(2, buf, "", "randers_xdep");
}

LagrangianSpec surface_metric() {  // a = diag(1, x1^2), valid for x1 > 0
  std::vector<std::vector<NodePtr>> a(2, std::vector<NodePtr>(2));
  a[0][0] = number(1.0);
  a[0][1] = number(0.0);
  a[1][0] = number(0.0);
  a[1][1] = parse("x1^2", 2);
  return riemannian(2, a, "surface");
}

double t3max(const Tensor3& t) {
  double m = 0.0;
  for (double v : t.v) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST_CASE("metric: Euclidean identity with signature (n,0)") {
  auto spec = euclidean(2);
  BasePoint p{{0.0, 0.0}, {3.0, 4.0}};
  MetricTensor m = metric(spec, p);
  CHECK(m.g.at(0, 0) == doctest::Approx(1.0));
  CHECK(m.g.at(0, 1) == doctest::Approx(0.0));
  CHECK(m.g.at(1, 1) == doctest::Approx(1.0));
  CHECK(m.sig_pos == 2);
  CHECK(m.sig_neg == 0);
  CHECK(m.det == doctest::Approx(1.0));
}

TEST_CASE("metric: surface riemannian diag(1, x1^2) at x1 = 2") {
  BasePoint p{{2.0, 0.5}, {0.7, -0.4}};
  MetricTensor m = metric(surface_metric(), p);
  CHECK(m.g.at(0, 0) == doctest::Approx(1.0));
  CHECK(m.g.at(1, 1) == doctest::Approx(4.0));
  CHECK(m.g.at(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("metric: Randers Hessian cross-checked against finite differences") {
  auto spec = randers({{1.0, 0.0}, {0.0, 1.0}}, {0.3, 0.0});
  BasePoint p{{0.0, 0.0}, {1.0, 0.0}};
  MetricTensor m = metric(spec, p);
  auto f = [&](const std::vector<double>& z) {
    return lagrangian_value(spec, BasePoint{{z[0], z[1]}, {z[2], z[3]}});
  };
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      std::vector<int> mi(4, 0);
      mi[2 + a] += 1;
      mi[2 + b] += 1;
      double fd = oracles::finite_difference(f, p.xy(), mi, 1e-4);
      CHECK(std::abs(m.g.at(a, b) - fd) < 1e-6);
    }
}

TEST_CASE("metric: degenerate quadratic is reported") {
  auto spec = from_expression(2, "0.5*y1^2");  // rank-1 vertical Hessian
  BasePoint p{{0.0, 0.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(metric(spec, p), NumericDegeneracy);
  Geometry geo(spec, p);
  CHECK(geo.metric_degenerate());
  CHECK_THROWS_AS(geo.metric_inverse_jets(), NumericDegeneracy);
}

TEST_CASE("inverse_metric: identity, diagonal, random SPD vs direct solve") {
  auto spec = euclidean(2);
  BasePoint p{{0.0, 0.0}, {1.0, 2.0}};
  MetricTensor m = metric(spec, p);
  Tensor2 inv = inverse_metric(m);
  CHECK(inv.at(0, 0) == doctest::Approx(1.0));
  CHECK(inv.at(1, 0) == doctest::Approx(0.0));

  BasePoint q{{2.0, 0.0}, {0.7, -0.4}};
  Tensor2 inv2 = inverse_metric(metric(surface_metric(), q));
  CHECK(inv2.at(1, 1) == doctest::Approx(0.25));

  // random SPD 3x3 through a quadratic Lagrangian, checked against an
  // independent linear solve
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  Eigen::MatrixXd A(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) A(i, j) = u(rng);
  Eigen::MatrixXd spd = A * A.transpose() + 2.0 * Eigen::MatrixXd::Identity(3, 3);
  std::vector<std::vector<NodePtr>> a(3, std::vector<NodePtr>(3));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a[i][j] = number(spd(i, j));
  auto spec3 = riemannian(3, a);
  BasePoint p3{{0.1, 0.2, -0.1}, {1.0, 0.5, -0.7}};
  Tensor2 inv3 = inverse_metric(metric(spec3, p3));
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Identity(3, 3);
  Eigen::MatrixXd direct = spd.partialPivLu().solve(rhs);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(std::abs(inv3.at(i, j) - direct(i, j)) < 1e-10);
}

TEST_CASE("cartan torsion: zero for quadratic Lagrangians, y-annihilated for Randers") {
  BasePoint p{{0.4, -0.2}, {1.2, 0.6}};
  CHECK(t3max(cartan_torsion(surface_metric(), p)) == 0.0);

  auto spec = randers({{1.0, 0.0}, {0.0, 1.0}}, {0.3, 0.0});
  Tensor3 C = cartan_torsion(spec, p);
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 2; ++c) {
      double contracted = 0.0;
      for (int a = 0; a < 2; ++a) contracted += C.at(a, b, c) * p.y[a];
      CHECK(std::abs(contracted) < 1e-10);
    }
  // total symmetry is canonical
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        CHECK(C.at(a, b, c) == C.at(b, a, c));
        CHECK(C.at(a, b, c) == C.at(a, c, b));
      }
}

TEST_CASE("cartan torsion component vs finite-difference third derivative") {
  auto spec = randers({{1.0, 0.0}, {0.0, 1.0}}, {0.3, 0.0});
  BasePoint p{{0.0, 0.0}, {1.0, 0.0}};
  Tensor3 C = cartan_torsion(spec, p);
  auto f = [&](const std::vector<double>& z) {
    return lagrangian_value(spec, BasePoint{{z[0], z[1]}, {z[2], z[3]}});
  };
  double fd = oracles::finite_difference(f, p.xy(), {0, 0, 0, 3}, 1e-3);
  CHECK(std::abs(C.at(1, 1, 1) - 0.5 * fd) < 1e-4);
}

TEST_CASE("spray: x-independent Lagrangians have G = 0, N = 0") {
  BasePoint p{{0.3, 0.9}, {1.1, -0.6}};
  for (const auto& spec : {euclidean(2), quartic_minkowski({1.0, 1.3}),
                           randers({{1.0, 0.0}, {0.0, 1.0}}, {0.2, 0.1})}) {
    SprayData s = spray(spec, p);
    for (double v : s.G) CHECK(std::abs(v) < 1e-12);
    for (double v : s.N.v) CHECK(std::abs(v) < 1e-12);
  }
}

TEST_CASE("spray of the surface metric matches the geodesic equations") {
  BasePoint p{{2.0, 0.5}, {0.7, -0.4}};
  SprayData s = spray(surface_metric(), p);
  double x1 = 2.0, y1 = 0.7, y2 = -0.4;
  CHECK(s.G[0] == doctest::Approx(-0.5 * x1 * y2 * y2).epsilon(1e-12));
  CHECK(s.G[1] == doctest::Approx(y1 * y2 / x1).epsilon(1e-12));
  // N^a_b y^b = 2 G^a
  for (int a = 0; a < 2; ++a)
    CHECK(s.N.at(a, 0) * y1 + s.N.at(a, 1) * y2 == doctest::Approx(2.0 * s.G[a]).epsilon(1e-12));
}

TEST_CASE("nonlinear torsion of the Barthel connection vanishes") {
  BasePoint p{{0.4, -0.2}, {1.0, 0.5}};
  CHECK(t3max(nonlinear_torsion(euclidean(2), p)) == 0.0);
  CHECK(t3max(nonlinear_torsion(randers_xdep(), p)) < 1e-8);
}

TEST_CASE("delta derivative: constants, the Lagrangian, and coordinates") {
  BasePoint p{{0.4, -0.2}, {1.0, 0.5}};
  auto spec = randers_xdep();
  ScalarField constant = [](const JetContextPtr& ctx) { return Jet::constant(ctx, 4.2); };
  CHECK(delta_derivative(constant, spec, p, 0) == 0.0);
  // the Lagrangian is horizontally constant under the Barthel connection
  ScalarField lag = [&](const JetContextPtr& ctx) { return lagrangian_jet(spec, ctx); };
  CHECK(std::abs(delta_derivative(lag, spec, p, 0)) < 1e-9);
  CHECK(std::abs(delta_derivative(lag, spec, p, 1)) < 1e-9);
  // y^1 on the Euclidean plane: N = 0 and y is x-independent
  auto eu = euclidean(2);
  ScalarField y1 = [](const JetContextPtr& ctx) { return Jet::variable(ctx, 2); };
  CHECK(delta_derivative(y1, eu, p, 0) == 0.0);
}

TEST_CASE("formal Christoffel symbols of the surface metric") {
  BasePoint p{{2.0, 0.5}, {0.7, -0.4}};
  Tensor3 gamma = formal_christoffel(surface_metric(), p);
  CHECK(gamma.at(0, 1, 1) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(gamma.at(1, 0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(gamma.at(1, 1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t3max(formal_christoffel(euclidean(2), p)) == 0.0);
  // symmetry in the last two indices is exact
  Tensor3 g2 = formal_christoffel(randers_xdep(), p);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) CHECK(g2.at(a, b, c) == g2.at(a, c, b));
}

TEST_CASE("horizontal Christoffel: quadratic reduction and spray contraction") {
  BasePoint p{{2.0, 0.5}, {0.7, -0.4}};
  auto spec = surface_metric();
  Tensor3 Gam = horizontal_christoffel(spec, p);
  Tensor3 gam = formal_christoffel(spec, p);
  for (std::size_t i = 0; i < Gam.v.size(); ++i) CHECK(std::abs(Gam.v[i] - gam.v[i]) < 1e-9);

  auto rx = randers_xdep();
  BasePoint q{{0.3, -0.6}, {1.1, 0.8}};
  Tensor3 G2 = horizontal_christoffel(rx, q);
  SprayData s = spray(rx, q);
  for (int a = 0; a < 2; ++a) {
    double yy = 0.0;
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) yy += G2.at(a, b, c) * q.y[b] * q.y[c];
    CHECK(std::abs(yy - 2.0 * s.G[a]) < 1e-9);
  }
}

TEST_CASE("berwald coefficients: reduction and Euler identities") {
  BasePoint p{{2.0, 0.5}, {0.7, -0.4}};
  auto spec = surface_metric();
  auto [Gbc, Gbcd] = berwald_coefficients(spec, p);
  Tensor3 Gam = horizontal_christoffel(spec, p);
  for (std::size_t i = 0; i < Gbc.v.size(); ++i) CHECK(std::abs(Gbc.v[i] - Gam.v[i]) < 1e-8);

  auto rx = randers_xdep();
  BasePoint q{{0.3, -0.6}, {1.1, 0.8}};
  auto [G2, G4] = berwald_coefficients(rx, q);
  (void)G4;
  SprayData s = spray(rx, q);
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 2; ++c) {
      double contracted = 0.0;
      for (int b = 0; b < 2; ++b) contracted += G2.at(a, b, c) * q.y[b];
      CHECK(std::abs(contracted - s.N.at(a, c)) < 1e-8);
    }
}

TEST_CASE("landsberg tensor: Berwald cases vanish, Randers is y-annihilated") {
  BasePoint p{{0.4, -0.2}, {1.2, 0.6}};
  CHECK(t3max(landsberg(surface_metric(), p)) < 1e-9);
  CHECK(t3max(landsberg(quartic_minkowski({1.0, 1.3}), p)) < 1e-12);

  Tensor3 L = landsberg(randers_xdep(), p);
  CHECK(t3max(L) > 1e-4);  // genuinely non-Berwald
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 2; ++c) {
      double contracted = 0.0;
      for (int a = 0; a < 2; ++a) contracted += L.at(a, b, c) * p.y[a];
      CHECK(std::abs(contracted) < 1e-8);
    }
}

TEST_CASE("nonlinear curvature: flat cases vanish") {
  BasePoint p{{2.0, 0.5}, {0.7, -0.4}};
  CHECK(t3max(nonlinear_curvature(euclidean(2), p)) == 0.0);
  CHECK(t3max(nonlinear_curvature(quartic_minkowski({1.0, 1.3}), p)) < 1e-12);
  // diag(1, x1^2) is the flat plane in polar-type coordinates: the spray
  // curvature must vanish, matching the zero Riemann tensor
  CHECK(t3max(nonlinear_curvature(surface_metric(), p)) < 1e-10);
}

TEST_CASE("nonlinear curvature matches the Riemann contraction on a curved metric") {
  // a = diag(1, (1 + x1^2)^2) has nonzero Gaussian curvature
  std::vector<std::vector<NodePtr>> a(2, std::vector<NodePtr>(2));
  a[0][0] = number(1.0);
  a[0][1] = number(0.0);
  a[1][0] = number(0.0);
  a[1][1] = parse("(1 + x1^2)^2", 2);
  auto spec = riemannian(2, a, "curved");

  oracles::QuadMetric qm;
  qm.n = 2;
  using oracles::MiniPoly;
  MiniPoly one = MiniPoly::constant(2, 1.0);
  MiniPoly x1 = MiniPoly::var(2, 0);
  MiniPoly f = one + x1 * x1;
  qm.a = {one, MiniPoly(2), MiniPoly(2), f * f};

  BasePoint p{{0.6, -0.3}, {0.9, 1.2}};
  Tensor3 R = nonlinear_curvature(spec, p);
  auto riem = oracles::classical_riemann(qm, p.x);
  for (int aa = 0; aa < 2; ++aa)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        double want = 0.0;
        for (int q = 0; q < 2; ++q)
          want += riem[((static_cast<std::size_t>(aa) * 2 + q) * 2 + b) * 2 + c] * p.y[q];
        CHECK(std::abs(R.at(aa, b, c) - want) < 1e-7);
      }
  CHECK(t3max(R) > 1e-3);  // non-trivial check
}

TEST_CASE("eq4: Berwald coefficients split into Christoffel plus Landsberg") {
  BasePoint p{{0.4, -0.2}, {1.2, 0.6}};
  CHECK(eq4_residual(euclidean(2), p) == 0.0);
  CHECK(eq4_residual(surface_metric(), p) < 1e-9);
  CHECK(eq4_residual(randers_xdep(), p) < 1e-7);
}

TEST_CASE("euler relations at random sample points") {
  auto spec = randers_xdep();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ux(-0.8, 0.8), uy(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    BasePoint p{{ux(rng), ux(rng)}, {0.0, 0.0}};
    do {
      p.y = {uy(rng), uy(rng)};
    } while (std::hypot(p.y[0], p.y[1]) < 0.5);
    Geometry geo(spec, p);
    const int n = 2;
    double L = geo.lagrangian().value();
    double ydL = 0.0;
    for (int a = 0; a < n; ++a) {
      MultiIndex m{{0, 0, 0, 0}};
      m.e[n + a] = 1;
      ydL += p.y[a] * geo.lagrangian().derivative(m);
    }
    CHECK(std::abs(ydL - 2.0 * L) < 1e-8 * (1.0 + std::abs(L)));
    for (int a = 0; a < n; ++a) {
      double ny = 0.0;
      for (int b = 0; b < n; ++b) ny += geo.nonlinear_jets()(a, b).value() * p.y[b];
      CHECK(std::abs(ny - 2.0 * geo.spray_jets()[a].value()) < 1e-8);
    }
  }
}

TEST_CASE("field homogeneity in y: g degree 0, N degree 1, C degree -1") {
  auto spec = randers_xdep();
  BasePoint p{{0.3, -0.5}, {0.9, 0.7}};
  Geometry base(spec, p);
  for (double s : {0.5, 2.0}) {
    BasePoint q = p;
    for (double& v : q.y) v *= s;
    Geometry scaled(spec, q);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        double g0 = base.metric_jets()(a, b).value();
        double gs = scaled.metric_jets()(a, b).value();
        CHECK(std::abs(gs - g0) < 1e-9 * (1.0 + std::abs(g0)));
        double n0 = base.nonlinear_jets()(a, b).value();
        double ns = scaled.nonlinear_jets()(a, b).value();
        CHECK(std::abs(ns - s * n0) < 1e-9 * (1.0 + std::abs(s * n0)));
        for (int c = 0; c < 2; ++c) {
          double c0 = base.cartan_jets()(a, b, c).value();
          double cs = scaled.cartan_jets()(a, b, c).value();
          CHECK(std::abs(cs - c0 / s) < 1e-9 * (1.0 + std::abs(c0 / s)));
        }
      }
  }
}

TEST_CASE("riemannian reduction oracle: random quadratic Lagrangians") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int trial = 0; trial < 3; ++trial) {
    // a(x) = 2 I + small symmetric polynomial perturbation: SPD on the box
    using oracles::MiniPoly;
    const int n = 2;
    oracles::QuadMetric qm;
    qm.n = n;
    qm.a.assign(4, MiniPoly(n));
    std::vector<std::vector<NodePtr>> a(n, std::vector<NodePtr>(n));
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        MiniPoly e = MiniPoly::constant(n, i == j ? 2.0 : 0.0);
        e = e + MiniPoly::var(n, 0) * u(rng) + MiniPoly::var(n, 1) * u(rng) +
            MiniPoly::var(n, 0) * MiniPoly::var(n, 1) * u(rng);
        qm.a[static_cast<std::size_t>(i) * n + j] = e;
        qm.a[static_cast<std::size_t>(j) * n + i] = e;
        NodePtr node = parse(e.to_expr(2), 2);  // dim-2 polynomial in x1, x2
        a[i][j] = node;
        a[j][i] = node;
      }
    auto spec = riemannian(n, a);
    BasePoint p{{u(rng), u(rng)}, {1.0, -0.6}};
    Geometry geo(spec, p);
    Tensor3 Gam = horizontal_christoffel(spec, p);
    Tensor3 gam = formal_christoffel(spec, p);
    auto [Gbc, G4] = berwald_coefficients(spec, p);
    (void)G4;
    CHECK(t3max(cartan_torsion(spec, p)) < 1e-12);
    CHECK(t3max(landsberg(spec, p)) < 1e-8);
    auto oracle = oracles::classical_christoffel(qm, p.x);
    for (int aa = 0; aa < n; ++aa)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          double want = oracle[(static_cast<std::size_t>(aa) * n + b) * n + c];
          CHECK(std::abs(Gam.at(aa, b, c) - want) < 1e-9);
          CHECK(std::abs(gam.at(aa, b, c) - want) < 1e-9);
          CHECK(std::abs(Gbc.at(aa, b, c) - want) < 1e-8);
        }
  }
}
