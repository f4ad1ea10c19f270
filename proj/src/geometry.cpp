#include "finsler/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace finsler::geom {

namespace {
Jet d1(const Jet& f, int dir) { return f.derivative_jet(dir); }
}  // namespace

JetMat jet_matrix_inverse(const JetMat& m) {
  const int n = m.n();
  const JetContextPtr& ctx = m(0, 0).context();
  // augmented [m | I], value-part partial pivoting
  std::vector<std::vector<Jet>> a;
  a.reserve(n);
  for (int i = 0; i < n; ++i) {
    std::vector<Jet> row;
    row.reserve(2 * n);
    for (int j = 0; j < n; ++j) row.push_back(m(i, j));
    for (int j = 0; j < n; ++j) row.push_back(Jet::constant(ctx, i == j ? 1.0 : 0.0));
    a.push_back(std::move(row));
  }
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r][col].value()) > std::abs(a[piv][col].value())) piv = r;
    if (std::abs(a[piv][col].value()) < 1e-13)
      throw NumericDegeneracy("numeric degeneracy: singular jet matrix");
    std::swap(a[col], a[piv]);
    Jet inv_p = reciprocal(a[col][col]);
    for (int j = 0; j < 2 * n; ++j) a[col][j] = a[col][j] * inv_p;
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      Jet f = a[r][col];
      for (int j = 0; j < 2 * n; ++j) a[r][j] = a[r][j] - f * a[col][j];
    }
  }
  return JetMat::build(n, [&](int i, int j) { return a[i][n + j]; });
}

Geometry::Geometry(const dsl::LagrangianSpec& spec, const BasePoint& p, const GeometryOptions& opt)
    : spec_(&spec),
      point_(p),
      n_(spec.n),
      K_(opt.order),
      ctx_(make_context(spec.n, opt.order, p.xy())),
      L_(dsl::lagrangian_jet(spec, ctx_)) {
  if (K_ < 5) throw InvalidArgument("geometry needs jet order >= 5");
  if (p.n() != n_ || static_cast<int>(p.y.size()) != n_)
    throw InvalidArgument("base point dimension mismatch");

  y_.reserve(n_);
  for (int i = 0; i < n_; ++i) y_.push_back(Jet::variable(ctx_, n_ + i));

  // vertical Hessian; extraction makes it exactly symmetric
  std::vector<Jet> dL;
  dL.reserve(n_);
  for (int a = 0; a < n_; ++a) dL.push_back(d1(L_, n_ + a));
  g_ = JetMat::build(n_, [&](int a, int b) { return a <= b ? d1(dL[a], n_ + b) : d1(dL[b], n_ + a); });
  C_ = JetT3::build(n_, [&](int a, int b, int c) { return d1(g_(a, b), n_ + c) * 0.5; });

  Eigen::MatrixXd gv(n_, n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b) gv(a, b) = g_(a, b).value();
  det_ = gv.determinant();
  scale_ = 0.0;
  for (int a = 0; a < n_; ++a) {
    double row = 0.0;
    for (int b = 0; b < n_; ++b) row += std::abs(gv(a, b));
    scale_ = std::max(scale_, row);
  }
  degenerate_ = !(std::abs(det_) >= opt.degeneracy_tol * std::max(scale_, 1e-300));
}

const Geometry::Stage2& Geometry::stage2() const {
  if (stage2_) return *stage2_;
  if (degenerate_) throw NumericDegeneracy("degenerate metric at p");
  Stage2 s;
  const int n = n_;
  s.ginv = jet_matrix_inverse(g_);

  // spray: 2 G^a = g^{ad} (d2 L/dx^c dy^d y^c - dL/dx^d)
  std::vector<Jet> dLdx;
  dLdx.reserve(n);
  for (int d = 0; d < n; ++d) dLdx.push_back(d1(L_, d));
  s.G.reserve(n);
  for (int a = 0; a < n; ++a) {
    Jet acc = Jet::constant(ctx_, 0.0);
    for (int d = 0; d < n; ++d) {
      Jet inner = Jet::constant(ctx_, 0.0);
      for (int c = 0; c < n; ++c) inner = inner + d1(dLdx[c], n + d) * y_[c];
      acc = acc + s.ginv(a, d) * (inner - dLdx[d]);
    }
    s.G.push_back(acc * 0.5);
  }
  s.N = JetMat::build(n, [&](int a, int c) { return d1(s.G[a], n + c); });

  auto delta_of = [&](const Jet& f, int b) {
    Jet r = d1(f, b);
    for (int c = 0; c < n; ++c) r = r - s.N(c, b) * d1(f, n + c);
    return r;
  };

  // plain and horizontal Christoffel symbols
  JetT3 dgdx = JetT3::build(n, [&](int m, int c, int b) { return d1(g_(m, c), b); });
  s.gamma = JetT3::build(n, [&](int a, int b, int c) {
    Jet acc = Jet::constant(ctx_, 0.0);
    for (int m = 0; m < n; ++m)
      acc = acc + s.ginv(a, m) * (dgdx(m, c, b) + dgdx(m, b, c) - dgdx(b, c, m));
    return acc * 0.5;
  });
  s.Gamma = JetT3::build(n, [&](int a, int b, int c) {
    Jet acc = Jet::constant(ctx_, 0.0);
    for (int m = 0; m < n; ++m)
      acc = acc + s.ginv(a, m) *
                      (delta_of(g_(m, c), b) + delta_of(g_(m, b), c) - delta_of(g_(b, c), m));
    return acc * 0.5;
  });

  s.Gbc = JetT3::build(n, [&](int a, int b, int c) { return d1(s.N(a, c), n + b); });
  s.Gbcd = JetT4::build(n, [&](int a, int b, int c, int d) { return d1(s.Gbc(a, c, d), n + b); });
  std::vector<Jet> ylow;
  ylow.reserve(n);
  for (int d = 0; d < n; ++d) {
    Jet acc = Jet::constant(ctx_, 0.0);
    for (int r = 0; r < n; ++r) acc = acc + y_[r] * g_(r, d);
    ylow.push_back(acc);
  }
  s.L = JetT3::build(n, [&](int a, int b, int c) {
    Jet acc = Jet::constant(ctx_, 0.0);
    for (int d = 0; d < n; ++d) acc = acc + ylow[d] * s.Gbcd(d, a, b, c);
    return acc * (-0.5);
  });
  s.landsberg_asym = 0.0;  // exact by construction: contraction of a symmetric extraction

  s.R = JetT3::build(n, [&](int a, int b, int c) {
    return delta_of(s.N(a, c), b) - delta_of(s.N(a, b), c);
  });
  // tau^a_bc = N^a_cb - N^a_bc with N^a_bc = d N^a_c / d y^b
  s.tau = JetT3::build(n, [&](int a, int b, int c) {
    return d1(s.N(a, b), n + c) - d1(s.N(a, c), n + b);
  });

  stage2_ = std::move(s);
  return *stage2_;
}

Jet Geometry::delta(const Jet& f, int b) const {
  const Stage2& s = stage2();
  Jet r = d1(f, b);
  for (int c = 0; c < n_; ++c) r = r - s.N(c, b) * d1(f, n_ + c);
  return r;
}

MetricTensor Geometry::metric_value() const {
  MetricTensor out;
  out.g.n = n_;
  out.g.v.resize(static_cast<std::size_t>(n_) * n_);
  Eigen::MatrixXd gv(n_, n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b) {
      double v = g_(a, b).value();
      out.g.v[static_cast<std::size_t>(a) * n_ + b] = v;
      gv(a, b) = v;
    }
  out.det = det_;
  out.scale = scale_;
  out.degenerate = degenerate_;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gv);
  double tol = 1e-12 * std::max(scale_, 1.0);
  for (int i = 0; i < n_; ++i) {
    if (es.eigenvalues()[i] > tol) ++out.sig_pos;
    else if (es.eigenvalues()[i] < -tol) ++out.sig_neg;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Value-level wrappers

namespace {
Tensor3 values_of(const JetT3& t) {
  Tensor3 out;
  out.n = t.n();
  out.v.reserve(static_cast<std::size_t>(out.n) * out.n * out.n);
  for (int a = 0; a < out.n; ++a)
    for (int b = 0; b < out.n; ++b)
      for (int c = 0; c < out.n; ++c) out.v.push_back(t(a, b, c).value());
  return out;
}
Tensor4 values_of(const JetT4& t) {
  Tensor4 out;
  out.n = t.n();
  out.v.reserve(static_cast<std::size_t>(out.n) * out.n * out.n * out.n);
  for (int a = 0; a < out.n; ++a)
    for (int b = 0; b < out.n; ++b)
      for (int c = 0; c < out.n; ++c)
        for (int d = 0; d < out.n; ++d) out.v.push_back(t(a, b, c, d).value());
  return out;
}
}  // namespace

MetricTensor metric(const dsl::LagrangianSpec& spec, const BasePoint& p, const GeometryOptions& opt) {
  Geometry geo(spec, p, opt);
  if (geo.metric_degenerate()) throw NumericDegeneracy("degenerate metric at p");
  return geo.metric_value();
}

Tensor2 inverse_metric(const MetricTensor& m) {
  if (m.degenerate) throw NumericDegeneracy("degenerate metric: no inverse");
  const int n = m.g.n;
  Eigen::MatrixXd gv(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) gv(a, b) = m.g.at(a, b);
  Eigen::MatrixXd inv = gv.inverse();
  Tensor2 out;
  out.n = n;
  out.v.resize(static_cast<std::size_t>(n) * n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) out.v[static_cast<std::size_t>(a) * n + b] = inv(a, b);
  return out;
}

Tensor3 cartan_torsion(const dsl::LagrangianSpec& spec, const BasePoint& p,
                       const GeometryOptions& opt) {
  return values_of(Geometry(spec, p, opt).cartan_jets());
}

SprayData spray(const dsl::LagrangianSpec& spec, const BasePoint& p, const GeometryOptions& opt) {
  Geometry geo(spec, p, opt);
  SprayData out;
  const int n = geo.n();
  out.G.reserve(n);
  for (int a = 0; a < n; ++a) out.G.push_back(geo.spray_jets()[a].value());
  out.N.n = n;
  out.N.v.resize(static_cast<std::size_t>(n) * n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) out.N.v[static_cast<std::size_t>(a) * n + b] = geo.nonlinear_jets()(a, b).value();
  return out;
}

Tensor3 nonlinear_torsion(const dsl::LagrangianSpec& spec, const BasePoint& p,
                          const GeometryOptions& opt) {
  return values_of(Geometry(spec, p, opt).nonlinear_torsion_jets());
}

double delta_derivative(const ScalarField& field, const dsl::LagrangianSpec& spec,
                        const BasePoint& p, int dir, const GeometryOptions& opt) {
  Geometry geo(spec, p, opt);
  if (dir < 0 || dir >= geo.n()) throw InvalidArgument("delta direction out of range");
  Jet f = field(geo.ctx());
  return geo.delta(f, dir).value();
}

Tensor3 formal_christoffel(const dsl::LagrangianSpec& spec, const BasePoint& p,
                           const GeometryOptions& opt) {
  return values_of(Geometry(spec, p, opt).formal_christoffel_jets());
}

Tensor3 horizontal_christoffel(const dsl::LagrangianSpec& spec, const BasePoint& p,
                               const GeometryOptions& opt) {
  return values_of(Geometry(spec, p, opt).horizontal_christoffel_jets());
}

std::pair<Tensor3, Tensor4> berwald_coefficients(const dsl::LagrangianSpec& spec,
                                                 const BasePoint& p, const GeometryOptions& opt) {
  Geometry geo(spec, p, opt);
  return {values_of(geo.berwald_jets()), values_of(geo.berwald4_jets())};
}

Tensor3 landsberg(const dsl::LagrangianSpec& spec, const BasePoint& p, const GeometryOptions& opt) {
  return values_of(Geometry(spec, p, opt).landsberg_jets());
}

Tensor3 nonlinear_curvature(const dsl::LagrangianSpec& spec, const BasePoint& p,
                            const GeometryOptions& opt) {
  return values_of(Geometry(spec, p, opt).nonlinear_curvature_jets());
}

double eq4_residual(const dsl::LagrangianSpec& spec, const BasePoint& p,
                    const GeometryOptions& opt) {
  Geometry geo(spec, p, opt);
  const int n = geo.n();
  double worst = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        double raised = 0.0;
        for (int d = 0; d < n; ++d)
          raised += geo.metric_inverse_jets()(a, d).value() * geo.landsberg_jets()(d, b, c).value();
        worst = std::max(worst, std::abs(geo.berwald_jets()(a, b, c).value() -
                                         geo.horizontal_christoffel_jets()(a, b, c).value() - raised));
      }
  return worst;
}

}  // namespace finsler::geom
