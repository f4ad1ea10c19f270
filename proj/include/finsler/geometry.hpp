#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "finsler/expr.hpp"
#include "finsler/jet.hpp"
#include "finsler/types.hpp"

namespace finsler::geom {

struct GeometryOptions {
  int order = 5;                  // jet truncation order K; the pipeline needs K >= 5
  double degeneracy_tol = 1e-10;  // |det g| < tol * (max row norm of g) flags degeneracy
};

// Small jet-valued tensor containers, row-major.
class JetMat {
public:
  JetMat() = default;
  template <class F>
  static JetMat build(int n, F f) {
    JetMat out;
    out.n_ = n;
    out.m_.reserve(static_cast<std::size_t>(n) * n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) out.m_.push_back(f(a, b));
    return out;
  }
  const Jet& operator()(int a, int b) const { return m_[static_cast<std::size_t>(a) * n_ + b]; }
  Jet& operator()(int a, int b) { return m_[static_cast<std::size_t>(a) * n_ + b]; }
  int n() const { return n_; }

private:
  int n_ = 0;
  std::vector<Jet> m_;
};

class JetT3 {
public:
  JetT3() = default;
  template <class F>
  static JetT3 build(int n, F f) {
    JetT3 out;
    out.n_ = n;
    out.m_.reserve(static_cast<std::size_t>(n) * n * n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) out.m_.push_back(f(a, b, c));
    return out;
  }
  const Jet& operator()(int a, int b, int c) const {
    return m_[(static_cast<std::size_t>(a) * n_ + b) * n_ + c];
  }
  int n() const { return n_; }

private:
  int n_ = 0;
  std::vector<Jet> m_;
};

class JetT4 {
public:
  JetT4() = default;
  template <class F>
  static JetT4 build(int n, F f) {
    JetT4 out;
    out.n_ = n;
    out.m_.reserve(static_cast<std::size_t>(n) * n * n * n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) out.m_.push_back(f(a, b, c, d));
    return out;
  }
  const Jet& operator()(int a, int b, int c, int d) const {
    return m_[((static_cast<std::size_t>(a) * n_ + b) * n_ + c) * n_ + d];
  }
  int n() const { return n_; }

private:
  int n_ = 0;
  std::vector<Jet> m_;
};

// Gauss-Jordan with value-part pivoting; throws NumericDegeneracy on a
// near-zero pivot.
JetMat jet_matrix_inverse(const JetMat&);

// Value-level tensors for reports and the CLI.
struct Tensor2 {
  int n = 0;
  std::vector<double> v;
  double at(int a, int b) const { return v[static_cast<std::size_t>(a) * n + b]; }
};
struct Tensor3 {
  int n = 0;
  std::vector<double> v;
  double at(int a, int b, int c) const { return v[(static_cast<std::size_t>(a) * n + b) * n + c]; }
};
struct Tensor4 {
  int n = 0;
  std::vector<double> v;
  double at(int a, int b, int c, int d) const {
    return v[((static_cast<std::size_t>(a) * n + b) * n + c) * n + d];
  }
};

struct MetricTensor {
  Tensor2 g;
  int sig_pos = 0, sig_neg = 0;
  double det = 0.0;
  double scale = 0.0;  // max row norm, used by the degeneracy threshold
  bool degenerate = false;
};

struct SprayData {
  std::vector<double> G;  // spray coefficients G^a
  Tensor2 N;              // non-linear connection N^a_b
};

// The point-wise tensor pipeline. Evaluates the Lagrangian once as a jet of
// order K and derives every first-layer field from it; all fields stay
// jet-valued so downstream modules can differentiate them by extraction.
//
// Construction always produces the Lagrangian jet, the metric and the Cartan
// torsion. Fields that need the inverse metric are only available when the
// metric is non-degenerate at the point; their accessors throw
// NumericDegeneracy otherwise.
class Geometry {
public:
  Geometry(const dsl::LagrangianSpec&, const BasePoint&, const GeometryOptions& = {});

  int n() const { return n_; }
  int order() const { return K_; }
  const JetContextPtr& ctx() const { return ctx_; }
  const BasePoint& point() const { return point_; }
  const dsl::LagrangianSpec& spec() const { return *spec_; }

  const Jet& lagrangian() const { return L_; }
  const std::vector<Jet>& y_jets() const { return y_; }
  const JetMat& metric_jets() const { return g_; }
  const JetT3& cartan_jets() const { return C_; }
  bool metric_degenerate() const { return degenerate_; }
  double metric_det() const { return det_; }
  double metric_scale() const { return scale_; }
  MetricTensor metric_value() const;

  const JetMat& metric_inverse_jets() const { return stage2().ginv; }
  const std::vector<Jet>& spray_jets() const { return stage2().G; }
  const JetMat& nonlinear_jets() const { return stage2().N; }
  const JetT3& formal_christoffel_jets() const { return stage2().gamma; }
  const JetT3& horizontal_christoffel_jets() const { return stage2().Gamma; }
  const JetT3& berwald_jets() const { return stage2().Gbc; }
  const JetT4& berwald4_jets() const { return stage2().Gbcd; }
  const JetT3& landsberg_jets() const { return stage2().L; }
  const JetT3& nonlinear_curvature_jets() const { return stage2().R; }
  const JetT3& nonlinear_torsion_jets() const { return stage2().tau; }

  // Horizontal derivative delta/delta x^b of a scalar jet field (Barthel N).
  Jet delta(const Jet& f, int b) const;

  double landsberg_asymmetry() const { return stage2().landsberg_asym; }

private:
  struct Stage2 {
    JetMat ginv;
    std::vector<Jet> G;
    JetMat N;
    JetT3 gamma, Gamma, Gbc, L, R, tau;
    JetT4 Gbcd;
    double landsberg_asym = 0.0;
  };
  const Stage2& stage2() const;

  const dsl::LagrangianSpec* spec_;
  BasePoint point_;
  int n_, K_;
  JetContextPtr ctx_;
  Jet L_;
  std::vector<Jet> y_;
  JetMat g_;
  JetT3 C_;
  double det_ = 0.0, scale_ = 0.0;
  bool degenerate_ = false;
  // lazily built on first access; a Geometry instance is used by one thread
  mutable std::optional<Stage2> stage2_;
};

// Spec-level operations (value views over the jet pipeline) -----------------

using ScalarField = std::function<Jet(const JetContextPtr&)>;

MetricTensor metric(const dsl::LagrangianSpec&, const BasePoint&, const GeometryOptions& = {});
Tensor2 inverse_metric(const MetricTensor&);
Tensor3 cartan_torsion(const dsl::LagrangianSpec&, const BasePoint&, const GeometryOptions& = {});
SprayData spray(const dsl::LagrangianSpec&, const BasePoint&, const GeometryOptions& = {});
Tensor3 nonlinear_torsion(const dsl::LagrangianSpec&, const BasePoint&, const GeometryOptions& = {});
double delta_derivative(const ScalarField&, const dsl::LagrangianSpec&, const BasePoint&, int dir,
                        const GeometryOptions& = {});
Tensor3 formal_christoffel(const dsl::LagrangianSpec&, const BasePoint&, const GeometryOptions& = {});
Tensor3 horizontal_christoffel(const dsl::LagrangianSpec&, const BasePoint&,
                               const GeometryOptions& = {});
std::pair<Tensor3, Tensor4> berwald_coefficients(const dsl::LagrangianSpec&, const BasePoint&,
                                                 const GeometryOptions& = {});
Tensor3 landsberg(const dsl::LagrangianSpec&, const BasePoint&, const GeometryOptions& = {});
Tensor3 nonlinear_curvature(const dsl::LagrangianSpec&, const BasePoint&,
                            const GeometryOptions& = {});
double eq4_residual(const dsl::LagrangianSpec&, const BasePoint&, const GeometryOptions& = {});

}  // namespace finsler::geom
