#include "finsler/connection.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "finsler/expr.hpp"

namespace finsler::conn {

using forms::Form;
using forms::MatrixValuedForm;
using forms::VectorValuedForm;
using geom::JetMat;
using geom::JetT3;

const char* catalogue_name(CatalogueKind k) {
  switch (k) {
    case CatalogueKind::Chern: return "chern";
    case CatalogueKind::Berwald: return "berwald";
    case CatalogueKind::Cartan: return "cartan";
    case CatalogueKind::Hashiguchi: return "hashiguchi";
  }
  return "?";
}

FinslerConnection catalogue(CatalogueKind kind) {
  auto fn = [kind](const geom::Geometry& g, JetT3& H, JetT3& V) {
    const int n = g.n();
    const bool berwald_h = (kind == CatalogueKind::Berwald || kind == CatalogueKind::Hashiguchi);
    const bool cartan_v = (kind == CatalogueKind::Cartan || kind == CatalogueKind::Hashiguchi);
    H = berwald_h ? g.berwald_jets() : g.horizontal_christoffel_jets();
    if (cartan_v) {
      // V^a_bc = g^{ad} C_dbc
      V = JetT3::build(n, [&](int a, int b, int c) {
        Jet acc = Jet::constant(g.ctx(), 0.0);
        for (int d = 0; d < n; ++d)
          acc = acc + g.metric_inverse_jets()(a, d) * g.cartan_jets()(d, b, c);
        return acc;
      });
    } else {
      V = JetT3::build(n, [&](int, int, int) { return Jet::constant(g.ctx(), 0.0); });
    }
  };
  return FinslerConnection(catalogue_name(kind), VBasis::Bar, fn);
}

FinslerConnection from_expressions(std::string name, VBasis basis, int n,
                                   const std::vector<std::string>& H_entries,
                                   const std::vector<std::string>& V_entries) {
  const std::size_t want = static_cast<std::size_t>(n) * n * n;
  if (H_entries.size() != want || V_entries.size() != want)
    throw InvalidArgument("custom connection: expected n^3 entries for H and V");
  auto parse_all = [&](const std::vector<std::string>& src) {
    std::vector<dsl::NodePtr> out;
    out.reserve(src.size());
    for (const auto& s : src) out.push_back(dsl::parse(s, n));
    return out;
  };
  auto Hx = std::make_shared<std::vector<dsl::NodePtr>>(parse_all(H_entries));
  auto Vx = std::make_shared<std::vector<dsl::NodePtr>>(parse_all(V_entries));
  auto fn = [Hx, Vx, n](const geom::Geometry& g, JetT3& H, JetT3& V) {
    auto eval = [&](const std::vector<dsl::NodePtr>& nodes) {
      return JetT3::build(n, [&](int a, int b, int c) {
        return dsl::evaluate_jet(*nodes[(static_cast<std::size_t>(a) * n + b) * n + c], g.ctx());
      });
    };
    H = eval(*Hx);
    V = eval(*Vx);
  };
  return FinslerConnection(std::move(name), basis, fn);
}

FinslerConnection apply_symmetry(const FinslerConnection& base, const SymmetryW& w) {
  auto fn = [base, w](const geom::Geometry& g, JetT3& H, JetT3& V) {
    base.coefficients(g, H, V);
    JetT3 W = w.eval(g);
    H = JetT3::build(g.n(), [&](int a, int b, int c) { return H(a, b, c) + W(a, b, c); });
  };
  return FinslerConnection(base.name() + "+" + w.name, base.basis(), fn);
}

WValidation validate_w(const SymmetryW& w, const geom::Geometry& g) {
  const int n = g.n();
  JetT3 W = w.eval(g);
  // lower the first index
  JetT3 Wl = JetT3::build(n, [&](int a, int b, int c) {
    Jet acc = Jet::constant(g.ctx(), 0.0);
    for (int d = 0; d < n; ++d) acc = acc + g.metric_jets()(a, d) * W(d, b, c);
    return acc;
  });
  double scale = 0.0, sym = 0.0, ann = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) scale = std::max(scale, std::abs(Wl(a, b, c).value()));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        sym = std::max(sym, std::abs(Wl(a, b, c).value() - Wl(b, a, c).value()));
        if (a == 0) {
          double contracted = 0.0;
          for (int bb = 0; bb < n; ++bb) contracted += Wl(b, bb, c).value() * g.point().y[bb];
          ann = std::max(ann, std::abs(contracted));
        }
      }
  WValidation out;
  out.symmetry_residual = sym / (1.0 + scale);
  out.annihilation_residual = ann / (1.0 + scale);
  return out;
}

// ---------------------------------------------------------------------------
// Frame

namespace {
JetMat contract_first_lower(const JetT3& t, const std::vector<Jet>& y, const JetContextPtr& ctx) {
  return JetMat::build(t.n(), [&](int a, int c) {
    Jet acc = Jet::constant(ctx, 0.0);
    for (int b = 0; b < t.n(); ++b) acc = acc + t(a, b, c) * y[b];
    return acc;
  });
}
}  // namespace

Frame::Frame(const geom::Geometry& geo, const FinslerConnection& connection)
    : geo_(&geo), name_(connection.name()), n_(geo.n()) {
  const JetContextPtr& ctx = geo.ctx();
  JetT3 Hin, Vin;
  connection.coefficients(geo, Hin, Vin);
  const std::vector<Jet>& y = geo.y_jets();

  if (connection.basis() == VBasis::Bar) {
    // Q = I - (V.y); omega_bar = Q^{-1} (dy + N dx); requires Q invertible
    JetMat Vy = contract_first_lower(Vin, y, ctx);
    JetMat Qm = JetMat::build(n_, [&](int a, int b) {
      Jet d = Jet::constant(ctx, a == b ? 1.0 : 0.0);
      return d - Vy(a, b);
    });
    JetMat Qinv = geom::jet_matrix_inverse(Qm);  // throws when the expansion is inconsistent
    JetMat Nm = contract_first_lower(Hin, y, ctx);
    JetMat QinvN = JetMat::build(n_, [&](int a, int c) {
      Jet acc = Jet::constant(ctx, 0.0);
      for (int d = 0; d < n_; ++d) acc = acc + Qinv(a, d) * Nm(d, c);
      return acc;
    });
    F_ = JetT3::build(n_, [&](int a, int b, int c) {
      Jet acc = Hin(a, b, c);
      for (int d = 0; d < n_; ++d) acc = acc + Vin(a, b, d) * QinvN(d, c);
      return acc;
    });
    U_ = JetT3::build(n_, [&](int a, int b, int c) {
      Jet acc = Jet::constant(ctx, 0.0);
      for (int d = 0; d < n_; ++d) acc = acc + Vin(a, b, d) * Qinv(d, c);
      return acc;
    });
    H_ = std::move(Hin);
    V_ = std::move(Vin);
    N_ = std::move(Nm);
    Q_ = std::move(Qm);
  } else {
    JetMat Nm = contract_first_lower(Hin, y, ctx);
    F_ = JetT3::build(n_, [&](int a, int b, int c) {
      Jet acc = Hin(a, b, c);
      for (int d = 0; d < n_; ++d) acc = acc + Vin(a, b, d) * Nm(d, c);
      return acc;
    });
    U_ = Vin;
  }

  // omega_bar over {dx,dy}: [F.y | I + U.y]
  JetMat barFx = contract_first_lower(F_, y, ctx);
  JetMat Uy = contract_first_lower(U_, y, ctx);
  JetMat barU = JetMat::build(n_, [&](int a, int b) {
    Jet d = Jet::constant(ctx, a == b ? 1.0 : 0.0);
    return d + Uy(a, b);
  });

  omega_bar_.comp.reserve(n_);
  for (int a = 0; a < n_; ++a) {
    Form f(2 * n_, 1);
    for (int c = 0; c < n_; ++c) {
      f.accumulate(1u << c, barFx(a, c));
      f.accumulate(1u << (n_ + c), barU(a, c));
    }
    omega_bar_.comp.push_back(std::move(f));
  }

  // numeric rank of the cobasis matrix {omega, omega_bar}
  Eigen::MatrixXd cob = Eigen::MatrixXd::Zero(2 * n_, 2 * n_);
  for (int a = 0; a < n_; ++a) cob(a, a) = 1.0;
  for (int a = 0; a < n_; ++a)
    for (int c = 0; c < n_; ++c) {
      cob(n_ + a, c) = barFx(a, c).value();
      cob(n_ + a, n_ + c) = barU(a, c).value();
    }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cob);
  double smax = svd.singularValues()(0);
  double smin = svd.singularValues()(2 * n_ - 1);
  regularity_ratio_ = (smax > 0.0) ? smin / smax : 0.0;
  regular_ = regularity_ratio_ > 1e-8;

  if (regular_ && !H_) {
    // recover (H, V) against omega_bar: V = U Q with Q = (I + U.y)^{-1}
    JetMat Qm = geom::jet_matrix_inverse(barU);
    JetT3 Vr = JetT3::build(n_, [&](int a, int b, int c) {
      Jet acc = Jet::constant(ctx, 0.0);
      for (int d = 0; d < n_; ++d) acc = acc + U_(a, b, d) * Qm(d, c);
      return acc;
    });
    JetT3 Hr = JetT3::build(n_, [&](int a, int b, int c) {
      Jet acc = F_(a, b, c);
      for (int d = 0; d < n_; ++d) acc = acc - Vr(a, b, d) * barFx(d, c);
      return acc;
    });
    N_ = contract_first_lower(Hr, y, ctx);
    H_ = std::move(Hr);
    V_ = std::move(Vr);
    Q_ = std::move(Qm);
  }

  if (regular_) {
    double scale = 0.0, raw = 0.0;
    JetMat Vy2 = contract_first_lower(*V_, y, ctx);
    for (int a = 0; a < n_; ++a)
      for (int b = 0; b < n_; ++b) {
        raw = std::max(raw, std::abs(Vy2(a, b).value()));
        for (int c = 0; c < n_; ++c)
          scale = std::max(scale, std::abs((*V_)(a, b, c).value()));
      }
    double ynorm = 0.0;
    for (double v : geo.point().y) ynorm = std::max(ynorm, std::abs(v));
    strong_residual_ = raw / (1.0 + scale * ynorm);
  } else {
    strong_residual_ = std::numeric_limits<double>::infinity();
  }
}

const JetT3& Frame::H() const {
  if (!H_) throw NumericDegeneracy("connection is not regular: no (H,V) expansion");
  return *H_;
}
const JetT3& Frame::V() const {
  if (!V_) throw NumericDegeneracy("connection is not regular: no (H,V) expansion");
  return *V_;
}
const JetMat& Frame::inducedN() const {
  if (!N_) throw NumericDegeneracy("connection is not regular: no induced N");
  return *N_;
}
const JetMat& Frame::Q() const {
  if (!Q_) throw NumericDegeneracy("connection is not regular: no Q matrix");
  return *Q_;
}
double Frame::strong_regularity_residual() const { return strong_residual_; }

Form Frame::dx(int a) const { return Form::cobasis(geo_->ctx(), a); }
Form Frame::dy(int a) const { return Form::cobasis(geo_->ctx(), n_ + a); }

MatrixValuedForm Frame::connection_form() const {
  MatrixValuedForm w = MatrixValuedForm::zero(n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b) {
      Form f(2 * n_, 1);
      for (int c = 0; c < n_; ++c) {
        f.accumulate(1u << c, F_(a, b, c));
        f.accumulate(1u << (n_ + c), U_(a, b, c));
      }
      w.at(a, b) = std::move(f);
    }
  return w;
}

VectorValuedForm Frame::omega() const {
  VectorValuedForm v;
  v.comp.reserve(n_);
  for (int a = 0; a < n_; ++a) v.comp.push_back(dx(a));
  return v;
}

VectorValuedForm Frame::omega_tilde() const {
  VectorValuedForm v;
  v.comp.reserve(n_);
  for (int a = 0; a < n_; ++a) {
    Form f = dy(a);
    for (int b = 0; b < n_; ++b) f += dx(b) * inducedN()(a, b);
    v.comp.push_back(std::move(f));
  }
  return v;
}

forms::CobasisMap Frame::adapted_cobasis() const {
  const JetContextPtr& ctx = geo_->ctx();
  geom::JetMat B = geom::JetMat::build(2 * n_, [&](int i, int j) {
    if (i < n_) return Jet::constant(ctx, i == j ? 1.0 : 0.0);
    const Form& ob = omega_bar_.comp[i - n_];
    auto it = ob.terms().find(1u << j);
    return it != ob.terms().end() ? it->second : Jet::constant(ctx, 0.0);
  });
  forms::CobasisMap map;
  map.Binv = geom::jet_matrix_inverse(B);
  map.B = std::move(B);
  return map;
}

VectorValuedForm Frame::D_vector(const VectorValuedForm& phi) const {
  MatrixValuedForm w = connection_form();
  VectorValuedForm out;
  out.comp.reserve(n_);
  for (int a = 0; a < n_; ++a) {
    Form f = forms::exterior_derivative(phi.comp[a]);
    for (int b = 0; b < n_; ++b) f += forms::wedge(w.at(a, b), phi.comp[b]);
    out.comp.push_back(std::move(f));
  }
  return out;
}

VectorValuedForm Frame::D_covector(const VectorValuedForm& psi) const {
  MatrixValuedForm w = connection_form();
  VectorValuedForm out;
  out.comp.reserve(n_);
  for (int b = 0; b < n_; ++b) {
    Form f = forms::exterior_derivative(psi.comp[b]);
    for (int c = 0; c < n_; ++c) f -= forms::wedge(w.at(c, b), psi.comp[c]);
    out.comp.push_back(std::move(f));
  }
  return out;
}

MatrixValuedForm Frame::D_bilinear(const MatrixValuedForm& t) const {
  MatrixValuedForm w = connection_form();
  MatrixValuedForm out = MatrixValuedForm::zero(n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b) {
      Form f = forms::exterior_derivative(t.at(a, b));
      for (int c = 0; c < n_; ++c) {
        f -= forms::wedge(w.at(c, a), t.at(c, b));
        f -= forms::wedge(w.at(c, b), t.at(a, c));
      }
      out.at(a, b) = std::move(f);
    }
  return out;
}

MatrixValuedForm Frame::D_endo(const MatrixValuedForm& t) const {
  MatrixValuedForm w = connection_form();
  MatrixValuedForm out = MatrixValuedForm::zero(n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b) {
      Form f = forms::exterior_derivative(t.at(a, b));
      for (int c = 0; c < n_; ++c) {
        f += forms::wedge(w.at(a, c), t.at(c, b));
        f -= forms::wedge(w.at(c, b), t.at(a, c));
      }
      out.at(a, b) = std::move(f);
    }
  return out;
}

MatrixValuedForm Frame::Dg() const {
  const geom::JetMat& g = geo_->metric_jets();
  MatrixValuedForm w = connection_form();
  MatrixValuedForm out = MatrixValuedForm::zero(n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b) {
      Form f(2 * n_, 1);
      for (int t = 0; t < 2 * n_; ++t) f.accumulate(1u << t, g(a, b).derivative_jet(t));
      for (int c = 0; c < n_; ++c) {
        f -= w.at(c, a) * g(c, b);
        f -= w.at(c, b) * g(a, c);
      }
      out.at(a, b) = std::move(f);
    }
  return out;
}

VectorValuedForm Frame::horizontal_torsion() const {
  MatrixValuedForm w = connection_form();
  VectorValuedForm out;
  out.comp.reserve(n_);
  for (int a = 0; a < n_; ++a) {
    Form acc(2 * n_, 2);
    for (int b = 0; b < n_; ++b) acc += forms::wedge(w.at(a, b), dx(b));
    out.comp.push_back(std::move(acc));
  }
  return out;
}

VectorValuedForm Frame::vertical_torsion() const { return D_vector(omega_bar_); }

MatrixValuedForm Frame::curvature() const {
  MatrixValuedForm w = connection_form();
  MatrixValuedForm out = MatrixValuedForm::zero(n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b) {
      Form f = forms::exterior_derivative(w.at(a, b));
      for (int c = 0; c < n_; ++c) f += forms::wedge(w.at(a, c), w.at(c, b));
      out.at(a, b) = std::move(f);
    }
  return out;
}

Frame::BianchiResiduals Frame::bianchi_residuals() const {
  BianchiResiduals out;
  MatrixValuedForm R = curvature();
  VectorValuedForm T = horizontal_torsion();
  VectorValuedForm Tb = vertical_torsion();
  VectorValuedForm DT = D_vector(T);
  VectorValuedForm DTb = D_vector(Tb);
  double scale = std::max({R.max_abs_value(), T.max_abs_value(), Tb.max_abs_value(), 1.0});
  for (int a = 0; a < n_; ++a) {
    Form r1 = DT.comp[a];
    Form r2 = DTb.comp[a];
    for (int b = 0; b < n_; ++b) {
      r1 -= forms::wedge(R.at(a, b), dx(b));
      r2 -= forms::wedge(R.at(a, b), omega_bar_.comp[b]);
    }
    out.first_T = std::max(out.first_T, r1.max_abs_value() / scale);
    out.first_Tbar = std::max(out.first_Tbar, r2.max_abs_value() / scale);
  }
  MatrixValuedForm DR = D_endo(R);
  out.second = DR.max_abs_value() / scale;
  return out;
}

VectorValuedForm Frame::canonical_horizontal_torsion() const {
  const geom::JetMat& ginv = geo_->metric_inverse_jets();
  MatrixValuedForm dg = Dg();
  VectorValuedForm out = horizontal_torsion();
  for (int a = 0; a < n_; ++a) {
    for (int r = 0; r < n_; ++r)
      for (int b = 0; b < n_; ++b)
        out.comp[a] += forms::wedge(dg.at(r, b) * ginv(a, r), dx(b)) * 0.5;
  }
  return out;
}

VectorValuedForm Frame::canonical_vertical_torsion() const {
  const geom::JetMat& ginv = geo_->metric_inverse_jets();
  MatrixValuedForm dg = Dg();
  // phi^a_b = 1/2 g^{ar} Dg_rb ;  B^a = phi^a_b y^b
  MatrixValuedForm phi = MatrixValuedForm::zero(n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b) {
      Form f;
      for (int r = 0; r < n_; ++r) f += dg.at(r, b) * (ginv(a, r) * 0.5);
      phi.at(a, b) = std::move(f);
    }
  VectorValuedForm B;
  B.comp.reserve(n_);
  for (int a = 0; a < n_; ++a) {
    Form f;
    for (int b = 0; b < n_; ++b) f += phi.at(a, b) * geo_->y_jets()[b];
    if (f.is_zero()) f = Form(2 * n_, 1);
    B.comp.push_back(std::move(f));
  }
  VectorValuedForm DB = D_vector(B);
  VectorValuedForm out = vertical_torsion();
  for (int a = 0; a < n_; ++a) {
    Form acc = out.comp[a];
    for (int b = 0; b < n_; ++b) {
      acc += forms::wedge(phi.at(a, b), omega_bar_.comp[b] + B.comp[b]);
    }
    acc += DB.comp[a];
    out.comp[a] = std::move(acc);
  }
  return out;
}

MatrixValuedForm Frame::canonical_curvature() const {
  const geom::JetMat& g = geo_->metric_jets();
  const geom::JetMat& ginv = geo_->metric_inverse_jets();
  MatrixValuedForm R = curvature();
  MatrixValuedForm dg = Dg();
  MatrixValuedForm Rlow = MatrixValuedForm::zero(n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b) {
      Form f;
      for (int c = 0; c < n_; ++c) f += R.at(c, b) * g(a, c);
      Rlow.at(a, b) = std::move(f);
    }
  MatrixValuedForm out = MatrixValuedForm::zero(n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b) {
      Form f = (Rlow.at(a, b) - Rlow.at(b, a)) * 0.5;
      for (int c = 0; c < n_; ++c)
        for (int s = 0; s < n_; ++s)
          f -= forms::wedge(dg.at(a, c) * ginv(c, s), dg.at(s, b)) * 0.25;
      out.at(a, b) = std::move(f);
    }
  return out;
}

Form Frame::omega_two_form() const {
  const geom::JetMat& g = geo_->metric_jets();
  Form acc(2 * n_, 2);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b) acc += forms::wedge(omega_bar_.comp[a], dx(b)) * g(a, b);
  return acc;
}

Eigen::MatrixXd Frame::omega_matrix() const {
  Form om = omega_two_form();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(2 * n_, 2 * n_);
  for (const auto& [mask, j] : om.terms()) {
    int i = std::countr_zero(mask);
    int k = 31 - std::countl_zero(mask);
    M(i, k) = j.value();
    M(k, i) = -j.value();
  }
  return M;
}

double Frame::omega_conditioning() const {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(omega_matrix());
  double smax = svd.singularValues()(0);
  if (!(smax > 0.0)) return 0.0;
  return svd.singularValues()(2 * n_ - 1) / smax;
}

Form Frame::hilbert_form() const {
  const geom::JetMat& g = geo_->metric_jets();
  Form acc(2 * n_, 1);
  for (int b = 0; b < n_; ++b) {
    Jet coeff = Jet::constant(geo_->ctx(), 0.0);
    for (int a = 0; a < n_; ++a) coeff = coeff + geo_->y_jets()[a] * g(a, b);
    acc.accumulate(1u << b, coeff);
  }
  return acc;
}

Frame::MetricDecomposition Frame::metric_differential() const {
  forms::CobasisMap map = adapted_cobasis();
  MatrixValuedForm dg = Dg();
  MetricDecomposition out;
  out.Lambda.n = n_;
  out.Pi.n = n_;
  out.Lambda.v.assign(static_cast<std::size_t>(n_) * n_ * n_, 0.0);
  out.Pi.v.assign(static_cast<std::size_t>(n_) * n_ * n_, 0.0);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b) {
      const Form& f = dg.at(a, b);
      for (int c = 0; c < 2 * n_; ++c) {
        // adapted component c of the 1-form: sum_j f_j Binv(j, c)
        double comp = 0.0;
        for (const auto& [mask, j] : f.terms()) {
          int slot = std::countr_zero(mask);
          comp += j.value() * map.Binv(slot, c).value();
        }
        if (c < n_)
          out.Lambda.v[(static_cast<std::size_t>(a) * n_ + b) * n_ + c] = -0.5 * comp;
        else
          out.Pi.v[(static_cast<std::size_t>(a) * n_ + b) * n_ + (c - n_)] = -0.5 * comp;
      }
    }
  return out;
}

double Frame::distance(const Frame& x, const Frame& y) {
  double scale = 0.0, diff = 0.0;
  const int n = x.n_;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        double f1 = x.F_(a, b, c).value(), f2 = y.F_(a, b, c).value();
        double u1 = x.U_(a, b, c).value(), u2 = y.U_(a, b, c).value();
        scale = std::max({scale, std::abs(f1), std::abs(f2), std::abs(u1), std::abs(u2)});
        diff = std::max({diff, std::abs(f1 - f2), std::abs(u1 - u2)});
      }
  return diff / (1.0 + scale);
}

FinslerConnection canonical_metric_connection(const FinslerConnection& base) {
  auto fn = [base](const geom::Geometry& g, JetT3& H, JetT3& V) {
    Frame f(g, base);
    const int n = g.n();
    const JetContextPtr& ctx = g.ctx();
    const geom::JetMat& ginv = g.metric_inverse_jets();
    MatrixValuedForm dg = f.Dg();
    // F' = F + (1/2 g^{ar} Dg_rb)_x-part, U' likewise from the dy-part
    JetT3 Fp = JetT3::build(n, [&](int a, int b, int c) {
      Jet acc = f.Fcoef()(a, b, c);
      for (int r = 0; r < n; ++r) {
        auto it = dg.at(r, b).terms().find(1u << c);
        if (it != dg.at(r, b).terms().end()) acc = acc + ginv(a, r) * it->second * 0.5;
      }
      return acc;
    });
    JetT3 Up = JetT3::build(n, [&](int a, int b, int c) {
      Jet acc = f.Ucoef()(a, b, c);
      for (int r = 0; r < n; ++r) {
        auto it = dg.at(r, b).terms().find(1u << (n + c));
        if (it != dg.at(r, b).terms().end()) acc = acc + ginv(a, r) * it->second * 0.5;
      }
      return acc;
    });
    // convert {dx,dy} components back to (H, V) against omega-bar
    const std::vector<Jet>& y = g.y_jets();
    geom::JetMat barU = geom::JetMat::build(n, [&](int a, int c) {
      Jet acc = Jet::constant(ctx, a == c ? 1.0 : 0.0);
      for (int b = 0; b < n; ++b) acc = acc + Up(a, b, c) * y[b];
      return acc;
    });
    geom::JetMat Qm = geom::jet_matrix_inverse(barU);
    geom::JetMat barFx = geom::JetMat::build(n, [&](int a, int c) {
      Jet acc = Jet::constant(ctx, 0.0);
      for (int b = 0; b < n; ++b) acc = acc + Fp(a, b, c) * y[b];
      return acc;
    });
    V = JetT3::build(n, [&](int a, int b, int c) {
      Jet acc = Jet::constant(ctx, 0.0);
      for (int d = 0; d < n; ++d) acc = acc + Up(a, b, d) * Qm(d, c);
      return acc;
    });
    H = JetT3::build(n, [&](int a, int b, int c) {
      Jet acc = Fp(a, b, c);
      for (int d = 0; d < n; ++d) acc = acc - V(a, b, d) * barFx(d, c);
      return acc;
    });
  };
  return FinslerConnection("canonical(" + base.name() + ")", VBasis::Bar, fn);
}

}  // namespace finsler::conn
