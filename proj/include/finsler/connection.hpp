#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>

#include "finsler/forms.hpp"
#include "finsler/geometry.hpp"

namespace finsler::conn {

enum class VBasis { Bar, Tilde };
enum class CatalogueKind { Chern, Berwald, Cartan, Hashiguchi };

const char* catalogue_name(CatalogueKind);

// A Finsler connection as coefficient fields: omega^a_b = H^a_bc omega^c +
// V^a_bc (omega-bar or omega-tilde)^c, with the vertical basis made explicit.
// Fields are evaluated per point against the geometry pipeline, so they stay
// differentiable.
class FinslerConnection {
public:
  using CoeffFn = std::function<void(const geom::Geometry&, geom::JetT3& H, geom::JetT3& V)>;

  FinslerConnection(std::string name, VBasis basis, CoeffFn fn)
      : name_(std::move(name)), basis_(basis), fn_(std::move(fn)) {}

  const std::string& name() const { return name_; }
  VBasis basis() const { return basis_; }
  void coefficients(const geom::Geometry& g, geom::JetT3& H, geom::JetT3& V) const { fn_(g, H, V); }

private:
  std::string name_;
  VBasis basis_;
  CoeffFn fn_;
};

FinslerConnection catalogue(CatalogueKind);
// Custom connection from expression tables (row-major n^3 entries each, in
// the variables x1..xn, y1..yn).
FinslerConnection from_expressions(std::string name, VBasis basis, int n,
                                   const std::vector<std::string>& H_entries,
                                   const std::vector<std::string>& V_entries);

// The symmetry shift omega'^a_b = omega^a_b + W^a_bc omega^c. Admissible W
// have lowered W_abc symmetric in the first two slots and y-annihilated
// there; the amplified variant drops the y-annihilation.
struct SymmetryW {
  std::string name;
  std::function<geom::JetT3(const geom::Geometry&)> eval;  // W^a_bc, first index raised
};

FinslerConnection apply_symmetry(const FinslerConnection&, const SymmetryW&);

struct WValidation {
  double symmetry_residual = 0.0;      // |W_abc - W_bac| normalized
  double annihilation_residual = 0.0;  // |W_abc y^b| normalized
  bool admissible(double tol) const {
    return symmetry_residual < tol && annihilation_residual < tol;
  }
};
WValidation validate_w(const SymmetryW&, const geom::Geometry&);

// All per-point machinery derived from (geometry, connection): coefficient
// tensors, the connection form over {dx, dy}, regularity data, torsions,
// curvature, canonical objects and the two-form Omega.
class Frame {
public:
  Frame(const geom::Geometry&, const FinslerConnection&);

  const geom::Geometry& geometry() const { return *geo_; }
  const std::string& connection_name() const { return name_; }
  int n() const { return n_; }

  // omega^a_b = F^a_bc dx^c + U^a_bc dy^c (always available)
  const geom::JetT3& Fcoef() const { return F_; }
  const geom::JetT3& Ucoef() const { return U_; }

  bool regular() const { return regular_; }
  double regularity_ratio() const { return regularity_ratio_; }
  // these require regularity
  const geom::JetT3& H() const;
  const geom::JetT3& V() const;          // against omega-bar
  const geom::JetMat& inducedN() const;  // H^a_bc y^b
  const geom::JetMat& Q() const;         // delta - V^a_cb y^c
  double strong_regularity_residual() const;
  bool strongly_regular(double tol = 1e-8) const {
    return regular_ && strong_regularity_residual() < tol;
  }

  forms::MatrixValuedForm connection_form() const;  // omega^a_b
  forms::VectorValuedForm omega() const;            // dx^a
  const forms::VectorValuedForm& omega_bar() const { return omega_bar_; }  // Dy
  forms::VectorValuedForm omega_tilde() const;      // dy^a + N^a_b dx^b
  forms::CobasisMap adapted_cobasis() const;        // {omega^a, omega_bar^a}

  // covariant exterior differentials for the tensor valences in use
  forms::VectorValuedForm D_vector(const forms::VectorValuedForm&) const;
  forms::VectorValuedForm D_covector(const forms::VectorValuedForm&) const;
  forms::MatrixValuedForm D_bilinear(const forms::MatrixValuedForm&) const;
  forms::MatrixValuedForm D_endo(const forms::MatrixValuedForm&) const;

  forms::MatrixValuedForm Dg() const;
  forms::VectorValuedForm horizontal_torsion() const;  // T = D omega
  forms::VectorValuedForm vertical_torsion() const;    // Tbar = D omega_bar = R(y)
  forms::MatrixValuedForm curvature() const;           // R^a_b

  struct BianchiResiduals {
    double first_T = 0.0;     // DT - R ^. omega
    double first_Tbar = 0.0;  // DTbar - R ^. omega_bar
    double second = 0.0;      // DR
  };
  BianchiResiduals bianchi_residuals() const;

  forms::VectorValuedForm canonical_horizontal_torsion() const;  // Psi
  forms::VectorValuedForm canonical_vertical_torsion() const;    // Psibar
  forms::MatrixValuedForm canonical_curvature() const;           // Rtilde (lowered)

  forms::Form omega_two_form() const;  // g_ab omega_bar^a ^ omega^b
  Eigen::MatrixXd omega_matrix() const;
  double omega_conditioning() const;  // sigma_min / sigma_max
  bool omega_nondegenerate(double threshold = 1e-8) const {
    return omega_conditioning() > threshold;
  }
  forms::Form hilbert_form() const;  // y.g.omega

  struct MetricDecomposition {
    geom::Tensor3 Lambda;  // Dg = -2 Lambda_abc omega^c - 2 Pi_abc omega_bar^c
    geom::Tensor3 Pi;
  };
  MetricDecomposition metric_differential() const;

  // max |F1-F2| + |U1-U2| over components (values), scale-normalized
  static double distance(const Frame&, const Frame&);

private:
  const geom::Geometry* geo_;
  std::string name_;
  int n_;
  geom::JetT3 F_, U_;
  std::optional<geom::JetT3> H_, V_;
  std::optional<geom::JetMat> N_, Q_;
  forms::VectorValuedForm omega_bar_;
  bool regular_ = false;
  double regularity_ratio_ = 0.0;
  double strong_residual_ = 0.0;

  forms::Form dx(int a) const;
  forms::Form dy(int a) const;
};

// The Dg = 0 companion: omega'^a_b = omega^a_b + (1/2) g^{ar} Dg_rb.
FinslerConnection canonical_metric_connection(const FinslerConnection&);

}  // namespace finsler::conn
