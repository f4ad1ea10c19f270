#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "finsler/geometry.hpp"
#include "finsler/jet.hpp"

namespace finsler::forms {

// Scalar-valued k-form on E over the coordinate cobasis {dx^1..dx^n,
// dy^1..dy^n}. Components are jets, so forms can be differentiated again;
// storage is canonical: one jet per strictly increasing index tuple, encoded
// as a bitmask over the 2n cobasis slots (bit i = dx^{i+1} for i < n,
// dy^{i-n+1} otherwise).
class Form {
public:
  Form() = default;
  Form(int ambient, int degree) : ambient_(ambient), degree_(degree) {}
  static Form cobasis(const JetContextPtr&, int slot);  // dz^slot

  int ambient() const { return ambient_; }
  int degree() const { return degree_; }
  bool is_zero() const { return terms_.empty(); }
  const std::map<uint32_t, Jet>& terms() const { return terms_; }

  // accumulate coeff * dz^{mask}; mask must have popcount == degree
  void accumulate(uint32_t mask, const Jet& coeff);
  double max_abs_value() const;

  Form& operator+=(const Form&);
  Form& operator-=(const Form&);
  friend Form operator+(Form a, const Form& b) { return a += b; }
  friend Form operator-(Form a, const Form& b) { return a -= b; }
  friend Form operator*(const Form&, const Jet&);
  friend Form operator*(const Form&, double);
  friend Form operator*(double s, const Form& f) { return f * s; }

private:
  int ambient_ = 0;
  int degree_ = 0;
  std::map<uint32_t, Jet> terms_;
};

// Graded-anticommutative product; a result of degree > 2n is the zero form.
Form wedge(const Form&, const Form&);
// d via jet differentiation of the components; d(d(f)) vanishes identically
// because mixed extractions share storage.
Form exterior_derivative(const Form&);
// Evaluate a k-form on k constant vectors (components in the 2n chart basis).
Jet evaluate(const Form&, std::span<const std::vector<double>> vectors);

// TM-valued form: one scalar form per upper index.
struct VectorValuedForm {
  std::vector<Form> comp;

  int size() const { return static_cast<int>(comp.size()); }
  VectorValuedForm& operator+=(const VectorValuedForm&);
  VectorValuedForm& operator-=(const VectorValuedForm&);
  friend VectorValuedForm operator+(VectorValuedForm a, const VectorValuedForm& b) { return a += b; }
  friend VectorValuedForm operator-(VectorValuedForm a, const VectorValuedForm& b) { return a -= b; }
  double max_abs_value() const;
};

// Endomorphism- or bilinear-valued form: n x n scalar forms.
struct MatrixValuedForm {
  int n = 0;
  std::vector<Form> comp;

  static MatrixValuedForm zero(int n) {
    MatrixValuedForm m;
    m.n = n;
    m.comp.resize(static_cast<std::size_t>(n) * n);
    return m;
  }
  Form& at(int a, int b) { return comp[static_cast<std::size_t>(a) * n + b]; }
  const Form& at(int a, int b) const { return comp[static_cast<std::size_t>(a) * n + b]; }
  MatrixValuedForm& operator+=(const MatrixValuedForm&);
  MatrixValuedForm& operator-=(const MatrixValuedForm&);
  friend MatrixValuedForm operator+(MatrixValuedForm a, const MatrixValuedForm& b) { return a += b; }
  friend MatrixValuedForm operator-(MatrixValuedForm a, const MatrixValuedForm& b) { return a -= b; }
  double max_abs_value() const;
};

// Contractions ("the dot"): indices pair positionally.
// (g . phi)_a = g_ab phi^b
VectorValuedForm lower_index(const geom::JetMat& g, const VectorValuedForm&);
// y^a psi_a
Form contract_vector(std::span<const Jet> y, const VectorValuedForm&);
// sum_a phi^a wedge psi_a  (the "dot-wedge" pairing of a TM-valued with a
// T*M-valued form)
Form pair_wedge(const VectorValuedForm&, const VectorValuedForm&);

// Change of cobasis: theta^i = sum_j B(i,j) dz^j with inverse Binv.
struct CobasisMap {
  geom::JetMat B;
  geom::JetMat Binv;
};
// Rewrites a form over {dz} into components over {theta} (masks then index
// theta slots), and back.
Form to_adapted(const Form&, const CobasisMap&);
Form from_adapted(const Form&, const CobasisMap&);

}  // namespace finsler::forms
