#include "finsler/forms.hpp"

#include <bit>
#include <cmath>

namespace finsler::forms {

namespace {
// sign of dz^t ^ dz^{mask} when t is inserted into the increasing tuple
int insertion_sign(uint32_t mask, int t) {
  return (std::popcount(mask & ((1u << t) - 1u)) % 2) ? -1 : 1;
}
// sign of dz^{a} ^ dz^{b} for disjoint masks a, b when merged to sorted order
int merge_sign(uint32_t a, uint32_t b) {
  int inversions = 0;
  uint32_t bb = b;
  while (bb) {
    int t = std::countr_zero(bb);
    inversions += std::popcount(a >> (t + 1));
    bb &= bb - 1u;
  }
  return (inversions % 2) ? -1 : 1;
}
}  // namespace

Form Form::cobasis(const JetContextPtr& ctx, int slot) {
  if (slot < 0 || slot >= ctx->dim()) throw InvalidArgument("cobasis slot out of range");
  Form f(ctx->dim(), 1);
  f.accumulate(1u << slot, Jet::constant(ctx, 1.0));
  return f;
}

void Form::accumulate(uint32_t mask, const Jet& coeff) {
  if (std::popcount(mask) != degree_) throw InvalidArgument("form term of wrong degree");
  auto it = terms_.find(mask);
  if (it == terms_.end())
    terms_.emplace(mask, coeff);
  else
    it->second = it->second + coeff;
}

double Form::max_abs_value() const {
  double m = 0.0;
  for (const auto& [mask, j] : terms_) m = std::max(m, std::abs(j.value()));
  return m;
}

Form& Form::operator+=(const Form& o) {
  if (ambient_ == 0) ambient_ = o.ambient_, degree_ = o.degree_;
  if (o.ambient_ != 0 && (o.ambient_ != ambient_ || o.degree_ != degree_))
    throw InvalidArgument("form addition: mismatched ambient dimension or degree");
  for (const auto& [mask, j] : o.terms_) accumulate(mask, j);
  return *this;
}

Form& Form::operator-=(const Form& o) {
  if (ambient_ == 0) ambient_ = o.ambient_, degree_ = o.degree_;
  if (o.ambient_ != 0 && (o.ambient_ != ambient_ || o.degree_ != degree_))
    throw InvalidArgument("form subtraction: mismatched ambient dimension or degree");
  for (const auto& [mask, j] : o.terms_) accumulate(mask, -j);
  return *this;
}

Form operator*(const Form& f, const Jet& s) {
  Form out(f.ambient(), f.degree());
  for (const auto& [mask, j] : f.terms()) out.accumulate(mask, j * s);
  return out;
}

Form operator*(const Form& f, double s) {
  Form out(f.ambient(), f.degree());
  for (const auto& [mask, j] : f.terms()) out.accumulate(mask, j * s);
  return out;
}

Form wedge(const Form& a, const Form& b) {
  Form out(a.ambient() ? a.ambient() : b.ambient(), a.degree() + b.degree());
  for (const auto& [ma, ja] : a.terms()) {
    for (const auto& [mb, jb] : b.terms()) {
      if (ma & mb) continue;
      int sign = merge_sign(ma, mb);
      Jet prod = ja * jb;
      out.accumulate(ma | mb, sign < 0 ? -prod : prod);
    }
  }
  return out;
}

Form exterior_derivative(const Form& f) {
  Form out(f.ambient(), f.degree() + 1);
  for (const auto& [mask, j] : f.terms()) {
    for (int t = 0; t < f.ambient(); ++t) {
      if (mask & (1u << t)) continue;
      Jet dj = j.derivative_jet(t);
      int sign = insertion_sign(mask, t);
      out.accumulate(mask | (1u << t), sign < 0 ? -dj : dj);
    }
  }
  return out;
}

Jet evaluate(const Form& f, std::span<const std::vector<double>> vectors) {
  if (static_cast<int>(vectors.size()) != f.degree())
    throw InvalidArgument("form evaluation needs exactly degree-many vectors");
  const Jet* any = nullptr;
  for (const auto& [mask, j] : f.terms()) {
    any = &j;
    break;
  }
  if (!any) throw InvalidArgument("cannot evaluate an identically empty form without a context");
  Jet acc = Jet::constant(any->context(), 0.0);
  const int k = f.degree();
  std::vector<int> slots(k);
  for (const auto& [mask, j] : f.terms()) {
    int idx = 0;
    for (int t = 0; t < f.ambient(); ++t)
      if (mask & (1u << t)) slots[idx++] = t;
    // det of the k x k matrix vectors[l][slots[m]], k <= 3 in practice
    double det = 0.0;
    if (k == 0) det = 1.0;
    else if (k == 1) det = vectors[0][slots[0]];
    else if (k == 2)
      det = vectors[0][slots[0]] * vectors[1][slots[1]] - vectors[0][slots[1]] * vectors[1][slots[0]];
    else {
      std::vector<int> perm(k);
      for (int i = 0; i < k; ++i) perm[i] = i;
      // permutation expansion
      std::function<void(int, int, double)> rec = [&](int depth, int used_mask, double sign) {
        if (depth == k) {
          double term = sign;
          for (int i = 0; i < k; ++i) term *= vectors[i][slots[perm[i]]];
          det += term;
          return;
        }
        for (int c = 0; c < k; ++c) {
          if (used_mask & (1 << c)) continue;
          perm[depth] = c;
          int swaps = 0;
          for (int d = 0; d < depth; ++d)
            if (perm[d] > c) ++swaps;
          rec(depth + 1, used_mask | (1 << c), (swaps % 2) ? -sign : sign);
        }
      };
      det = 0.0;
      rec(0, 0, 1.0);
    }
    acc = acc + j * det;
  }
  return acc;
}

VectorValuedForm& VectorValuedForm::operator+=(const VectorValuedForm& o) {
  if (comp.empty()) comp = o.comp;
  else
    for (std::size_t i = 0; i < comp.size(); ++i) comp[i] += o.comp[i];
  return *this;
}

VectorValuedForm& VectorValuedForm::operator-=(const VectorValuedForm& o) {
  for (std::size_t i = 0; i < comp.size(); ++i) comp[i] -= o.comp[i];
  return *this;
}

double VectorValuedForm::max_abs_value() const {
  double m = 0.0;
  for (const auto& f : comp) m = std::max(m, f.max_abs_value());
  return m;
}

MatrixValuedForm& MatrixValuedForm::operator+=(const MatrixValuedForm& o) {
  for (std::size_t i = 0; i < comp.size(); ++i) comp[i] += o.comp[i];
  return *this;
}

MatrixValuedForm& MatrixValuedForm::operator-=(const MatrixValuedForm& o) {
  for (std::size_t i = 0; i < comp.size(); ++i) comp[i] -= o.comp[i];
  return *this;
}

double MatrixValuedForm::max_abs_value() const {
  double m = 0.0;
  for (const auto& f : comp) m = std::max(m, f.max_abs_value());
  return m;
}

VectorValuedForm lower_index(const geom::JetMat& g, const VectorValuedForm& phi) {
  const int n = g.n();
  VectorValuedForm out;
  out.comp.reserve(n);
  for (int a = 0; a < n; ++a) {
    Form acc;
    for (int b = 0; b < n; ++b) acc += phi.comp[b] * g(a, b);
    out.comp.push_back(std::move(acc));
  }
  return out;
}

Form contract_vector(std::span<const Jet> y, const VectorValuedForm& psi) {
  Form acc;
  for (std::size_t a = 0; a < y.size(); ++a) acc += psi.comp[a] * y[a];
  return acc;
}

Form pair_wedge(const VectorValuedForm& a, const VectorValuedForm& b) {
  Form acc;
  for (std::size_t i = 0; i < a.comp.size(); ++i) acc += wedge(a.comp[i], b.comp[i]);
  return acc;
}

namespace {
Form substitute(const Form& f, const geom::JetMat& rows) {
  // replace dz^j by the 1-form with coefficients rows(j, i) over the target
  // cobasis, expanding each term by wedging the substituted slots in order
  const int dim = rows.n();
  Form out(dim, f.degree());
  for (const auto& [mask, j] : f.terms()) {
    Form term(dim, 0);
    term.accumulate(0, Jet::constant(j.context(), 1.0));
    for (int t = 0; t < dim; ++t) {
      if (!(mask & (1u << t))) continue;
      Form row(dim, 1);
      for (int i = 0; i < dim; ++i) row.accumulate(1u << i, rows(t, i));
      term = wedge(term, row);
    }
    out += term * j;
  }
  return out;
}
}  // namespace

Form to_adapted(const Form& f, const CobasisMap& map) { return substitute(f, map.Binv); }
Form from_adapted(const Form& f, const CobasisMap& map) { return substitute(f, map.B); }

}  // namespace finsler::forms
