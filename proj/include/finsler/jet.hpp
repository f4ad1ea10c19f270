#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "finsler/errors.hpp"

namespace finsler {

// Exponent vector of a partial derivative in `dim` variables. The first n
// slots address x-directions, the last n address y-directions.
struct MultiIndex {
  std::vector<int> e;

  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> exps) : e(std::move(exps)) {}
  static MultiIndex unit(int dim, int dir);

  int order() const;
  bool operator==(const MultiIndex&) const = default;
};

// Enumeration of all multi-indices of a given dimension with total order
// <= max_order, plus the precomputed product/shift tables that make jet
// arithmetic a flat loop.
//
// Rank function (documented contract, relied upon by dense storage):
//   * indices are grouped by total order, ascending; rank 0 is the zero index;
//   * within one total-order block, indices are sorted lexicographically
//     descending on the exponent vector, so (m,0,...,0) leads its block and
//     (0,...,0,m) closes it.
class JetTable {
public:
  // Process-wide cache, keyed by (dim, max_order). Thread-safe.
  static std::shared_ptr<const JetTable> get(int dim, int max_order);

  int dim() const { return dim_; }
  int max_order() const { return max_order_; }
  int size() const { return static_cast<int>(indices_.size()); }

  const MultiIndex& index(int rank) const { return indices_[rank]; }
  int order_of(int rank) const { return degree_[rank]; }
  double factorial(int rank) const { return factorial_[rank]; }
  // -1 when the index is not representable (wrong dim or order overflow).
  int rank(const MultiIndex&) const;

  // rank of index(r) + e_dir, or -1 when that exceeds max_order.
  int shift(int dir, int r) const { return shift_[dir][r]; }
  // exponent of direction dir inside index(r) + e_dir.
  double shift_factor(int dir, int r) const { return shift_factor_[dir][r]; }

  struct MulTerm {
    int32_t a, b, c;  // coefficient ranks: c picks up a*b
  };
  // All product terms whose result index has total order <= result_order.
  std::span<const MulTerm> products(int result_order) const;

private:
  JetTable(int dim, int max_order);

  int dim_, max_order_;
  std::vector<MultiIndex> indices_;
  std::vector<int> degree_;
  std::vector<double> factorial_;
  std::vector<std::vector<int>> shift_;
  std::vector<std::vector<double>> shift_factor_;
  std::vector<MulTerm> terms_;
  std::vector<std::size_t> terms_by_order_;  // prefix offsets per result order
};

// Evaluation point on the slit tangent bundle plus the truncation order all
// jets rooted at it share. Immutable; jets keep a shared handle.
class JetContext {
public:
  JetContext(int n, int order, std::span<const double> base_point);

  int n() const { return n_; }
  int dim() const { return 2 * n_; }
  int order() const { return order_; }
  std::span<const double> base() const { return base_; }
  const std::shared_ptr<const JetTable>& table() const { return table_; }

private:
  int n_, order_;
  std::vector<double> base_;
  std::shared_ptr<const JetTable> table_;
};

using JetContextPtr = std::shared_ptr<const JetContext>;

JetContextPtr make_context(int n, int order, std::span<const double> base_point);

// Truncated multivariate Taylor expansion of a scalar at the context's base
// point. Coefficients are Taylor coefficients (derivative / multi-index
// factorial). `order()` is the effective truncation order: coefficients of
// higher total order are meaningless and never read. Binary operations
// require the same context and truncate to the smaller effective order.
class Jet {
public:
  static Jet constant(const JetContextPtr&, double value);
  static Jet variable(const JetContextPtr&, int dir);  // jet of the dir-th coordinate

  double value() const { return c_[0]; }
  int order() const { return order_; }
  const JetContextPtr& context() const { return ctx_; }

  // True partial derivative (coefficient times factorial).
  double derivative(const MultiIndex&) const;
  // Jet of the first partial derivative in one direction; order drops by one.
  Jet derivative_jet(int dir) const;
  Jet derivative_jet(const MultiIndex&) const;
  Jet truncated(int order) const;

  Jet operator-() const;
  friend Jet operator+(const Jet&, const Jet&);
  friend Jet operator-(const Jet&, const Jet&);
  friend Jet operator*(const Jet&, const Jet&);
  friend Jet operator/(const Jet&, const Jet&);
  friend Jet operator+(const Jet&, double);
  friend Jet operator+(double, const Jet&);
  friend Jet operator-(const Jet&, double);
  friend Jet operator-(double, const Jet&);
  friend Jet operator*(const Jet&, double);
  friend Jet operator*(double, const Jet&);
  friend Jet operator/(const Jet&, double);
  friend Jet operator/(double, const Jet&);

  std::span<const double> coefficients() const { return c_; }

private:
  Jet(JetContextPtr ctx, int order) : ctx_(std::move(ctx)), order_(order) {}

  JetContextPtr ctx_;
  int order_;
  std::vector<double> c_;

  friend Jet reciprocal(const Jet&);
  friend Jet sqrt(const Jet&);
  friend Jet powf(const Jet&, double);
  friend Jet powi(const Jet&, int);
};

Jet reciprocal(const Jet&);
Jet sqrt(const Jet&);
Jet powf(const Jet&, double exponent);  // value part must be strictly positive
Jet powi(const Jet&, int exponent);

}  // namespace finsler
