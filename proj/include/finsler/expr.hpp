#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/jet.hpp"
#include "finsler/types.hpp"

namespace finsler::dsl {

// AST for Lagrangian expressions in the variables x1..xn, y1..yn.
// Grammar (documented in docs/grammar.md):
//   expr    := term (('+'|'-') term)*
//   term    := unary (('*'|'/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' signed_number)*        -- literal exponents only
//   primary := number | ident | '(' expr ')' | 'sqrt' '(' expr ')'
enum class NodeKind { Number, Variable, Add, Sub, Mul, Div, Neg, Sqrt, Pow };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  NodeKind kind;
  double number = 0.0;       // Number
  int var = -1;              // Variable: 0..n-1 = x, n..2n-1 = y
  double exponent = 0.0;     // Pow
  bool int_exponent = false; // Pow fast path
  NodePtr a, b;
};

NodePtr number(double v);
NodePtr variable(int idx);
NodePtr add(NodePtr, NodePtr);
NodePtr sub(NodePtr, NodePtr);
NodePtr mul(NodePtr, NodePtr);
NodePtr div(NodePtr, NodePtr);
NodePtr neg(NodePtr);
NodePtr sqrt_of(NodePtr);
NodePtr pow_of(NodePtr, double exponent);

// Throws ParseError (with byte offset) on malformed input, unknown
// identifiers, or variable indices above n.
NodePtr parse(std::string_view text, int n);

// Minimal-parenthesis rendering; parse(to_string(e, n), n) == e structurally.
std::string to_string(const NodePtr&, int n);
bool structurally_equal(const NodePtr&, const NodePtr&);

// Generic evaluation over the differentiable-scalar contract. Domain supplies
// constants of the scalar kind; the scalar kind supplies +,-,*,/ and sqrt,
// powi, powf.
struct RealDomain {
  double constant(double v) const { return v; }
};
struct JetDomain {
  JetContextPtr ctx;
  Jet constant(double v) const { return Jet::constant(ctx, v); }
};

namespace detail {
inline double sqrt_s(double v) {
  if (!(v > 0.0)) throw NumericDegeneracy("numeric degeneracy: sqrt of non-positive value");
  return std::sqrt(v);
}
inline Jet sqrt_s(const Jet& v) { return sqrt(v); }
inline double powi_s(double v, int e) { return std::pow(v, e); }
inline Jet powi_s(const Jet& v, int e) { return powi(v, e); }
inline double powf_s(double v, double e) {
  if (!(v > 0.0)) throw NumericDegeneracy("numeric degeneracy: powf of non-positive value");
  return std::pow(v, e);
}
inline Jet powf_s(const Jet& v, double e) { return powf(v, e); }
inline double div_s(double a, double b) {
  if (std::abs(b) < 1e-300) throw NumericDegeneracy("numeric degeneracy: division by zero");
  return a / b;
}
inline Jet div_s(const Jet& a, const Jet& b) { return a / b; }
}  // namespace detail

template <class S, class Domain>
S evaluate(const Node& node, std::span<const S> vars, const Domain& dom) {
  switch (node.kind) {
    case NodeKind::Number:
      return dom.constant(node.number);
    case NodeKind::Variable:
      return vars[node.var];
    case NodeKind::Add:
      return evaluate(*node.a, vars, dom) + evaluate(*node.b, vars, dom);
    case NodeKind::Sub:
      return evaluate(*node.a, vars, dom) - evaluate(*node.b, vars, dom);
    case NodeKind::Mul:
      return evaluate(*node.a, vars, dom) * evaluate(*node.b, vars, dom);
    case NodeKind::Div:
      return detail::div_s(evaluate(*node.a, vars, dom), evaluate(*node.b, vars, dom));
    case NodeKind::Neg:
      return -evaluate(*node.a, vars, dom);
    case NodeKind::Sqrt:
      return detail::sqrt_s(evaluate(*node.a, vars, dom));
    case NodeKind::Pow: {
      S base = evaluate(*node.a, vars, dom);
      if (node.int_exponent) return detail::powi_s(base, static_cast<int>(node.exponent));
      return detail::powf_s(base, node.exponent);
    }
  }
  throw InvalidArgument("corrupt expression node");
}

double evaluate_real(const Node&, std::span<const double> xy);
Jet evaluate_jet(const Node&, const JetContextPtr&);

// Parsed Lagrangian plus its domain guard. The guard, when present, must be
// strictly positive at every accepted sample point; points failing it are
// skipped and counted, never treated as axiom failures.
struct LagrangianSpec {
  int n = 0;
  NodePtr expr;
  NodePtr guard;  // optional
  std::string label;
};

bool passes_guard(const LagrangianSpec&, const BasePoint&);
// Evaluates the Lagrangian; throws GuardRejected when the guard fails at the
// real shadow of the assignment.
double lagrangian_value(const LagrangianSpec&, const BasePoint&);
Jet lagrangian_jet(const LagrangianSpec&, const JetContextPtr&);

// Builtin families -----------------------------------------------------------

LagrangianSpec euclidean(int n);
// 1/2 y^T a(x) y with a a symmetric matrix of expressions in x1..xn.
LagrangianSpec riemannian(int n, const std::vector<std::vector<NodePtr>>& a,
                          std::string label = "riemannian");
// 1/2 (sqrt(y^T a y) + b.y)^2 with constant a (symmetric positive definite)
// and constant covector b, requiring |b|_a < 1 so the root stays positive.
LagrangianSpec randers(const std::vector<std::vector<double>>& a, const std::vector<double>& b);
// 1/2 sqrt(sum_i diag_i y_i^4 + cross * sum_{i<j} y_i^2 y_j^2): an
// x-independent non-quadratic family. cross = 2 with unit diag degenerates to
// the Euclidean Lagrangian.
LagrangianSpec quartic_minkowski(const std::vector<double>& diag, double cross = 1.0);
LagrangianSpec from_expression(int n, std::string_view text, std::string_view guard_text = {},
                               std::string label = "expression");

struct HomogeneityReport {
  double lagrangian_residual = 0.0;  // max_s |L(x,sy) - s^2 L(x,y)| / (1 + |s^2 L|)
  double metric_residual = 0.0;      // max_s |g(x,sy) - g(x,y)| / (1 + |g|), if requested
};
HomogeneityReport check_homogeneity(const LagrangianSpec&, const BasePoint&,
                                    std::span<const double> scales, bool check_metric = false,
                                    int order = 5);

}  // namespace finsler::dsl
