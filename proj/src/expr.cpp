#include "finsler/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace finsler::dsl {

NodePtr number(double v) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Number;
  n->number = v;
  return n;
}
NodePtr variable(int idx) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Variable;
  n->var = idx;
  return n;
}
namespace {
NodePtr binary(NodeKind k, NodePtr a, NodePtr b) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}
}  // namespace
NodePtr add(NodePtr a, NodePtr b) { return binary(NodeKind::Add, std::move(a), std::move(b)); }
NodePtr sub(NodePtr a, NodePtr b) { return binary(NodeKind::Sub, std::move(a), std::move(b)); }
NodePtr mul(NodePtr a, NodePtr b) { return binary(NodeKind::Mul, std::move(a), std::move(b)); }
NodePtr div(NodePtr a, NodePtr b) { return binary(NodeKind::Div, std::move(a), std::move(b)); }
NodePtr neg(NodePtr a) {
  // fold literal negation so '-'<number> and a negative literal build the
  // same tree (keeps parse/print round trips canonical)
  if (a->kind == NodeKind::Number) return number(-a->number);
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Neg;
  n->a = std::move(a);
  return n;
}
NodePtr sqrt_of(NodePtr a) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Sqrt;
  n->a = std::move(a);
  return n;
}
NodePtr pow_of(NodePtr a, double e) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Pow;
  n->a = std::move(a);
  n->exponent = e;
  n->int_exponent = (e == std::rint(e) && std::abs(e) <= 64.0);
  return n;
}

// ---------------------------------------------------------------------------
// Parser: recursive descent with the precedence ladder
// pow > unary minus > mul/div > add/sub, left-associative binops.

namespace {

class Parser {
public:
  Parser(std::string_view text, int n) : s_(text), n_(n) {}

  NodePtr run() {
    if (s_.empty()) throw ParseError("empty expression", 0);
    NodePtr e = expr();
    skip_ws();
    if (pos_ != s_.size()) throw ParseError("unexpected trailing input", pos_);
    return e;
  }

private:
  std::string_view s_;
  int n_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }
  bool eat(char c) {
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr e = term();
    for (;;) {
      char c = peek();
      if (c == '+') {
        ++pos_;
        e = add(e, term());
      } else if (c == '-') {
        ++pos_;
        e = sub(e, term());
      } else {
        return e;
      }
    }
  }

  NodePtr term() {
    NodePtr e = unary();
    for (;;) {
      char c = peek();
      if (c == '*') {
        ++pos_;
        e = mul(e, unary());
      } else if (c == '/') {
        ++pos_;
        e = div(e, unary());
      } else {
        return e;
      }
    }
  }

  NodePtr unary() {
    if (eat('-')) return neg(unary());
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    while (peek() == '^') {
      ++pos_;
      base = pow_of(base, exponent_literal());
    }
    return base;
  }

  double exponent_literal() {
    skip_ws();
    std::size_t start = pos_;
    bool negative = eat('-');
    skip_ws();
    if (pos_ >= s_.size() || !(std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.'))
      throw ParseError("exponent must be a numeric literal", start);
    double v = number_literal();
    return negative ? -v : v;
  }

  double number_literal() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.'))
      ++pos_;
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t mark = pos_++;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      } else {
        pos_ = mark;  // 'e' was not an exponent marker
      }
    }
    try {
      return std::stod(std::string(s_.substr(start, pos_ - start)));
    } catch (const std::exception&) {
      throw ParseError("malformed number", start);
    }
  }

  NodePtr primary() {
    char c = peek();
    std::size_t start = pos_;
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      if (!eat(')')) throw ParseError("expected ')'", pos_);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number(number_literal());
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t p = pos_;
      while (p < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[p])) || s_[p] == '_')) ++p;
      std::string ident(s_.substr(pos_, p - pos_));
      pos_ = p;
      if (ident == "sqrt") {
        if (!eat('(')) throw ParseError("expected '(' after sqrt", pos_);
        NodePtr e = expr();
        if (!eat(')')) throw ParseError("expected ')'", pos_);
        return sqrt_of(e);
      }
      if ((ident[0] == 'x' || ident[0] == 'y') && ident.size() > 1) {
        bool digits = true;
        for (std::size_t i = 1; i < ident.size(); ++i)
          if (!std::isdigit(static_cast<unsigned char>(ident[i]))) digits = false;
        if (digits) {
          int idx = std::stoi(ident.substr(1));
          if (idx < 1 || idx > n_) throw ParseError("variable index out of range", start);
          return variable(ident[0] == 'x' ? idx - 1 : n_ + idx - 1);
        }
      }
      throw ParseError("unknown identifier '" + ident + "'", start);
    }
    throw ParseError("expected a primary expression", pos_);
  }
};

int precedence(NodeKind k) {
  switch (k) {
    case NodeKind::Add:
    case NodeKind::Sub:
      return 1;
    case NodeKind::Mul:
    case NodeKind::Div:
      return 2;
    case NodeKind::Neg:
      return 3;
    case NodeKind::Pow:
      return 4;
    default:
      return 5;
  }
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void print(const NodePtr& e, std::string& out, int n, int parent_prec, bool right_slot) {
  int prec = precedence(e->kind);
  bool parens = prec < parent_prec || (prec == parent_prec && right_slot);
  if (parens) out += '(';
  switch (e->kind) {
    case NodeKind::Number:
      if (e->number < 0 && !parens) {
        out += '(';
        out += fmt_double(e->number);
        out += ')';
      } else {
        out += fmt_double(e->number);
      }
      break;
    case NodeKind::Variable:
      out += (e->var < n) ? 'x' : 'y';
      out += std::to_string(e->var < n ? e->var + 1 : e->var - n + 1);
      break;
    case NodeKind::Add:
      print(e->a, out, n, 1, false);
      out += " + ";
      print(e->b, out, n, 1, true);
      break;
    case NodeKind::Sub:
      print(e->a, out, n, 1, false);
      out += " - ";
      print(e->b, out, n, 1, true);
      break;
    case NodeKind::Mul:
      print(e->a, out, n, 2, false);
      out += "*";
      print(e->b, out, n, 2, true);
      break;
    case NodeKind::Div:
      print(e->a, out, n, 2, false);
      out += "/";
      print(e->b, out, n, 2, true);
      break;
    case NodeKind::Neg:
      out += '-';
      print(e->a, out, n, 3, true);
      break;
    case NodeKind::Sqrt:
      out += "sqrt(";
      print(e->a, out, n, 0, false);
      out += ')';
      break;
    case NodeKind::Pow:
      print(e->a, out, n, 5, false);
      out += '^';
      out += fmt_double(e->exponent);
      break;
  }
  if (parens) out += ')';
}

}  // namespace

NodePtr parse(std::string_view text, int n) { return Parser(text, n).run(); }

std::string to_string(const NodePtr& e, int n) {
  std::string out;
  print(e, out, n, 0, false);
  return out;
}

bool structurally_equal(const NodePtr& a, const NodePtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case NodeKind::Number:
      return a->number == b->number;
    case NodeKind::Variable:
      return a->var == b->var;
    case NodeKind::Pow:
      return a->exponent == b->exponent && structurally_equal(a->a, b->a);
    case NodeKind::Neg:
    case NodeKind::Sqrt:
      return structurally_equal(a->a, b->a);
    default:
      return structurally_equal(a->a, b->a) && structurally_equal(a->b, b->b);
  }
}

double evaluate_real(const Node& e, std::span<const double> xy) {
  return evaluate<double>(e, xy, RealDomain{});
}

Jet evaluate_jet(const Node& e, const JetContextPtr& ctx) {
  std::vector<Jet> vars;
  vars.reserve(ctx->dim());
  for (int i = 0; i < ctx->dim(); ++i) vars.push_back(Jet::variable(ctx, i));
  return evaluate<Jet>(e, std::span<const Jet>(vars), JetDomain{ctx});
}

bool passes_guard(const LagrangianSpec& spec, const BasePoint& p) {
  if (!spec.guard) return true;
  std::vector<double> xy = p.xy();
  try {
    return evaluate_real(*spec.guard, xy) > 0.0;
  } catch (const NumericDegeneracy&) {
    return false;
  }
}

double lagrangian_value(const LagrangianSpec& spec, const BasePoint& p) {
  if (!passes_guard(spec, p)) throw GuardRejected("sample point rejected by guard");
  return evaluate_real(*spec.expr, p.xy());
}

Jet lagrangian_jet(const LagrangianSpec& spec, const JetContextPtr& ctx) {
  if (spec.guard) {
    BasePoint p;
    auto b = ctx->base();
    p.x.assign(b.begin(), b.begin() + ctx->n());
    p.y.assign(b.begin() + ctx->n(), b.end());
    if (!passes_guard(spec, p)) throw GuardRejected("sample point rejected by guard");
  }
  return evaluate_jet(*spec.expr, ctx);
}

// ---------------------------------------------------------------------------
// Builtin families

LagrangianSpec euclidean(int n) {
  if (n < 1) throw InvalidArgument("euclidean: n must be >= 1");
  NodePtr sum;
  for (int i = 0; i < n; ++i) {
    NodePtr sq = pow_of(variable(n + i), 2.0);
    sum = sum ? add(sum, sq) : sq;
  }
  LagrangianSpec spec;
  spec.n = n;
  spec.expr = mul(number(0.5), sum);
  spec.label = "euclidean";
  return spec;
}

namespace {
void require_x_only(const NodePtr& e, int n) {
  if (!e) return;
  if (e->kind == NodeKind::Variable && e->var >= n)
    throw InvalidArgument("riemannian: matrix entries may depend on x only");
  require_x_only(e->a, n);
  require_x_only(e->b, n);
}
}  // namespace

LagrangianSpec riemannian(int n, const std::vector<std::vector<NodePtr>>& a, std::string label) {
  if (static_cast<int>(a.size()) != n) throw InvalidArgument("riemannian: matrix must be n x n");
  for (const auto& row : a)
    if (static_cast<int>(row.size()) != n) throw InvalidArgument("riemannian: matrix must be n x n");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j)
      if (!structurally_equal(a[i][j], a[j][i]))
        throw InvalidArgument("riemannian: matrix must be symmetric");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) require_x_only(a[i][j], n);

  NodePtr sum;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      NodePtr t = mul(a[i][j], mul(variable(n + i), variable(n + j)));
      sum = sum ? add(sum, t) : t;
    }
  }
  LagrangianSpec spec;
  spec.n = n;
  spec.expr = mul(number(0.5), sum);
  spec.label = std::move(label);
  return spec;
}

namespace {
// Dense symmetric solve, small n. Returns false when not positive definite.
bool cholesky(std::vector<std::vector<double>> a, std::vector<std::vector<double>>& l) {
  int n = static_cast<int>(a.size());
  l.assign(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[i][j];
      for (int k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      if (i == j) {
        if (!(s > 0.0)) return false;
        l[i][j] = std::sqrt(s);
      } else {
        l[i][j] = s / l[j][j];
      }
    }
  }
  return true;
}
}  // namespace

LagrangianSpec randers(const std::vector<std::vector<double>>& a, const std::vector<double>& b) {
  int n = static_cast<int>(a.size());
  if (n < 1 || static_cast<int>(b.size()) != n)
    throw InvalidArgument("randers: need an n x n matrix and an n-covector");
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(a[i].size()) != n) throw InvalidArgument("randers: matrix must be n x n");
    for (int j = 0; j < n; ++j)
      if (a[i][j] != a[j][i]) throw InvalidArgument("randers: matrix must be symmetric");
  }
  std::vector<std::vector<double>> l;
  if (!cholesky(a, l)) throw InvalidArgument("randers: matrix must be positive definite");
  // |b|_a^2 = b^T a^{-1} b via two triangular solves
  std::vector<double> u(b);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < i; ++k) u[i] -= l[i][k] * u[k];
    u[i] /= l[i][i];
  }
  double bnorm2 = 0.0;
  for (double v : u) bnorm2 += v * v;
  if (!(bnorm2 < 1.0)) throw InvalidArgument("randers: the covector must satisfy |b|_a < 1");

  NodePtr quad;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (a[i][j] == 0.0) continue;
      NodePtr t = mul(number(a[i][j]), mul(variable(n + i), variable(n + j)));
      quad = quad ? add(quad, t) : t;
    }
  NodePtr lin;
  for (int i = 0; i < n; ++i) {
    if (b[i] == 0.0) continue;
    NodePtr t = mul(number(b[i]), variable(n + i));
    lin = lin ? add(lin, t) : t;
  }
  NodePtr f = lin ? add(sqrt_of(quad), lin) : sqrt_of(quad);
  LagrangianSpec spec;
  spec.n = n;
  spec.expr = mul(number(0.5), pow_of(f, 2.0));
  spec.guard = f;
  spec.label = "randers";
  return spec;
}

LagrangianSpec quartic_minkowski(const std::vector<double>& diag, double cross) {
  int n = static_cast<int>(diag.size());
  if (n < 2) throw InvalidArgument("quartic_minkowski: need at least two coefficients");
  for (double c : diag)
    if (!(c > 0.0)) throw InvalidArgument("quartic_minkowski: diagonal coefficients must be positive");
  if (!(cross >= 0.0)) throw InvalidArgument("quartic_minkowski: cross coefficient must be >= 0");

  NodePtr q;
  for (int i = 0; i < n; ++i) {
    NodePtr t = mul(number(diag[i]), pow_of(variable(n + i), 4.0));
    q = q ? add(q, t) : t;
  }
  if (cross != 0.0) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        NodePtr t = mul(number(cross), mul(pow_of(variable(n + i), 2.0), pow_of(variable(n + j), 2.0)));
        q = add(q, t);
      }
  }
  LagrangianSpec spec;
  spec.n = n;
  spec.expr = mul(number(0.5), sqrt_of(q));
  spec.guard = q;
  spec.label = "quartic_minkowski";
  return spec;
}

LagrangianSpec from_expression(int n, std::string_view text, std::string_view guard_text,
                               std::string label) {
  LagrangianSpec spec;
  spec.n = n;
  spec.expr = parse(text, n);
  if (!guard_text.empty()) spec.guard = parse(guard_text, n);
  spec.label = std::move(label);
  return spec;
}

HomogeneityReport check_homogeneity(const LagrangianSpec& spec, const BasePoint& p,
                                    std::span<const double> scales, bool check_metric, int order) {
  (void)order;
  HomogeneityReport rep;
  const int n = spec.n;
  double base_val = lagrangian_value(spec, p);

  auto hessian = [&](const BasePoint& q) {
    auto ctx = make_context(n, 2, q.xy());
    Jet L = lagrangian_jet(spec, ctx);
    std::vector<double> h(static_cast<std::size_t>(n) * n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        MultiIndex m;
        m.e.assign(2 * n, 0);
        m.e[n + a] += 1;
        m.e[n + b] += 1;
        h[static_cast<std::size_t>(a) * n + b] = L.derivative(m);
      }
    return h;
  };
  std::vector<double> g0;
  if (check_metric) g0 = hessian(p);

  for (double s : scales) {
    if (!(s > 0.0)) throw InvalidArgument("homogeneity scales must be positive");
    BasePoint q = p;
    for (double& v : q.y) v *= s;
    double val = lagrangian_value(spec, q);
    double want = s * s * base_val;
    rep.lagrangian_residual =
        std::max(rep.lagrangian_residual, std::abs(val - want) / (1.0 + std::abs(want)));
    if (check_metric) {
      std::vector<double> gs = hessian(q);
      double scale = 0.0;
      for (double v : g0) scale = std::max(scale, std::abs(v));
      for (std::size_t i = 0; i < gs.size(); ++i)
        rep.metric_residual =
            std::max(rep.metric_residual, std::abs(gs[i] - g0[i]) / (1.0 + scale));
    }
  }
  return rep;
}

}  // namespace finsler::dsl
