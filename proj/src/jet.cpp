#include "finsler/jet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace finsler {

namespace {
constexpr double kPivotFloor = 1e-13;  // below this a value part counts as numerically zero
}

MultiIndex MultiIndex::unit(int dim, int dir) {
  MultiIndex m;
  m.e.assign(dim, 0);
  m.e[dir] = 1;
  return m;
}

int MultiIndex::order() const {
  int s = 0;
  for (int v : e) s += v;
  return s;
}

// ---------------------------------------------------------------------------
// JetTable

JetTable::JetTable(int dim, int max_order) : dim_(dim), max_order_(max_order) {
  if (dim < 1 || dim > 16) throw InvalidArgument("jet dimension out of range");
  if (max_order < 0 || max_order > 10) throw InvalidArgument("jet order out of range");

  // enumerate indices grouped by total order, lexicographically descending
  // inside each block
  for (int deg = 0; deg <= max_order; ++deg) {
    std::vector<std::vector<int>> block;
    std::vector<int> cur(dim, 0);
    // recursive enumeration of compositions of deg into dim parts
    auto rec = [&](auto&& self, int slot, int remaining) -> void {
      if (slot == dim - 1) {
        cur[slot] = remaining;
        block.push_back(cur);
        return;
      }
      for (int v = remaining; v >= 0; --v) {
        cur[slot] = v;
        self(self, slot + 1, remaining - v);
      }
      cur[slot] = 0;
    };
    rec(rec, 0, deg);
    for (auto& b : block) indices_.emplace_back(std::move(b));
  }

  const int sz = size();
  degree_.resize(sz);
  factorial_.resize(sz);
  std::map<std::vector<int>, int> rank_map;
  for (int r = 0; r < sz; ++r) {
    degree_[r] = indices_[r].order();
    double f = 1.0;
    for (int v : indices_[r].e)
      for (int k = 2; k <= v; ++k) f *= k;
    factorial_[r] = f;
    rank_map[indices_[r].e] = r;
  }

  shift_.assign(dim, std::vector<int>(sz, -1));
  shift_factor_.assign(dim, std::vector<double>(sz, 0.0));
  for (int t = 0; t < dim; ++t) {
    for (int r = 0; r < sz; ++r) {
      if (degree_[r] + 1 > max_order) continue;
      std::vector<int> up = indices_[r].e;
      up[t] += 1;
      shift_[t][r] = rank_map.at(up);
      shift_factor_[t][r] = up[t];
    }
  }

  struct Raw {
    int32_t a, b, c;
    int deg;
  };
  std::vector<Raw> raw;
  for (int i = 0; i < sz; ++i) {
    for (int j = 0; j < sz; ++j) {
      if (degree_[i] + degree_[j] > max_order) continue;
      std::vector<int> s(dim);
      for (int t = 0; t < dim; ++t) s[t] = indices_[i].e[t] + indices_[j].e[t];
      int c = rank_map.at(s);
      raw.push_back({i, j, c, degree_[c]});
    }
  }
  std::stable_sort(raw.begin(), raw.end(), [](const Raw& x, const Raw& y) { return x.deg < y.deg; });
  terms_.reserve(raw.size());
  terms_by_order_.assign(max_order + 2, 0);
  for (const Raw& r : raw) terms_.push_back({r.a, r.b, r.c});
  std::size_t pos = 0;
  for (int deg = 0; deg <= max_order; ++deg) {
    while (pos < raw.size() && raw[pos].deg <= deg) ++pos;
    terms_by_order_[deg + 1] = pos;
  }
}

std::shared_ptr<const JetTable> JetTable::get(int dim, int max_order) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const JetTable>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(dim, max_order);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto table = std::shared_ptr<const JetTable>(new JetTable(dim, max_order));
  cache[key] = table;
  return table;
}

int JetTable::rank(const MultiIndex& m) const {
  if (static_cast<int>(m.e.size()) != dim_) return -1;
  for (int v : m.e)
    if (v < 0) return -1;
  if (m.order() > max_order_) return -1;
  // linear scan inside the degree block; tables are small and this is cold
  int deg = m.order();
  for (int r = 0; r < size(); ++r) {
    if (degree_[r] != deg) continue;
    if (indices_[r].e == m.e) return r;
  }
  return -1;
}

std::span<const JetTable::MulTerm> JetTable::products(int result_order) const {
  int m = std::clamp(result_order, 0, max_order_);
  return {terms_.data(), terms_by_order_[m + 1]};
}

// ---------------------------------------------------------------------------
// JetContext

JetContext::JetContext(int n, int order, std::span<const double> base_point)
    : n_(n), order_(order), base_(base_point.begin(), base_point.end()) {
  if (n < 1) throw InvalidArgument("dimension must be >= 1");
  if (static_cast<int>(base_.size()) != 2 * n)
    throw InvalidArgument("base point must have 2n coordinates");
  double ynorm = 0.0;
  for (int i = n; i < 2 * n; ++i) ynorm += base_[i] * base_[i];
  if (!(ynorm > 0.0)) throw InvalidArgument("base point must lie on the slit tangent bundle (y != 0)");
  table_ = JetTable::get(2 * n, order);
}

JetContextPtr make_context(int n, int order, std::span<const double> base_point) {
  return std::make_shared<const JetContext>(n, order, base_point);
}

// ---------------------------------------------------------------------------
// Jet

namespace {
void check_same(const Jet& a, const Jet& b) {
  if (a.context()->table() != b.context()->table() ||
      a.context()->base().data() != b.context()->base().data()) {
    if (a.context()->table() != b.context()->table())
      throw InvalidArgument("jet operands have different dimension/order tables");
    // same table, different context objects: require identical base points
    auto ba = a.context()->base();
    auto bb = b.context()->base();
    for (std::size_t i = 0; i < ba.size(); ++i)
      if (ba[i] != bb[i]) throw InvalidArgument("jet operands have different base points");
  }
}
}  // namespace

Jet Jet::constant(const JetContextPtr& ctx, double value) {
  Jet j(ctx, ctx->order());
  j.c_.assign(ctx->table()->size(), 0.0);
  j.c_[0] = value;
  return j;
}

Jet Jet::variable(const JetContextPtr& ctx, int dir) {
  if (dir < 0 || dir >= ctx->dim()) throw InvalidArgument("variable index out of range");
  Jet j = constant(ctx, ctx->base()[dir]);
  if (ctx->order() >= 1) {
    int r = ctx->table()->rank(MultiIndex::unit(ctx->dim(), dir));
    j.c_[r] = 1.0;
  }
  return j;
}

double Jet::derivative(const MultiIndex& m) const {
  int r = ctx_->table()->rank(m);
  if (r < 0 || ctx_->table()->order_of(r) > order_)
    throw OrderExhausted("requested derivative exceeds jet order");
  return c_[r] * ctx_->table()->factorial(r);
}

Jet Jet::derivative_jet(int dir) const {
  if (dir < 0 || dir >= ctx_->dim()) throw InvalidArgument("direction out of range");
  if (order_ < 1) throw OrderExhausted("jet order exhausted: raise the context order");
  const JetTable& t = *ctx_->table();
  Jet out(ctx_, order_ - 1);
  out.c_.assign(t.size(), 0.0);
  for (int r = 0; r < t.size(); ++r) {
    if (t.order_of(r) > out.order_) continue;
    int s = t.shift(dir, r);
    if (s >= 0) out.c_[r] = c_[s] * t.shift_factor(dir, r);
  }
  return out;
}

Jet Jet::derivative_jet(const MultiIndex& m) const {
  Jet out = *this;
  for (std::size_t dir = 0; dir < m.e.size(); ++dir)
    for (int k = 0; k < m.e[dir]; ++k) out = out.derivative_jet(static_cast<int>(dir));
  return out;
}

Jet Jet::truncated(int order) const {
  if (order < 0 || order > order_) throw OrderExhausted("cannot truncate upward");
  Jet out = *this;
  out.order_ = order;
  return out;
}

Jet Jet::operator-() const {
  Jet out = *this;
  for (double& v : out.c_) v = -v;
  return out;
}

Jet operator+(const Jet& a, const Jet& b) {
  check_same(a, b);
  Jet out = a;
  out.order_ = std::min(a.order_, b.order_);
  for (std::size_t i = 0; i < out.c_.size(); ++i) out.c_[i] += b.c_[i];
  return out;
}

Jet operator-(const Jet& a, const Jet& b) {
  check_same(a, b);
  Jet out = a;
  out.order_ = std::min(a.order_, b.order_);
  for (std::size_t i = 0; i < out.c_.size(); ++i) out.c_[i] -= b.c_[i];
  return out;
}

Jet operator*(const Jet& a, const Jet& b) {
  check_same(a, b);
  const JetTable& t = *a.ctx_->table();
  Jet out(a.ctx_, std::min(a.order_, b.order_));
  out.c_.assign(t.size(), 0.0);
  for (const auto& term : t.products(out.order_))
    out.c_[term.c] += a.c_[term.a] * b.c_[term.b];
  return out;
}

Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

Jet operator+(const Jet& a, double s) {
  Jet out = a;
  out.c_[0] += s;
  return out;
}
Jet operator+(double s, const Jet& a) { return a + s; }
Jet operator-(const Jet& a, double s) { return a + (-s); }
Jet operator-(double s, const Jet& a) { return (-a) + s; }
Jet operator*(const Jet& a, double s) {
  Jet out = a;
  for (double& v : out.c_) v *= s;
  return out;
}
Jet operator*(double s, const Jet& a) { return a * s; }
Jet operator/(const Jet& a, double s) {
  if (std::abs(s) < kPivotFloor) throw NumericDegeneracy("division by zero scalar");
  return a * (1.0 / s);
}
Jet operator/(double s, const Jet& a) { return reciprocal(a) * s; }

namespace {
// Evaluates sum_k coef[k] * u^k by Horner over jets, where u has zero value part.
Jet horner(const std::vector<double>& coef, const Jet& u) {
  Jet acc = Jet::constant(u.context(), coef.back());
  acc = acc.truncated(u.order());
  for (int k = static_cast<int>(coef.size()) - 2; k >= 0; --k) acc = acc * u + coef[k];
  return acc;
}

Jet centered(const Jet& b) {  // b / b0 - 1
  Jet u = b * (1.0 / b.value());
  return u - 1.0;
}
}  // namespace

Jet reciprocal(const Jet& b) {
  double v = b.value();
  if (std::abs(v) < kPivotFloor)
    throw NumericDegeneracy("numeric degeneracy: division by near-zero value part");
  std::vector<double> coef(b.order() + 1);
  double s = 1.0;
  for (int k = 0; k <= b.order(); ++k, s = -s) coef[k] = s;
  return horner(coef, centered(b)) * (1.0 / v);
}

Jet sqrt(const Jet& b) {
  double v = b.value();
  if (!(v > kPivotFloor))
    throw NumericDegeneracy("numeric degeneracy: sqrt of non-positive value part");
  std::vector<double> coef(b.order() + 1);
  coef[0] = 1.0;
  for (int k = 1; k <= b.order(); ++k) coef[k] = coef[k - 1] * (0.5 - (k - 1)) / k;
  return horner(coef, centered(b)) * std::sqrt(v);
}

Jet powf(const Jet& b, double e) {
  double v = b.value();
  if (!(v > kPivotFloor))
    throw NumericDegeneracy("numeric degeneracy: powf of non-positive value part");
  std::vector<double> coef(b.order() + 1);
  coef[0] = 1.0;
  for (int k = 1; k <= b.order(); ++k) coef[k] = coef[k - 1] * (e - (k - 1)) / k;
  return horner(coef, centered(b)) * std::pow(v, e);
}

Jet powi(const Jet& b, int e) {
  if (e < 0) return reciprocal(powi(b, -e));
  Jet acc = Jet::constant(b.context(), 1.0).truncated(b.order());
  Jet base = b;
  unsigned k = static_cast<unsigned>(e);
  while (k) {
    if (k & 1u) acc = acc * base;
    base = (k >>= 1) ? base * base : base;
  }
  return acc;
}

}  // namespace finsler
