#pragma once

// A small expression language for meromorphic matrix entries V(w).
//
//   expr    := term { ("+" | "-") term }
//   term    := unary { ("*" | "/") unary }
//   unary   := ("-" | "+") unary | power
//   power   := primary [ "^" [ "+" | "-" ] integer ]
//   primary := number [ "i" ] | "i" | "pi" | "w" | ident
//            | ("exp" | "wp" | "wpprime") "(" expr ")" | "(" expr ")"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "wardforge/elliptic.hpp"
#include "wardforge/errors.hpp"
#include "wardforge/matrix.hpp"

namespace wardforge {

enum class NodeKind { Const, Var, Param, Add, Sub, Mul, Div, Neg, Pow, Exp, Wp, WpPrime };

struct Node;
using Expr = std::shared_ptr<const Node>;

struct Node {
  NodeKind kind = NodeKind::Const;
  Complex value{};
  std::string name;
  int exponent = 0;
  Expr lhs;
  Expr rhs;
};

using Params = std::map<std::string, Complex, std::less<>>;

namespace ast {

inline Expr make(NodeKind kind, Expr lhs = {}, Expr rhs = {}) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}
inline Expr constant(Complex c) {
  auto n = std::make_shared<Node>();
  n->value = c;
  return n;
}
inline Expr var() { return make(NodeKind::Var); }
inline Expr param(std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Param;
  n->name = std::move(name);
  return n;
}
inline Expr pow(Expr base, int exponent) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Pow;
  n->lhs = std::move(base);
  n->exponent = exponent;
  return n;
}

}  // namespace ast

inline bool structurally_equal(const Expr& a, const Expr& b) {
  if (a == b) return true;
  if (!a || !b || a->kind != b->kind) return false;
  switch (a->kind) {
    case NodeKind::Const: return a->value == b->value;
    case NodeKind::Var: return true;
    case NodeKind::Param: return a->name == b->name;
    case NodeKind::Pow: return a->exponent == b->exponent && structurally_equal(a->lhs, b->lhs);
    default: return structurally_equal(a->lhs, b->lhs) && structurally_equal(a->rhs, b->rhs);
  }
}

/// Syntax errors carry the byte offset and the tokens that would have been
/// accepted there.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, std::size_t offset, std::vector<std::string> expected, const std::string& what)
      : Error(code, "at byte " + std::to_string(offset) + ": " + what + describe(expected)),
        offset_(offset),
        expected_(std::move(expected)) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  static std::string describe(const std::vector<std::string>& expected) {
    if (expected.empty()) return "";
    std::string s = " (expected one of:";
    for (const auto& e : expected) s += " " + e;
    return s + ")";
  }

  std::size_t offset_;
  std::vector<std::string> expected_;
};

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  Expr run() {
    Expr e = expr();
    skip_ws();
    if (pos_ != s_.size()) fail({"+", "-", "*", "/", "^", "end of input"}, "unexpected character");
    return e;
  }

 private:
  static constexpr int kMaxDepth = 256;

  [[noreturn]] void fail(std::vector<std::string> expected, const std::string& what) const {
    throw ParseError(ErrorCode::SyntaxError, pos_, std::move(expected), what);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }
  bool accept(char c) {
    if (!peek(c)) return false;
    ++pos_;
    return true;
  }
  static bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
  static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
  bool digit_at(std::size_t p) const {
    return p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]));
  }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p_(p) {
      if (++p_.depth_ > kMaxDepth) p_.fail({}, "expression nested too deeply");
    }
    ~DepthGuard() { --p_.depth_; }
    Parser& p_;
  };

  Expr expr() {
    DepthGuard guard(*this);
    Expr lhs = term();
    for (;;) {
      if (accept('+')) lhs = ast::make(NodeKind::Add, lhs, term());
      else if (accept('-')) lhs = ast::make(NodeKind::Sub, lhs, term());
      else return lhs;
    }
  }

  Expr term() {
    Expr lhs = unary();
    for (;;) {
      if (accept('*')) lhs = ast::make(NodeKind::Mul, lhs, unary());
      else if (accept('/')) lhs = ast::make(NodeKind::Div, lhs, unary());
      else return lhs;
    }
  }

  Expr unary() {
    DepthGuard guard(*this);
    if (accept('-')) return ast::make(NodeKind::Neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (!accept('^')) return base;
    int sign = 1;
    if (accept('-')) sign = -1;
    else accept('+');
    skip_ws();
    if (!digit_at(pos_)) fail({"integer"}, "exponent must be an integer literal");
    long long value = 0;
    while (digit_at(pos_)) {
      value = value * 10 + (s_[pos_++] - '0');
      if (value > 1'000'000) fail({}, "exponent too large");
    }
    return ast::pow(base, sign * static_cast<int>(value));
  }

  Expr number() {
    const std::size_t start = pos_;
    while (digit_at(pos_)) ++pos_;
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      while (digit_at(pos_)) ++pos_;
    }
    if (pos_ == start + 1 && s_[start] == '.') {
      pos_ = start;
      fail({"digit"}, "malformed number");
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < s_.size() && (s_[p] == '+' || s_[p] == '-')) ++p;
      if (digit_at(p)) {
        pos_ = p;
        while (digit_at(pos_)) ++pos_;
      }
    }
    const std::string literal(s_.substr(start, pos_ - start));
    const double v = std::strtod(literal.c_str(), nullptr);
    if (!std::isfinite(v)) {
      pos_ = start;
      fail({}, "number out of range");
    }
    if (pos_ < s_.size() && s_[pos_] == 'i' && !(pos_ + 1 < s_.size() && ident_char(s_[pos_ + 1]))) {
      ++pos_;
      return ast::constant({0.0, v});
    }
    return ast::constant({v, 0.0});
  }

  Expr call(NodeKind kind) {
    if (!accept('(')) fail({"("}, "function name must be followed by an argument");
    Expr arg = expr();
    if (!accept(')')) fail({")", "+", "-", "*", "/", "^"}, "unbalanced parenthesis");
    return ast::make(kind, arg);
  }

  Expr primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail({"number", "identifier", "("}, "unexpected end of input");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (c == '(') {
      ++pos_;
      Expr inner = expr();
      if (!accept(')')) fail({")", "+", "-", "*", "/", "^"}, "unbalanced parenthesis");
      return inner;
    }
    if (ident_start(c)) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && ident_char(s_[pos_])) ++pos_;
      const std::string_view id = s_.substr(start, pos_ - start);
      if (id == "exp") return call(NodeKind::Exp);
      if (id == "wp") return call(NodeKind::Wp);
      if (id == "wpprime") return call(NodeKind::WpPrime);
      if (id == "i") return ast::constant(kI);
      if (id == "pi") return ast::constant(kPi);
      if (id == "w") return ast::var();
      if (peek('('))
        throw ParseError(ErrorCode::UnknownFunction, start, {"exp", "wp", "wpprime"},
                         "unknown function '" + std::string(id) + "'");
      return ast::param(std::string(id));
    }
    fail({"number", "identifier", "("}, "unexpected character");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline Expr parse(std::string_view text) { return detail::Parser(text).run(); }

/// Fully parenthesized text that parses back to an equal tree.
inline std::string unparse(const Expr& e) {
  using detail::format_double;
  switch (e->kind) {
    case NodeKind::Const: {
      const double re = e->value.real(), im = e->value.imag();
      if (im == 0.0) return re < 0 ? "(-" + format_double(-re) + ")" : format_double(re);
      if (re == 0.0) return im < 0 ? "(-" + format_double(-im) + "i)" : format_double(im) + "i";
      return "(" + format_double(re) + (im < 0 ? " - " : " + ") + format_double(std::abs(im)) + "i)";
    }
    case NodeKind::Var: return "w";
    case NodeKind::Param: return e->name;
    case NodeKind::Add: return "(" + unparse(e->lhs) + " + " + unparse(e->rhs) + ")";
    case NodeKind::Sub: return "(" + unparse(e->lhs) + " - " + unparse(e->rhs) + ")";
    case NodeKind::Mul: return "(" + unparse(e->lhs) + " * " + unparse(e->rhs) + ")";
    case NodeKind::Div: return "(" + unparse(e->lhs) + " / " + unparse(e->rhs) + ")";
    case NodeKind::Neg: return "(-" + unparse(e->lhs) + ")";
    case NodeKind::Pow: return "(" + unparse(e->lhs) + ")^" + std::to_string(e->exponent);
    case NodeKind::Exp: return "exp(" + unparse(e->lhs) + ")";
    case NodeKind::Wp: return "wp(" + unparse(e->lhs) + ")";
    case NodeKind::WpPrime: return "wpprime(" + unparse(e->lhs) + ")";
  }
  return {};
}

/// Names of all parameters referenced by the tree.
inline void collect_params(const Expr& e, std::set<std::string>& out) {
  if (!e) return;
  if (e->kind == NodeKind::Param) out.insert(e->name);
  collect_params(e->lhs, out);
  collect_params(e->rhs, out);
}

inline bool uses_lattice(const Expr& e) {
  if (!e) return false;
  if (e->kind == NodeKind::Wp || e->kind == NodeKind::WpPrime) return true;
  return uses_lattice(e->lhs) || uses_lattice(e->rhs);
}

/// mantissa * exp(log_scale). Values in the ordinary double range keep
/// log_scale == 0 so that arithmetic on them is the plain complex arithmetic.
struct ScaledComplex {
  Complex mantissa{};
  double log_scale = 0.0;

  static ScaledComplex from(Complex c) { return {c, 0.0}; }

  /// log|value|; -inf for zero.
  double log_abs() const { return std::log(std::abs(mantissa)) + log_scale; }

  Complex value() const { return log_scale == 0.0 ? mantissa : mantissa * std::exp(log_scale); }

  void normalize() {
    const double a = std::abs(mantissa);
    if (a == 0.0 || !std::isfinite(a)) {
      if (a == 0.0) log_scale = 0.0;
      return;
    }
    if (a < 1e-150 || a > 1e150) {
      const double l = std::log(a);
      mantissa /= a;
      log_scale += l;
    }
    if (log_scale != 0.0 && std::abs(std::log(std::abs(mantissa)) + log_scale) < 300.0) {
      mantissa *= std::exp(log_scale);
      log_scale = 0.0;
    }
  }
};

namespace detail {

inline ScaledComplex add(const ScaledComplex& a, const ScaledComplex& b, double sign) {
  if (a.log_scale == b.log_scale) {
    ScaledComplex r{a.mantissa + sign * b.mantissa, a.log_scale};
    r.normalize();
    return r;
  }
  if (a.mantissa == Complex{}) return {sign * b.mantissa, b.log_scale};
  if (b.mantissa == Complex{}) return a;
  const double e = std::max(a.log_scale, b.log_scale);
  ScaledComplex r{a.mantissa * std::exp(a.log_scale - e) + sign * b.mantissa * std::exp(b.log_scale - e), e};
  r.normalize();
  return r;
}

inline ScaledComplex mul(const ScaledComplex& a, const ScaledComplex& b) {
  ScaledComplex r{a.mantissa * b.mantissa, a.log_scale + b.log_scale};
  if (r.mantissa == Complex{}) r.log_scale = 0.0;
  r.normalize();
  return r;
}

// Denominators more than ~1e-300 relative to the numerator count as poles.
inline constexpr double kPoleLogGap = 690.8;

inline std::optional<ScaledComplex> div(const ScaledComplex& a, const ScaledComplex& b) {
  if (b.mantissa == Complex{}) return std::nullopt;
  if (a.mantissa != Complex{} && b.log_abs() < a.log_abs() - kPoleLogGap) return std::nullopt;
  ScaledComplex r{a.mantissa / b.mantissa, a.log_scale - b.log_scale};
  if (r.mantissa == Complex{}) r.log_scale = 0.0;
  r.normalize();
  return r;
}

inline std::optional<ScaledComplex> exp(const ScaledComplex& s) {
  const Complex v = s.value();
  if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return std::nullopt;
  if (std::abs(v.real()) <= 300.0) return ScaledComplex{std::exp(v), 0.0};
  return ScaledComplex{std::exp(Complex{0.0, v.imag()}), v.real()};
}

inline std::optional<ScaledComplex> ipow(const ScaledComplex& base, int n) {
  ScaledComplex result{1.0, 0.0};
  ScaledComplex b = base;
  unsigned long long e = n < 0 ? -static_cast<long long>(n) : n;
  while (e > 0) {
    if (e & 1u) result = mul(result, b);
    e >>= 1u;
    if (e > 0) b = mul(b, b);
  }
  if (n < 0) return div({1.0, 0.0}, result);
  return result;
}

struct EvalContext {
  Complex w;
  const Params& params;
  const Lattice* lattice;
};

inline std::optional<ScaledComplex> eval_node(const Node& n, const EvalContext& ctx) {
  switch (n.kind) {
    case NodeKind::Const: return ScaledComplex::from(n.value);
    case NodeKind::Var: return ScaledComplex::from(ctx.w);
    case NodeKind::Param: {
      const auto it = ctx.params.find(n.name);
      if (it == ctx.params.end()) throw Error(ErrorCode::UnboundParam, "parameter '" + n.name + "' is not bound");
      return ScaledComplex::from(it->second);
    }
    case NodeKind::Neg: {
      auto a = eval_node(*n.lhs, ctx);
      if (!a) return a;
      return ScaledComplex{-a->mantissa, a->log_scale};
    }
    case NodeKind::Add:
    case NodeKind::Sub:
    case NodeKind::Mul:
    case NodeKind::Div: {
      auto a = eval_node(*n.lhs, ctx);
      auto b = eval_node(*n.rhs, ctx);
      if (!a || !b) return std::nullopt;
      if (n.kind == NodeKind::Add) return add(*a, *b, 1.0);
      if (n.kind == NodeKind::Sub) return add(*a, *b, -1.0);
      if (n.kind == NodeKind::Mul) return mul(*a, *b);
      return div(*a, *b);
    }
    case NodeKind::Pow: {
      auto a = eval_node(*n.lhs, ctx);
      if (!a) return a;
      return ipow(*a, n.exponent);
    }
    case NodeKind::Exp: {
      auto a = eval_node(*n.lhs, ctx);
      if (!a) return a;
      return exp(*a);
    }
    case NodeKind::Wp:
    case NodeKind::WpPrime: {
      if (ctx.lattice == nullptr) throw Error(ErrorCode::MissingLattice, "wp requires a lattice");
      auto a = eval_node(*n.lhs, ctx);
      if (!a) return a;
      const Complex arg = a->value();
      if (!std::isfinite(arg.real()) || !std::isfinite(arg.imag())) return std::nullopt;
      try {
        return ScaledComplex::from(n.kind == NodeKind::Wp ? weierstrass_p(arg, *ctx.lattice)
                                                          : weierstrass_p_prime(arg, *ctx.lattice));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::AtPole) return std::nullopt;
        throw;
      }
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Log-scaled evaluation; nullopt marks a pole.
inline std::optional<ScaledComplex> eval_scaled(const Expr& e, Complex w, const Params& params,
                                                const Lattice* lattice = nullptr) {
  return detail::eval_node(*e, {w, params, lattice});
}

/// Plain evaluation; nullopt marks a pole (or a value beyond double range).
inline std::optional<Complex> eval(const Expr& e, Complex w, const Params& params = {},
                                   const Lattice* lattice = nullptr) {
  auto s = eval_scaled(e, w, params, lattice);
  if (!s) return std::nullopt;
  const Complex v = s->value();
  if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return std::nullopt;
  return v;
}

/// n x k matrix of expressions whose columns span a k-plane for generic w.
struct MeromorphicColumnSpec {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<Expr> entries;  // row-major
  std::optional<Lattice> lattice;
  Params params;

  const Expr& at(std::size_t i, std::size_t j) const { return entries[i * k + j]; }

  static MeromorphicColumnSpec from_strings(std::size_t n, std::size_t k, const std::vector<std::string>& text,
                                            Params params = {}, std::optional<Lattice> lattice = {}) {
    MeromorphicColumnSpec s;
    s.n = n;
    s.k = k;
    s.params = std::move(params);
    s.lattice = std::move(lattice);
    for (const auto& t : text) s.entries.push_back(parse(t));
    s.validate();
    return s;
  }

  /// Structural checks: shape, bound parameters, lattice availability.
  void validate() const {
    if (n == 0 || k == 0 || k > n) throw Error(ErrorCode::InvalidArgument, "column spec needs 1 <= k <= n");
    if (entries.size() != n * k) throw Error(ErrorCode::InvalidArgument, "column spec has the wrong number of entries");
    std::set<std::string> names;
    for (const auto& e : entries) {
      if (!e) throw Error(ErrorCode::InvalidArgument, "null expression");
      collect_params(e, names);
      if (!lattice && uses_lattice(e)) throw Error(ErrorCode::MissingLattice, "wp used without a lattice");
    }
    for (const auto& name : names)
      if (!params.count(name)) throw Error(ErrorCode::UnboundParam, "parameter '" + name + "' is not bound");
  }
};

struct ColumnEvaluation {
  ComplexMatrix columns;
  Complex w_used;
  int nudges = 0;
};

/// Evaluates the columns at w, each entry (i, j) multiplied by
/// exp(row_exponents[i]) when given, and rescales every column by its
/// largest-magnitude entry. The product is formed in the log domain so that
/// exponentially large and small factors keep the column direction.
/// On a pole the point is nudged by eps*(1+i), eps = 1e-7*(1+|w|), at most
/// three times.
inline ColumnEvaluation eval_columns_detailed(const MeromorphicColumnSpec& spec, Complex w,
                                              std::span<const Complex> row_exponents = {}) {
  const Lattice* lattice = spec.lattice ? &*spec.lattice : nullptr;
  const Complex step = 1e-7 * (1.0 + std::abs(w)) * Complex{1.0, 1.0};
  std::vector<ScaledComplex> vals(spec.n * spec.k);
  for (int attempt = 0; attempt <= 3; ++attempt) {
    const Complex wt = w + double(attempt) * step;
    bool pole = false;
    for (std::size_t idx = 0; idx < vals.size() && !pole; ++idx) {
      auto v = eval_scaled(spec.entries[idx], wt, spec.params, lattice);
      if (!v || !std::isfinite(v->mantissa.real()) || !std::isfinite(v->mantissa.imag())) {
        pole = true;
        break;
      }
      if (!row_exponents.empty()) {
        const Complex r = row_exponents[idx / spec.k];
        v = detail::mul(*v, ScaledComplex{std::exp(Complex{0.0, r.imag()}), r.real()});
      }
      vals[idx] = *v;
    }
    if (pole) continue;

    ComplexMatrix out(spec.n, spec.k);
    for (std::size_t j = 0; j < spec.k; ++j) {
      std::size_t best = spec.n;
      double best_log = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < spec.n; ++i) {
        const auto& v = vals[i * spec.k + j];
        if (v.mantissa == Complex{}) continue;
        const double l = v.log_abs();
        if (l > best_log) {
          best_log = l;
          best = i;
        }
      }
      if (best == spec.n) continue;  // all-zero column stays zero
      const auto& pivot = vals[best * spec.k + j];
      for (std::size_t i = 0; i < spec.n; ++i) {
        const auto& v = vals[i * spec.k + j];
        if (v.mantissa == Complex{}) continue;
        const double shift = v.log_scale - pivot.log_scale;
        out(i, j) = shift < -745.0 ? Complex{} : (v.mantissa / pivot.mantissa) * std::exp(shift);
      }
      out(best, j) = 1.0;
    }
    return {std::move(out), wt, attempt};
  }
  throw Error(ErrorCode::PersistentPole, "columns still hit a pole after 3 nudges");
}

inline ComplexMatrix eval_columns(const MeromorphicColumnSpec& spec, Complex w,
                                  std::span<const Complex> row_exponents = {}) {
  return eval_columns_detailed(spec, w, row_exponents).columns;
}

/// Numerical rank of the evaluated columns at w (singular values above
/// rel_tol * sigma_max).
inline std::size_t generic_rank(const MeromorphicColumnSpec& spec, Complex w = {0.3718, 0.2291},
                                double rel_tol = 1e-8) {
  return numerical_rank(eval_columns(spec, w), rel_tol);
}

}  // namespace wardforge
