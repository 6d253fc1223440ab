#include "orbitshade/field.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <unordered_map>

namespace orbitshade {

struct VectorFieldDef::Compiled {
  std::vector<expr::Program> rhs;
  std::vector<expr::Program> jac;  // row-major n*n
};

VectorFieldDef::VectorFieldDef(std::vector<std::string> coordinates, std::vector<expr::NodePtr> rhs,
                               std::vector<std::string> param_names, std::vector<double> param_values,
                               Constraint constraint)
    : coordinates_(std::move(coordinates)),
      rhs_(std::move(rhs)),
      param_names_(std::move(param_names)),
      param_values_(std::move(param_values)),
      constraint_(constraint) {
  const std::size_t n = coordinates_.size();
  if (n == 0) throw DimensionError("field has no coordinates");
  if (rhs_.size() != n)
    throw DimensionError("field has " + std::to_string(n) + " coordinates but " + std::to_string(rhs_.size()) +
                         " equations");
  if (param_names_.size() != param_values_.size()) throw DimensionError("parameter name/value count mismatch");
  if (constraint_ == Constraint::UnitSphere && n != 3)
    throw DimensionError("sphere constraint needs exactly 3 coordinates, got " + std::to_string(n));
  auto c = std::make_shared<Compiled>();
  c->rhs.reserve(n);
  c->jac.reserve(n * n);
  for (const auto& e : rhs_) c->rhs.emplace_back(e, param_values_);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c->jac.emplace_back(expr::differentiate(rhs_[i], static_cast<int>(j)), param_values_);
  compiled_ = std::move(c);
}

double VectorFieldDef::parameter(std::string_view name) const {
  for (std::size_t i = 0; i < param_names_.size(); ++i)
    if (param_names_[i] == name) return param_values_[i];
  throw PreconditionError("no parameter named '" + std::string(name) + "'");
}

bool VectorFieldDef::evaluate_into(const double* x, double* out) const {
  const std::size_t n = dimension();
  for (std::size_t i = 0; i < n; ++i) out[i] = compiled_->rhs[i].run(x);
  if (constraint_ == Constraint::UnitSphere) {
    double xf = 0.0, xx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      xf += x[i] * out[i];
      xx += x[i] * x[i];
    }
    const double phi = xf / xx;
    for (std::size_t i = 0; i < n; ++i) out[i] -= phi * x[i];
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(out[i])) return false;
  return true;
}

Vec VectorFieldDef::evaluate(const Vec& x) const {
  if (static_cast<std::size_t>(x.size()) != dimension())
    throw DimensionError("point has dimension " + std::to_string(x.size()) + ", field has " +
                         std::to_string(dimension()));
  Vec out(x.size());
  if (!evaluate_into(x.data(), out.data())) throw FieldError("non-finite field value");
  return out;
}

Mat VectorFieldDef::jacobian(const Vec& x) const {
  const std::size_t n = dimension();
  if (static_cast<std::size_t>(x.size()) != n) throw DimensionError("point dimension mismatch in jacobian");
  Mat j(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) j(r, c) = compiled_->jac[r * n + c].run(x.data());
  if (constraint_ == Constraint::UnitSphere) {
    // g = f - phi x with phi = (x.f)/(x.x)
    Vec f(n);
    for (std::size_t i = 0; i < n; ++i) f[i] = compiled_->rhs[i].run(x.data());
    const double xx = x.squaredNorm();
    const double xf = x.dot(f);
    const double phi = xf / xx;
    Eigen::RowVectorXd dphi = (f + j.transpose() * x).transpose() / xx - 2.0 * xf * x.transpose() / (xx * xx);
    j = j - x * dphi - phi * Mat::Identity(n, n);
  }
  if (!j.allFinite()) throw FieldError("non-finite jacobian entry");
  return j;
}

double VectorFieldDef::distance(const Vec& a, const Vec& b) const {
  if (constraint_ == Constraint::UnitSphere) {
    const double chord = (a.normalized() - b.normalized()).norm();
    return 2.0 * std::asin(std::min(1.0, chord / 2.0));
  }
  return (a - b).norm();
}

Vec VectorFieldDef::project(const Vec& x) const {
  if (constraint_ == Constraint::UnitSphere) return x.normalized();
  return x;
}

VectorFieldDef VectorFieldDef::with_parameter(std::string_view name, double value) const {
  auto values = param_values_;
  bool found = false;
  for (std::size_t i = 0; i < param_names_.size(); ++i) {
    if (param_names_[i] == name) {
      values[i] = value;
      found = true;
    }
  }
  if (!found) throw PreconditionError("no parameter named '" + std::string(name) + "'");
  VectorFieldDef out(coordinates_, rhs_, param_names_, std::move(values), constraint_);
  out.builtin_id_ = builtin_id_;
  return out;
}

VectorFieldDef VectorFieldDef::with_builtin_id(std::string id) const {
  VectorFieldDef out = *this;
  out.builtin_id_ = std::move(id);
  return out;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

enum class Tok { Ident, Number, Op, Prime, Equals, LParen, RParen, Sep, End };

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  int line = 1;
  int col = 1;
};

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto push = [&](Tok k, std::string text, int l, int c) { out.push_back({k, std::move(text), 0.0, l, c}); };
  while (i < src.size()) {
    const char ch = src[i];
    if (ch == '\n') {
      push(Tok::Sep, "\n", line, col);
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (ch == '#') {
      while (i < src.size() && src[i] != '\n') ++i, ++col;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      ++i, ++col;
      continue;
    }
    const int c0 = col;
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      push(Tok::Ident, std::string(src.substr(i, j - i)), line, c0);
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(ch)) || (ch == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::string buf(src.substr(i, std::min<std::size_t>(src.size() - i, 64)));
      char* end = nullptr;
      const double v = std::strtod(buf.c_str(), &end);
      const std::size_t len = static_cast<std::size_t>(end - buf.c_str());
      out.push_back({Tok::Number, buf.substr(0, len), v, line, c0});
      col += static_cast<int>(len);
      i += len;
      continue;
    }
    switch (ch) {
      case '+': case '-': case '*': case '/': case '^': case ',': push(Tok::Op, std::string(1, ch), line, c0); break;
      case '\'': push(Tok::Prime, "'", line, c0); break;
      case '=': push(Tok::Equals, "=", line, c0); break;
      case '(': push(Tok::LParen, "(", line, c0); break;
      case ')': push(Tok::RParen, ")", line, c0); break;
      case ';': push(Tok::Sep, ";", line, c0); break;
      default: throw ParseError(std::string("unexpected character '") + ch + "'", line, c0);
    }
    ++i, ++col;
  }
  out.push_back({Tok::End, "", 0.0, line, col});
  return out;
}

struct Statement {
  std::vector<Token> toks;  // without separator; terminated by an End token at the separator position
};

std::vector<Statement> split_statements(const std::vector<Token>& toks) {
  std::vector<Statement> out;
  Statement cur;
  for (const Token& t : toks) {
    if (t.kind == Tok::Sep || t.kind == Tok::End) {
      if (!cur.toks.empty()) {
        // padded so that fixed lookahead in the statement dispatch stays in range
        for (int k = 0; k < 3; ++k) cur.toks.push_back({Tok::End, "", 0.0, t.line, t.col});
        out.push_back(std::move(cur));
        cur = {};
      }
      continue;
    }
    cur.toks.push_back(t);
  }
  return out;
}

class ExprParser {
 public:
  ExprParser(const std::vector<Token>& toks, std::size_t pos, const std::unordered_map<std::string, int>& vars,
             const std::unordered_map<std::string, int>& params, bool resolve = true)
      : toks_(toks), pos_(pos), vars_(vars), params_(params), resolve_(resolve) {}

  expr::NodePtr parse_full() {
    auto e = parse_sum();
    if (peek().kind != Tok::End) fail_here("unexpected token '" + peek().text + "'");
    return e;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& take() { return toks_[pos_++]; }
  [[noreturn]] void fail_here(const std::string& msg) const {
    const Token& t = peek();
    throw ParseError(t.kind == Tok::End ? msg + " (end of statement)" : msg, t.line, t.col);
  }
  bool is_op(char c) const { return peek().kind == Tok::Op && peek().text[0] == c; }

  expr::NodePtr parse_sum() {
    auto lhs = parse_product();
    while (is_op('+') || is_op('-')) {
      const char c = take().text[0];
      auto rhs = parse_product();
      lhs = c == '+' ? expr::add(lhs, rhs) : expr::sub(lhs, rhs);
    }
    return lhs;
  }

  expr::NodePtr parse_product() {
    auto lhs = parse_unary();
    while (is_op('*') || is_op('/')) {
      const char c = take().text[0];
      auto rhs = parse_unary();
      lhs = c == '*' ? expr::mul(lhs, rhs) : expr::div(lhs, rhs);
    }
    return lhs;
  }

  expr::NodePtr parse_unary() {
    if (is_op('-')) {
      take();
      return expr::negate(parse_unary());
    }
    if (is_op('+')) {
      take();
      return parse_unary();
    }
    return parse_power();
  }

  // '^' binds tighter than unary minus on its left: -x^2 = -(x^2); right-associative.
  expr::NodePtr parse_power() {
    auto base = parse_primary();
    if (is_op('^')) {
      take();
      auto exponent = parse_unary();
      return expr::pow(base, exponent);
    }
    return base;
  }

  expr::NodePtr parse_primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Number: take(); return expr::number(t.number);
      case Tok::LParen: {
        take();
        auto e = parse_sum();
        if (peek().kind != Tok::RParen) fail_here("expected ')'");
        take();
        return e;
      }
      case Tok::Ident: {
        take();
        expr::Func f;
        if (peek().kind == Tok::LParen && expr::func_from_name(t.text, f)) {
          take();
          auto arg = parse_sum();
          if (peek().kind != Tok::RParen) fail_here("expected ')' after function argument");
          take();
          return expr::call(f, arg);
        }
        if (auto it = vars_.find(t.text); it != vars_.end()) return expr::variable(it->second);
        if (auto it = params_.find(t.text); it != params_.end()) return expr::parameter(it->second);
        if (!resolve_) return expr::number(0.0);
        throw UnknownSymbolError(t.text, t.line, t.col);
      }
      default: fail_here(t.kind == Tok::End ? "expected expression" : "unexpected token '" + t.text + "'");
    }
  }

  const std::vector<Token>& toks_;
  std::size_t pos_;
  const std::unordered_map<std::string, int>& vars_;
  const std::unordered_map<std::string, int>& params_;
  bool resolve_;
};

bool is_reserved(const std::string& s) {
  expr::Func f;
  return s == "param" || s == "constraint" || expr::func_from_name(s, f);
}

}  // namespace

VectorFieldDef parse_field_definition(std::string_view source, const ParamMap& overrides) {
  const auto statements = split_statements(tokenize(source));

  std::vector<std::string> coords;
  std::vector<std::string> pnames;
  std::unordered_map<std::string, int> coord_index, param_index;
  Constraint constraint = Constraint::None;

  // Pass 1: names.
  for (const auto& st : statements) {
    const auto& t = st.toks;
    if (t[0].kind == Tok::Ident && t[0].text == "param") {
      if (t[1].kind != Tok::Ident) throw ParseError("expected parameter name", t[1].line, t[1].col);
      if (is_reserved(t[1].text)) throw ParseError("reserved name '" + t[1].text + "'", t[1].line, t[1].col);
      if (t[2].kind != Tok::Equals) throw ParseError("expected '='", t[2].line, t[2].col);
      if (param_index.count(t[1].text)) throw ParseError("duplicate parameter '" + t[1].text + "'", t[1].line, t[1].col);
      param_index[t[1].text] = static_cast<int>(pnames.size());
      pnames.push_back(t[1].text);
    } else if (t[0].kind == Tok::Ident && t[0].text == "constraint") {
      if (t[1].kind != Tok::Ident || t[1].text != "sphere" || t[2].kind != Tok::End)
        throw ParseError("expected 'constraint sphere'", t[1].line, t[1].col);
      constraint = Constraint::UnitSphere;
    } else if (t[0].kind == Tok::Ident) {
      if (t[1].kind != Tok::Prime) throw ParseError("expected \"'\" after coordinate name", t[1].line, t[1].col);
      if (t[2].kind != Tok::Equals) throw ParseError("expected '='", t[2].line, t[2].col);
      if (is_reserved(t[0].text)) throw ParseError("reserved name '" + t[0].text + "'", t[0].line, t[0].col);
      if (coord_index.count(t[0].text)) throw DimensionError("duplicate equation for '" + t[0].text + "'");
      coord_index[t[0].text] = static_cast<int>(coords.size());
      coords.push_back(t[0].text);
    } else {
      throw ParseError("expected an equation, 'param' or 'constraint'", t[0].line, t[0].col);
    }
  }
  for (const auto& name : coords)
    if (param_index.count(name)) throw ParseError("'" + name + "' is both a coordinate and a parameter", 1, 1);
  for (const auto& [name, value] : overrides) {
    (void)value;
    if (coord_index.count(name)) throw PreconditionError("override '" + name + "' names a coordinate");
    if (!param_index.count(name)) {
      param_index[name] = static_cast<int>(pnames.size());
      pnames.push_back(name);
    }
  }
  if (coords.empty()) throw DimensionError("no equations in field definition");

  // Syntax is checked for every statement before any symbol is resolved.
  for (const auto& st : statements) {
    const auto& t = st.toks;
    if (t[0].kind == Tok::Ident && t[0].text == "constraint") continue;
    ExprParser(t, 3, coord_index, param_index, false).parse_full();
  }

  // Pass 2: parameter values in declaration order (earlier parameters may be referenced).
  std::vector<double> pvalues(pnames.size(), std::nan(""));
  std::vector<bool> known(pnames.size(), false);
  for (const auto& [name, value] : overrides) {
    pvalues[param_index[name]] = value;
    known[param_index[name]] = true;
  }
  const std::unordered_map<std::string, int> no_vars;
  for (const auto& st : statements) {
    const auto& t = st.toks;
    if (!(t[0].kind == Tok::Ident && t[0].text == "param")) continue;
    const int idx = param_index[t[1].text];
    auto e = ExprParser(t, 3, no_vars, param_index).parse_full();
    if (known[idx]) continue;
    // Check that only already-known parameters are referenced.
    std::vector<const expr::Node*> stack{e.get()};
    while (!stack.empty()) {
      const auto* n = stack.back();
      stack.pop_back();
      if (n->op == expr::Op::Param && !known[static_cast<std::size_t>(n->index)])
        throw ParseError("parameter '" + pnames[n->index] + "' used before its value is known", t[3].line, t[3].col);
      if (n->lhs) stack.push_back(n->lhs.get());
      if (n->rhs) stack.push_back(n->rhs.get());
    }
    pvalues[idx] = expr::evaluate(*e, {}, pvalues);
    known[idx] = true;
  }
  for (std::size_t i = 0; i < pnames.size(); ++i)
    if (!known[i]) throw PreconditionError("parameter '" + pnames[i] + "' has no value");

  // Pass 3: equations.
  std::vector<expr::NodePtr> rhs(coords.size());
  for (const auto& st : statements) {
    const auto& t = st.toks;
    if (t[0].kind != Tok::Ident || t[0].text == "param" || t[0].text == "constraint") continue;
    rhs[coord_index[t[0].text]] = ExprParser(t, 3, coord_index, param_index).parse_full();
  }
  return VectorFieldDef(coords, rhs, pnames, pvalues, constraint);
}

std::string print_field_definition(const VectorFieldDef& field) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < field.parameter_names().size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", field.parameter_values()[i]);
    out += "param " + field.parameter_names()[i] + " = " + buf + "\n";
  }
  if (field.constraint() == Constraint::UnitSphere) out += "constraint sphere\n";
  for (std::size_t i = 0; i < field.dimension(); ++i)
    out += field.coordinates()[i] + "' = " +
           expr::to_string(*field.expressions()[i], field.coordinates(), field.parameter_names()) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Builtins

namespace {
struct Builtin {
  const char* id;
  const char* source;
};

constexpr Builtin kBuiltins[] = {
    {"linear-saddle-2d", "x' = -x; y' = y"},
    {"linear-saddle-3d", "x' = -x; y' = -2*y; z' = z"},
    {"duffing-saddle", "x' = y; y' = x - x^2"},
    {"lorenz", "param s = 10; param r = 28; param b = 8/3\nx' = s*(y-x); y' = x*(r-z)-y; z' = x*y-b*z"},
    // Height-function gradient on S^2: source at the north pole, sink at the south pole.
    {"sphere-morse-smale", "constraint sphere\nx' = x*z; y' = y*z; z' = z^2 - 1"},
    // Symmetric double well: saddle at the origin, two homoclinic loops
    // returning to it from either side.
    {"saddle-with-return", "x' = y; y' = x - x^3"},
};
}  // namespace

std::vector<std::string> builtin_ids() {
  std::vector<std::string> out;
  for (const auto& b : kBuiltins) out.emplace_back(b.id);
  return out;
}

std::optional<std::string> builtin_source(std::string_view id) {
  for (const auto& b : kBuiltins)
    if (id == b.id) return std::string(b.source);
  return std::nullopt;
}

VectorFieldDef builtin_field(std::string_view id, const ParamMap& overrides) {
  auto src = builtin_source(id);
  if (!src) throw PreconditionError("unknown builtin field '" + std::string(id) + "'");
  return parse_field_definition(*src, overrides).with_builtin_id(std::string(id));
}

Mat jacobian_fd(const VectorFieldDef& field, const Vec& x) {
  const Eigen::Index n = x.size();
  const double h = std::max(1e-6, 1e-6 * x.norm());
  Mat j(n, n);
  Vec xp = x, xm = x;
  for (Eigen::Index c = 0; c < n; ++c) {
    xp[c] = x[c] + h;
    xm[c] = x[c] - h;
    j.col(c) = (field.evaluate(xp) - field.evaluate(xm)) / (2.0 * h);
    xp[c] = x[c];
    xm[c] = x[c];
  }
  if (!j.allFinite()) throw FieldError("non-finite finite-difference jacobian");
  return j;
}

VectorFieldDef conjugate_by_orthogonal(const VectorFieldDef& field, const Mat& q) {
  const auto n = static_cast<Eigen::Index>(field.dimension());
  if (q.rows() != n || q.cols() != n) throw DimensionError("conjugating matrix has wrong shape");
  // x = Q^T y, so x_j = sum_k Q(k, j) y_k.
  std::vector<expr::NodePtr> xs(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    expr::NodePtr acc = expr::number(0.0);
    for (Eigen::Index k = 0; k < n; ++k) acc = expr::add(acc, expr::mul(expr::number(q(k, j)), expr::variable(static_cast<int>(k))));
    xs[j] = acc;
  }
  std::vector<expr::NodePtr> fx(n);
  for (Eigen::Index j = 0; j < n; ++j) fx[j] = expr::substitute(field.expressions()[j], xs);
  std::vector<expr::NodePtr> rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    expr::NodePtr acc = expr::number(0.0);
    for (Eigen::Index j = 0; j < n; ++j) acc = expr::add(acc, expr::mul(expr::number(q(i, j)), fx[j]));
    rhs[i] = acc;
  }
  return VectorFieldDef(field.coordinates(), rhs, field.parameter_names(), field.parameter_values(),
                        field.constraint());
}

Mat sphere_tangent_basis(const Vec& x) {
  const Eigen::Index n = x.size();
  Eigen::HouseholderQR<Mat> qr(x.normalized());
  Mat q = qr.householderQ() * Mat::Identity(n, n);
  return q.rightCols(n - 1);
}

}  // namespace orbitshade
