#include "orbitshade/expr.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace orbitshade::expr {
namespace {

std::shared_ptr<Node> make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

bool both_numbers(const NodePtr& a, const NodePtr& b) { return a->op == Op::Num && b->op == Op::Num; }

double apply(Func f, double x) {
  switch (f) {
    case Func::Sin: return std::sin(x);
    case Func::Cos: return std::cos(x);
    case Func::Exp: return std::exp(x);
    case Func::Sqrt: return std::sqrt(x);
    case Func::Log: return std::log(x);
    case Func::Tanh: return std::tanh(x);
  }
  return 0.0;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", std::fabs(v));
  std::string s(buf);
  return v < 0 ? "(-" + s + ")" : s;
}

}  // namespace

NodePtr number(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::Num;
  n->value = v;
  return n;
}

NodePtr variable(int index) {
  auto n = std::make_shared<Node>();
  n->op = Op::Var;
  n->index = index;
  return n;
}

NodePtr parameter(int index) {
  auto n = std::make_shared<Node>();
  n->op = Op::Param;
  n->index = index;
  return n;
}

bool is_number(const NodePtr& n, double v) { return n->op == Op::Num && n->value == v; }

NodePtr negate(NodePtr a) {
  if (a->op == Op::Num) return number(-a->value);
  if (a->op == Op::Neg) return a->lhs;
  return make(Op::Neg, std::move(a));
}

NodePtr add(NodePtr a, NodePtr b) {
  if (both_numbers(a, b)) return number(a->value + b->value);
  if (is_number(a, 0.0)) return b;
  if (is_number(b, 0.0)) return a;
  return make(Op::Add, std::move(a), std::move(b));
}

NodePtr sub(NodePtr a, NodePtr b) {
  if (both_numbers(a, b)) return number(a->value - b->value);
  if (is_number(b, 0.0)) return a;
  if (is_number(a, 0.0)) return negate(std::move(b));
  return make(Op::Sub, std::move(a), std::move(b));
}

NodePtr mul(NodePtr a, NodePtr b) {
  if (both_numbers(a, b)) return number(a->value * b->value);
  if (is_number(a, 0.0) || is_number(b, 0.0)) return number(0.0);
  if (is_number(a, 1.0)) return b;
  if (is_number(b, 1.0)) return a;
  if (is_number(a, -1.0)) return negate(std::move(b));
  if (is_number(b, -1.0)) return negate(std::move(a));
  return make(Op::Mul, std::move(a), std::move(b));
}

NodePtr div(NodePtr a, NodePtr b) {
  if (both_numbers(a, b) && b->value != 0.0) return number(a->value / b->value);
  if (is_number(a, 0.0) && !is_number(b, 0.0)) return number(0.0);
  if (is_number(b, 1.0)) return a;
  return make(Op::Div, std::move(a), std::move(b));
}

NodePtr pow(NodePtr a, NodePtr b) {
  if (both_numbers(a, b)) return number(std::pow(a->value, b->value));
  if (is_number(b, 1.0)) return a;
  if (is_number(b, 0.0)) return number(1.0);
  return make(Op::Pow, std::move(a), std::move(b));
}

NodePtr call(Func f, NodePtr a) {
  if (a->op == Op::Num) return number(apply(f, a->value));
  auto n = make(Op::Call, std::move(a));
  n->func = f;
  return n;
}

const char* func_name(Func f) {
  switch (f) {
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Exp: return "exp";
    case Func::Sqrt: return "sqrt";
    case Func::Log: return "log";
    case Func::Tanh: return "tanh";
  }
  return "?";
}

bool func_from_name(std::string_view name, Func& out) {
  static constexpr std::array<Func, 6> all{Func::Sin, Func::Cos, Func::Exp, Func::Sqrt, Func::Log, Func::Tanh};
  for (Func f : all) {
    if (name == func_name(f)) {
      out = f;
      return true;
    }
  }
  return false;
}

double evaluate(const Node& n, std::span<const double> vars, std::span<const double> params) {
  switch (n.op) {
    case Op::Num: return n.value;
    case Op::Var: return vars[n.index];
    case Op::Param: return params[n.index];
    case Op::Neg: return -evaluate(*n.lhs, vars, params);
    case Op::Add: return evaluate(*n.lhs, vars, params) + evaluate(*n.rhs, vars, params);
    case Op::Sub: return evaluate(*n.lhs, vars, params) - evaluate(*n.rhs, vars, params);
    case Op::Mul: return evaluate(*n.lhs, vars, params) * evaluate(*n.rhs, vars, params);
    case Op::Div: return evaluate(*n.lhs, vars, params) / evaluate(*n.rhs, vars, params);
    case Op::Pow: return std::pow(evaluate(*n.lhs, vars, params), evaluate(*n.rhs, vars, params));
    case Op::Call: return apply(n.func, evaluate(*n.lhs, vars, params));
  }
  return 0.0;
}

namespace {
bool depends_on(const NodePtr& n, int var) {
  if (!n) return false;
  if (n->op == Op::Var) return n->index == var;
  return depends_on(n->lhs, var) || depends_on(n->rhs, var);
}
}  // namespace

NodePtr differentiate(const NodePtr& n, int var) {
  switch (n->op) {
    case Op::Num:
    case Op::Param: return number(0.0);
    case Op::Var: return number(n->index == var ? 1.0 : 0.0);
    case Op::Neg: return negate(differentiate(n->lhs, var));
    case Op::Add: return add(differentiate(n->lhs, var), differentiate(n->rhs, var));
    case Op::Sub: return sub(differentiate(n->lhs, var), differentiate(n->rhs, var));
    case Op::Mul:
      return add(mul(differentiate(n->lhs, var), n->rhs), mul(n->lhs, differentiate(n->rhs, var)));
    case Op::Div: {
      // (u/v)' = (u' v - u v') / v^2
      auto num = sub(mul(differentiate(n->lhs, var), n->rhs), mul(n->lhs, differentiate(n->rhs, var)));
      return div(num, mul(n->rhs, n->rhs));
    }
    case Op::Pow: {
      const auto& u = n->lhs;
      const auto& v = n->rhs;
      if (!depends_on(v, var)) {
        // v u^(v-1) u'
        return mul(mul(v, pow(u, sub(v, number(1.0)))), differentiate(u, var));
      }
      // u^v (v' ln u + v u'/u)
      auto term = add(mul(differentiate(v, var), call(Func::Log, u)), div(mul(v, differentiate(u, var)), u));
      return mul(n, term);
    }
    case Op::Call: {
      const auto& u = n->lhs;
      auto du = differentiate(u, var);
      NodePtr outer;
      switch (n->func) {
        case Func::Sin: outer = call(Func::Cos, u); break;
        case Func::Cos: outer = negate(call(Func::Sin, u)); break;
        case Func::Exp: outer = n; break;
        case Func::Sqrt: outer = div(number(0.5), n); break;
        case Func::Log: outer = div(number(1.0), u); break;
        case Func::Tanh: outer = sub(number(1.0), mul(n, n)); break;
      }
      return mul(outer, du);
    }
  }
  return number(0.0);
}

NodePtr substitute(const NodePtr& n, const std::vector<NodePtr>& replacements) {
  switch (n->op) {
    case Op::Num:
    case Op::Param: return n;
    case Op::Var: return replacements.at(static_cast<std::size_t>(n->index));
    case Op::Neg: return negate(substitute(n->lhs, replacements));
    case Op::Add: return add(substitute(n->lhs, replacements), substitute(n->rhs, replacements));
    case Op::Sub: return sub(substitute(n->lhs, replacements), substitute(n->rhs, replacements));
    case Op::Mul: return mul(substitute(n->lhs, replacements), substitute(n->rhs, replacements));
    case Op::Div: return div(substitute(n->lhs, replacements), substitute(n->rhs, replacements));
    case Op::Pow: return pow(substitute(n->lhs, replacements), substitute(n->rhs, replacements));
    case Op::Call: return call(n->func, substitute(n->lhs, replacements));
  }
  return n;
}

std::string to_string(const Node& n, const std::vector<std::string>& var_names,
                      const std::vector<std::string>& param_names) {
  auto rec = [&](const NodePtr& c) { return to_string(*c, var_names, param_names); };
  switch (n.op) {
    case Op::Num: return format_number(n.value);
    case Op::Var: return var_names.at(static_cast<std::size_t>(n.index));
    case Op::Param: return param_names.at(static_cast<std::size_t>(n.index));
    case Op::Neg: return "(-" + rec(n.lhs) + ")";
    case Op::Add: return "(" + rec(n.lhs) + " + " + rec(n.rhs) + ")";
    case Op::Sub: return "(" + rec(n.lhs) + " - " + rec(n.rhs) + ")";
    case Op::Mul: return "(" + rec(n.lhs) + " * " + rec(n.rhs) + ")";
    case Op::Div: return "(" + rec(n.lhs) + " / " + rec(n.rhs) + ")";
    case Op::Pow: return "(" + rec(n.lhs) + " ^ " + rec(n.rhs) + ")";
    case Op::Call: return std::string(func_name(n.func)) + "(" + rec(n.lhs) + ")";
  }
  return "?";
}

Program::Program(const NodePtr& root, std::span<const double> params) {
  std::size_t depth = 0;
  auto emit = [&](auto&& self, const NodePtr& n) -> void {
    switch (n->op) {
      case Op::Num:
        code_.push_back({Op::Num, Func::Sin, -1, n->value});
        ++depth;
        break;
      case Op::Param:
        code_.push_back({Op::Num, Func::Sin, -1, params[static_cast<std::size_t>(n->index)]});
        ++depth;
        break;
      case Op::Var:
        code_.push_back({Op::Var, Func::Sin, n->index, 0.0});
        ++depth;
        break;
      case Op::Neg:
      case Op::Call:
        self(self, n->lhs);
        code_.push_back({n->op, n->func, -1, 0.0});
        break;
      default:
        self(self, n->lhs);
        self(self, n->rhs);
        code_.push_back({n->op, Func::Sin, -1, 0.0});
        --depth;
        break;
    }
    max_depth_ = std::max(max_depth_, depth);
  };
  emit(emit, root);
}

double Program::run(const double* vars) const {
  constexpr std::size_t kInline = 64;
  std::array<double, kInline> small{};
  std::vector<double> big;
  double* stack = small.data();
  if (max_depth_ > kInline) {
    big.resize(max_depth_);
    stack = big.data();
  }
  std::size_t sp = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Num: stack[sp++] = in.value; break;
      case Op::Var: stack[sp++] = vars[in.index]; break;
      case Op::Neg: stack[sp - 1] = -stack[sp - 1]; break;
      case Op::Call: stack[sp - 1] = apply(in.func, stack[sp - 1]); break;
      case Op::Add: --sp; stack[sp - 1] += stack[sp]; break;
      case Op::Sub: --sp; stack[sp - 1] -= stack[sp]; break;
      case Op::Mul: --sp; stack[sp - 1] *= stack[sp]; break;
      case Op::Div: --sp; stack[sp - 1] /= stack[sp]; break;
      case Op::Pow: {
        --sp;
        const double e = stack[sp];
        const double b = stack[sp - 1];
        stack[sp - 1] = (e == 2.0) ? b * b : (e == 3.0) ? b * b * b : std::pow(b, e);
        break;
      }
      case Op::Param: break;
    }
  }
  return stack[0];
}

}  // namespace orbitshade::expr
