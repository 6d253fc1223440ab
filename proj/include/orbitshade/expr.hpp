#pragma once

// Expression trees for field right-hand sides: construction with light
// constant folding, symbolic differentiation, printing, and a compiled
// stack-machine form for fast repeated evaluation.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace orbitshade::expr {

enum class Op : std::uint8_t { Num, Var, Param, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class Func : std::uint8_t { Sin, Cos, Exp, Sqrt, Log, Tanh };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::Num;
  double value = 0.0;  // Num
  int index = -1;      // Var / Param slot
  Func func = Func::Sin;
  NodePtr lhs;  // unary operand or left operand
  NodePtr rhs;
};

NodePtr number(double v);
NodePtr variable(int index);
NodePtr parameter(int index);
NodePtr negate(NodePtr a);
NodePtr add(NodePtr a, NodePtr b);
NodePtr sub(NodePtr a, NodePtr b);
NodePtr mul(NodePtr a, NodePtr b);
NodePtr div(NodePtr a, NodePtr b);
NodePtr pow(NodePtr a, NodePtr b);
NodePtr call(Func f, NodePtr a);

bool is_number(const NodePtr& n, double v);
const char* func_name(Func f);
bool func_from_name(std::string_view name, Func& out);

// Reference (tree-walking) evaluation.
double evaluate(const Node& n, std::span<const double> vars, std::span<const double> params);

// d/d(var index) with parameters treated as constants.
NodePtr differentiate(const NodePtr& n, int var);

// Replace every Var(i) with replacements[i].
NodePtr substitute(const NodePtr& n, const std::vector<NodePtr>& replacements);

// Fully parenthesised infix text that re-parses to an equal-valued tree.
std::string to_string(const Node& n, const std::vector<std::string>& var_names,
                      const std::vector<std::string>& param_names);

// Postfix program; parameters are bound at compile time.
class Program {
 public:
  Program() = default;
  Program(const NodePtr& root, std::span<const double> params);
  double run(const double* vars) const;

 private:
  struct Instr {
    Op op;
    Func func;
    int index;
    double value;
  };
  std::vector<Instr> code_;
  std::size_t max_depth_ = 0;
};

}  // namespace orbitshade::expr
