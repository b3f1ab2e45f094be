#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "symdyn/types.hpp"

namespace symdyn::expr {

// Token vocabulary: four binary operators, fourteen unary operators (clip and
// pow carry a structural parameter), variables, numeric constants and the two
// named constants e and pi.
enum class Op : std::uint8_t {
  Add, Sub, Mul, Div,
  Abs, Inv, Sqrt, Log, Exp, Sin, Cos, Asin, Acos, Tan, Atan,
  Clip,   // clip(v, c) = clamp(v, -c, +c); the bound c > 0 is structural
  Trunc,  // round toward zero
  Pow,    // integer exponent in [-4, 4] \ {0}, structural
  Var, Const, E, Pi,
};

constexpr int kDefaultMaxNodes = 60;

inline int arity(Op op) {
  switch (op) {
    case Op::Add: case Op::Sub: case Op::Mul: case Op::Div: return 2;
    case Op::Var: case Op::Const: case Op::E: case Op::Pi: return 0;
    default: return 1;
  }
}

const char* op_name(Op op);

struct Node {
  Op op = Op::Const;
  real value = 0.0;  // Const: the constant; Clip: the bound c
  int ivalue = 0;    // Var: input index; Pow: integer exponent
};

// Expression tree stored as a flat preorder array: every subtree occupies a
// contiguous index range, which makes subtree splicing and non-recursive
// evaluation cheap. Structure is immutable after construction; only the
// values of Const nodes may be rewritten (single writer).
class ExprTree {
 public:
  ExprTree() = default;
  explicit ExprTree(std::vector<Node> preorder_nodes);

  static ExprTree leaf(Op op, real value = 0.0, int ivalue = 0);
  static ExprTree var(int index);
  static ExprTree constant(real value);
  static ExprTree unary(Op op, ExprTree child, real param = 0.0, int iparam = 0);
  static ExprTree binary(Op op, ExprTree lhs, ExprTree rhs);
  static ExprTree clip(ExprTree child, real bound);
  static ExprTree pow(ExprTree child, int exponent);

  int node_count() const { return static_cast<int>(nodes_.size()); }
  bool empty() const { return nodes_.empty(); }
  const Node& node(int i) const { return nodes_[i]; }
  const std::vector<Node>& nodes() const { return nodes_; }
  int subtree_size(int i) const { return sizes_[i]; }

  // Index of the left/right child of an inner node.
  int child0(int i) const { return i + 1; }
  int child1(int i) const { return i + 1 + sizes_[i + 1]; }

  ExprTree subtree(int i) const;
  // New tree with the subtree rooted at `i` replaced by `replacement`.
  ExprTree with_replaced(int i, const ExprTree& replacement) const;

  // Constant slots in depth-first left-to-right order. Clip bounds and pow
  // exponents are structural and not included.
  std::vector<real> constants() const;
  void set_constants(std::span<const real> values);
  int constant_count() const;

  // Rewrites node payloads in place; structure keys and node ops unchanged.
  std::vector<Node>& mutable_nodes() { return nodes_; }
  void refresh();  // recompute subtree sizes after in-place payload edits

 private:
  std::vector<Node> nodes_;
  std::vector<int> sizes_;
  void compute_sizes();
};

// Empty string means the tree satisfies all invariants for input dimension d;
// otherwise the first violation found is described.
std::string validate(const ExprTree& tree, int input_dim,
                     int max_nodes = kDefaultMaxNodes);

// Mathematical evaluation at a point. Any domain violation (sqrt of a
// negative, log of a non-positive, asin/acos outside [-1,1], division by
// zero) or non-finite intermediate yields an empty optional -- non-finite
// values never propagate silently.
std::optional<real> evaluate(const ExprTree& tree, std::span<const real> x);
std::optional<real> evaluate(const ExprTree& tree, std::span<const real> x,
                             std::vector<real>& scratch);

std::vector<std::optional<real>> evaluate_batch(const ExprTree& tree,
                                                const MatX& X);

// Partial derivatives of evaluate() w.r.t. each constant slot, by reverse
// traversal. Kink conventions: clip has subgradient 1 inside the band and 0
// outside, trunc 0 everywhere, abs uses sign with sign(0) = 0. Empty when
// evaluation is invalid at x or a derivative comes out non-finite.
std::optional<std::vector<real>> grad_constants(const ExprTree& tree,
                                                std::span<const real> x);

// Fully parenthesized infix text. Constants print with shortest
// round-trip-exact decimals. Optional readable aliases for variables.
std::string to_string(const ExprTree& tree,
                      std::span<const std::string> var_names = {});

struct ParseError {
  std::size_t position = 0;
  std::string message;
};

// Inverse of to_string. Variables are x0..x{d-1} unless aliases are given.
// Throws std::invalid_argument carrying the position on malformed input.
ExprTree parse(const std::string& text, int input_dim,
               std::span<const std::string> var_names = {});

}  // namespace symdyn::expr
