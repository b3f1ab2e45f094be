#include "symdyn/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace symdyn::expr {

const char* op_name(Op op) {
  switch (op) {
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Abs: return "abs";
    case Op::Inv: return "inv";
    case Op::Sqrt: return "sqrt";
    case Op::Log: return "log";
    case Op::Exp: return "exp";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Asin: return "asin";
    case Op::Acos: return "acos";
    case Op::Tan: return "tan";
    case Op::Atan: return "atan";
    case Op::Clip: return "clip";
    case Op::Trunc: return "trunc";
    case Op::Pow: return "pow";
    case Op::Var: return "var";
    case Op::Const: return "const";
    case Op::E: return "e";
    case Op::Pi: return "pi";
  }
  return "?";
}

ExprTree::ExprTree(std::vector<Node> preorder_nodes)
    : nodes_(std::move(preorder_nodes)) {
  compute_sizes();
}

void ExprTree::compute_sizes() {
  const int n = static_cast<int>(nodes_.size());
  sizes_.assign(n, 1);
  // Children follow their parent, so a right-to-left sweep sees children
  // before parents.
  for (int i = n - 1; i >= 0; --i) {
    const int a = arity(nodes_[i].op);
    int size = 1;
    int child = i + 1;
    for (int c = 0; c < a; ++c) {
      if (child >= n) { size = -1; break; }  // malformed; validate() reports
      size += sizes_[child];
      child += sizes_[child];
    }
    sizes_[i] = size < 0 ? 1 : size;
  }
}

void ExprTree::refresh() { compute_sizes(); }

ExprTree ExprTree::leaf(Op op, real value, int ivalue) {
  return ExprTree({Node{op, value, ivalue}});
}

ExprTree ExprTree::var(int index) { return leaf(Op::Var, 0.0, index); }
ExprTree ExprTree::constant(real value) { return leaf(Op::Const, value, 0); }

ExprTree ExprTree::unary(Op op, ExprTree child, real param, int iparam) {
  std::vector<Node> nodes;
  nodes.reserve(child.nodes_.size() + 1);
  nodes.push_back(Node{op, param, iparam});
  nodes.insert(nodes.end(), child.nodes_.begin(), child.nodes_.end());
  return ExprTree(std::move(nodes));
}

ExprTree ExprTree::binary(Op op, ExprTree lhs, ExprTree rhs) {
  std::vector<Node> nodes;
  nodes.reserve(lhs.nodes_.size() + rhs.nodes_.size() + 1);
  nodes.push_back(Node{op, 0.0, 0});
  nodes.insert(nodes.end(), lhs.nodes_.begin(), lhs.nodes_.end());
  nodes.insert(nodes.end(), rhs.nodes_.begin(), rhs.nodes_.end());
  return ExprTree(std::move(nodes));
}

ExprTree ExprTree::clip(ExprTree child, real bound) {
  return unary(Op::Clip, std::move(child), bound, 0);
}

ExprTree ExprTree::pow(ExprTree child, int exponent) {
  return unary(Op::Pow, std::move(child), 0.0, exponent);
}

ExprTree ExprTree::subtree(int i) const {
  std::vector<Node> nodes(nodes_.begin() + i, nodes_.begin() + i + sizes_[i]);
  return ExprTree(std::move(nodes));
}

ExprTree ExprTree::with_replaced(int i, const ExprTree& replacement) const {
  std::vector<Node> nodes;
  nodes.reserve(nodes_.size() - sizes_[i] + replacement.nodes_.size());
  nodes.insert(nodes.end(), nodes_.begin(), nodes_.begin() + i);
  nodes.insert(nodes.end(), replacement.nodes_.begin(), replacement.nodes_.end());
  nodes.insert(nodes.end(), nodes_.begin() + i + sizes_[i], nodes_.end());
  return ExprTree(std::move(nodes));
}

std::vector<real> ExprTree::constants() const {
  std::vector<real> out;
  for (const Node& n : nodes_)
    if (n.op == Op::Const) out.push_back(n.value);
  return out;
}

int ExprTree::constant_count() const {
  int c = 0;
  for (const Node& n : nodes_) c += (n.op == Op::Const);
  return c;
}

void ExprTree::set_constants(std::span<const real> values) {
  std::size_t j = 0;
  for (Node& n : nodes_) {
    if (n.op != Op::Const) continue;
    if (j >= values.size())
      throw std::invalid_argument("set_constants: too few values");
    n.value = values[j++];
  }
  if (j != values.size())
    throw std::invalid_argument("set_constants: too many values");
}

namespace {

// Recursively consumes the preorder array, returning the consumed span size
// or -1 when the array is truncated.
int walk(const std::vector<Node>& nodes, int i) {
  if (i >= static_cast<int>(nodes.size())) return -1;
  int consumed = 1;
  for (int c = 0; c < arity(nodes[i].op); ++c) {
    const int sub = walk(nodes, i + consumed);
    if (sub < 0) return -1;
    consumed += sub;
  }
  return consumed;
}

}  // namespace

std::string validate(const ExprTree& tree, int input_dim, int max_nodes) {
  const auto& nodes = tree.nodes();
  if (nodes.empty()) return "empty tree";
  if (tree.node_count() > max_nodes)
    return "node budget exceeded: " + std::to_string(tree.node_count()) +
           " > " + std::to_string(max_nodes);
  const int consumed = walk(nodes, 0);
  if (consumed != tree.node_count())
    return "arity violation: tree structure does not consume all nodes";
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    switch (n.op) {
      case Op::Var:
        if (n.ivalue < 0 || n.ivalue >= input_dim)
          return "variable index " + std::to_string(n.ivalue) +
                 " out of range for dimension " + std::to_string(input_dim);
        break;
      case Op::Const:
        if (!std::isfinite(n.value)) return "non-finite constant";
        break;
      case Op::Clip:
        if (!(n.value > 0.0) || !std::isfinite(n.value))
          return "clip bound must be a positive finite number";
        break;
      case Op::Pow:
        if (n.ivalue == 0 || n.ivalue < -4 || n.ivalue > 4)
          return "pow exponent must lie in [-4,4] and be nonzero";
        break;
      default:
        break;
    }
  }
  return {};
}

namespace {

inline real ipow(real v, int k) {
  real r = 1.0;
  const int a = k < 0 ? -k : k;
  for (int i = 0; i < a; ++i) r *= v;
  return k < 0 ? 1.0 / r : r;
}

}  // namespace

std::optional<real> evaluate(const ExprTree& tree, std::span<const real> x,
                             std::vector<real>& vals) {
  const auto& nodes = tree.nodes();
  const int n = static_cast<int>(nodes.size());
  if (n == 0) return std::nullopt;
  vals.resize(n);
  // Children live at higher indices than their parent, so a backward sweep
  // evaluates bottom-up.
  for (int i = n - 1; i >= 0; --i) {
    const Node& nd = nodes[i];
    real v = 0.0;
    switch (nd.op) {
      case Op::Var: v = x[static_cast<std::size_t>(nd.ivalue)]; break;
      case Op::Const: v = nd.value; break;
      case Op::E: v = std::exp(1.0); break;
      case Op::Pi: v = M_PI; break;
      case Op::Add: v = vals[tree.child0(i)] + vals[tree.child1(i)]; break;
      case Op::Sub: v = vals[tree.child0(i)] - vals[tree.child1(i)]; break;
      case Op::Mul: v = vals[tree.child0(i)] * vals[tree.child1(i)]; break;
      case Op::Div: v = vals[tree.child0(i)] / vals[tree.child1(i)]; break;
      case Op::Abs: v = std::fabs(vals[i + 1]); break;
      case Op::Inv: v = 1.0 / vals[i + 1]; break;
      case Op::Sqrt: v = std::sqrt(vals[i + 1]); break;
      case Op::Log: v = std::log(vals[i + 1]); break;
      case Op::Exp: v = std::exp(vals[i + 1]); break;
      case Op::Sin: v = std::sin(vals[i + 1]); break;
      case Op::Cos: v = std::cos(vals[i + 1]); break;
      case Op::Asin: v = std::asin(vals[i + 1]); break;
      case Op::Acos: v = std::acos(vals[i + 1]); break;
      case Op::Tan: v = std::tan(vals[i + 1]); break;
      case Op::Atan: v = std::atan(vals[i + 1]); break;
      case Op::Clip: v = std::clamp(vals[i + 1], -nd.value, nd.value); break;
      case Op::Trunc: v = std::trunc(vals[i + 1]); break;
      case Op::Pow: v = ipow(vals[i + 1], nd.ivalue); break;
    }
    if (!std::isfinite(v)) return std::nullopt;
    vals[i] = v;
  }
  return vals[0];
}

std::optional<real> evaluate(const ExprTree& tree, std::span<const real> x) {
  std::vector<real> scratch;
  return evaluate(tree, x, scratch);
}

std::vector<std::optional<real>> evaluate_batch(const ExprTree& tree,
                                                const MatX& X) {
  std::vector<std::optional<real>> out;
  out.reserve(static_cast<std::size_t>(X.rows()));
  std::vector<real> scratch, row(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    for (Eigen::Index c = 0; c < X.cols(); ++c)
      row[static_cast<std::size_t>(c)] = X(r, c);
    out.push_back(evaluate(tree, row, scratch));
  }
  return out;
}

std::optional<std::vector<real>> grad_constants(const ExprTree& tree,
                                                std::span<const real> x) {
  std::vector<real> vals;
  if (!evaluate(tree, x, vals)) return std::nullopt;

  const auto& nodes = tree.nodes();
  const int n = static_cast<int>(nodes.size());
  std::vector<real> adj(static_cast<std::size_t>(n), 0.0);
  std::vector<real> grads;
  adj[0] = 1.0;
  bool finite = true;
  // Parents precede children in preorder, so a forward sweep pushes adjoints
  // down the tree.
  for (int i = 0; i < n && finite; ++i) {
    const Node& nd = nodes[i];
    const real a = adj[static_cast<std::size_t>(i)];
    switch (nd.op) {
      case Op::Const: grads.push_back(a); break;
      case Op::Var: case Op::E: case Op::Pi: break;
      case Op::Add:
        adj[tree.child0(i)] += a;
        adj[tree.child1(i)] += a;
        break;
      case Op::Sub:
        adj[tree.child0(i)] += a;
        adj[tree.child1(i)] -= a;
        break;
      case Op::Mul:
        adj[tree.child0(i)] += a * vals[tree.child1(i)];
        adj[tree.child1(i)] += a * vals[tree.child0(i)];
        break;
      case Op::Div: {
        const real num = vals[tree.child0(i)], den = vals[tree.child1(i)];
        adj[tree.child0(i)] += a / den;
        adj[tree.child1(i)] -= a * num / (den * den);
        break;
      }
      default: {
        const real v = vals[i + 1];
        real d = 0.0;
        switch (nd.op) {
          case Op::Abs: d = v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); break;
          case Op::Inv: d = -1.0 / (v * v); break;
          case Op::Sqrt: d = 0.5 / std::sqrt(v); break;
          case Op::Log: d = 1.0 / v; break;
          case Op::Exp: d = vals[i]; break;
          case Op::Sin: d = std::cos(v); break;
          case Op::Cos: d = -std::sin(v); break;
          case Op::Asin: d = 1.0 / std::sqrt(1.0 - v * v); break;
          case Op::Acos: d = -1.0 / std::sqrt(1.0 - v * v); break;
          case Op::Tan: d = 1.0 + vals[i] * vals[i]; break;
          case Op::Atan: d = 1.0 / (1.0 + v * v); break;
          case Op::Clip: d = std::fabs(v) <= nd.value ? 1.0 : 0.0; break;
          case Op::Trunc: d = 0.0; break;
          case Op::Pow: d = nd.ivalue * ipow(v, nd.ivalue - 1); break;
          default: break;
        }
        const real down = a * d;
        if (!std::isfinite(down)) { finite = false; break; }
        adj[static_cast<std::size_t>(i + 1)] += down;
        break;
      }
    }
  }
  if (!finite) return std::nullopt;
  for (real g : grads)
    if (!std::isfinite(g)) return std::nullopt;
  return grads;
}

namespace {

std::string format_real(real v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void print_node(const ExprTree& t, int i, std::span<const std::string> names,
                std::string& out) {
  const Node& nd = t.node(i);
  switch (nd.op) {
    case Op::Add: case Op::Sub: case Op::Mul: case Op::Div:
      out += '(';
      print_node(t, t.child0(i), names, out);
      out += ' ';
      out += op_name(nd.op);
      out += ' ';
      print_node(t, t.child1(i), names, out);
      out += ')';
      break;
    case Op::Clip:
      out += "clip(";
      print_node(t, i + 1, names, out);
      out += ", ";
      out += format_real(nd.value);
      out += ')';
      break;
    case Op::Pow:
      out += "pow(";
      print_node(t, i + 1, names, out);
      out += ", ";
      out += std::to_string(nd.ivalue);
      out += ')';
      break;
    case Op::Var:
      if (!names.empty())
        out += names[static_cast<std::size_t>(nd.ivalue)];
      else
        out += "x" + std::to_string(nd.ivalue);
      break;
    case Op::Const: out += format_real(nd.value); break;
    case Op::E: out += "e"; break;
    case Op::Pi: out += "pi"; break;
    default:
      out += op_name(nd.op);
      out += '(';
      print_node(t, i + 1, names, out);
      out += ')';
      break;
  }
}

struct Parser {
  const std::string& text;
  std::size_t pos = 0;
  int dim;
  std::span<const std::string> names;

  [[noreturn]] void fail(const std::string& msg) const {
    throw std::invalid_argument("parse error at position " +
                                std::to_string(pos) + ": " + msg);
  }

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
      ++pos;
  }

  bool eat(char c) {
    skip_ws();
    if (pos < text.size() && text[pos] == c) { ++pos; return true; }
    return false;
  }

  void expect(char c) {
    if (!eat(c)) fail(std::string("expected '") + c + "'");
  }

  real number() {
    skip_ws();
    const char* begin = text.data() + pos;
    const char* end = text.data() + text.size();
    real value = 0.0;
    auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{}) fail("expected a number");
    pos += static_cast<std::size_t>(res.ptr - begin);
    return value;
  }

  std::string identifier() {
    skip_ws();
    std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) ||
            text[pos] == '_'))
      ++pos;
    if (pos == start) fail("expected an identifier");
    return text.substr(start, pos - start);
  }

  ExprTree expression() {
    skip_ws();
    if (pos >= text.size()) fail("unexpected end of input");
    const char c = text[pos];
    if (c == '(') {
      ++pos;
      ExprTree lhs = expression();
      skip_ws();
      if (pos >= text.size()) fail("unexpected end of input");
      Op op;
      switch (text[pos]) {
        case '+': op = Op::Add; break;
        case '-': op = Op::Sub; break;
        case '*': op = Op::Mul; break;
        case '/': op = Op::Div; break;
        default: fail("expected a binary operator");
      }
      ++pos;
      ExprTree rhs = expression();
      expect(')');
      return ExprTree::binary(op, std::move(lhs), std::move(rhs));
    }
    if (c == '-' || c == '+' || std::isdigit(static_cast<unsigned char>(c)) ||
        c == '.')
      return ExprTree::constant(number());
    const std::size_t id_pos = pos;
    std::string id = identifier();
    skip_ws();
    const bool call = pos < text.size() && text[pos] == '(';
    if (call) {
      static const std::pair<const char*, Op> kFuncs[] = {
          {"abs", Op::Abs},   {"inv", Op::Inv},   {"sqrt", Op::Sqrt},
          {"log", Op::Log},   {"exp", Op::Exp},   {"sin", Op::Sin},
          {"cos", Op::Cos},   {"asin", Op::Asin}, {"acos", Op::Acos},
          {"tan", Op::Tan},   {"atan", Op::Atan}, {"trunc", Op::Trunc}};
      ++pos;
      if (id == "clip") {
        ExprTree child = expression();
        expect(',');
        const real bound = number();
        expect(')');
        return ExprTree::clip(std::move(child), bound);
      }
      if (id == "pow") {
        ExprTree child = expression();
        expect(',');
        const real k = number();
        expect(')');
        return ExprTree::pow(std::move(child), static_cast<int>(k));
      }
      for (const auto& [name, op] : kFuncs) {
        if (id == name) {
          ExprTree child = expression();
          expect(')');
          return ExprTree::unary(op, std::move(child));
        }
      }
      pos = id_pos;
      fail("unknown function '" + id + "'");
    }
    if (id == "e") return ExprTree::leaf(Op::E);
    if (id == "pi") return ExprTree::leaf(Op::Pi);
    for (std::size_t i = 0; i < names.size(); ++i)
      if (id == names[i]) return ExprTree::var(static_cast<int>(i));
    if (id.size() >= 2 && id[0] == 'x') {
      int index = 0;
      auto res = std::from_chars(id.data() + 1, id.data() + id.size(), index);
      if (res.ec == std::errc{} && res.ptr == id.data() + id.size()) {
        if (index < 0 || index >= dim) {
          pos = id_pos;
          fail("variable index " + std::to_string(index) +
               " out of range for dimension " + std::to_string(dim));
        }
        return ExprTree::var(index);
      }
    }
    pos = id_pos;
    fail("unknown identifier '" + id + "'");
  }
};

}  // namespace

std::string to_string(const ExprTree& tree,
                      std::span<const std::string> var_names) {
  std::string out;
  if (tree.empty()) return out;
  print_node(tree, 0, var_names, out);
  return out;
}

ExprTree parse(const std::string& text, int input_dim,
               std::span<const std::string> var_names) {
  Parser p{text, 0, input_dim, var_names};
  ExprTree tree = p.expression();
  p.skip_ws();
  if (p.pos != text.size()) p.fail("trailing input");
  return tree;
}

}  // namespace symdyn::expr
