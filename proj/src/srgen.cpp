#include "symdyn/srgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace symdyn::srgen {

using expr::ExprTree;
using expr::Op;
using fitopt::Dataset;

// ---------------------------------------------------------------------------
// Standardizer

real Standardizer::fwd(const Range& r, real v) {
  if (r.hi <= r.lo) return 0.0;
  return 2.0 * (v - r.lo) / (r.hi - r.lo) - 1.0;
}

Standardizer Standardizer::fit(const Dataset& data) {
  Standardizer s;
  s.in_.resize(static_cast<std::size_t>(data.dim()));
  for (Eigen::Index c = 0; c < data.dim(); ++c) {
    s.in_[static_cast<std::size_t>(c)] = {data.X.col(c).minCoeff(),
                                          data.X.col(c).maxCoeff()};
  }
  s.out_ = {data.y.minCoeff(), data.y.maxCoeff()};
  return s;
}

Dataset Standardizer::standardize(const Dataset& data) const {
  Dataset out;
  out.X.resize(data.X.rows(), data.X.cols());
  out.y.resize(data.y.size());
  for (Eigen::Index c = 0; c < data.X.cols(); ++c)
    for (Eigen::Index r = 0; r < data.X.rows(); ++r)
      out.X(r, c) = fwd(in_[static_cast<std::size_t>(c)], data.X(r, c));
  for (Eigen::Index r = 0; r < data.y.size(); ++r)
    out.y(r) = fwd(out_, data.y(r));
  return out;
}

real Standardizer::standardize_input(int dim, real v) const {
  return fwd(in_[static_cast<std::size_t>(dim)], v);
}
real Standardizer::standardize_target(real v) const { return fwd(out_, v); }

real Standardizer::destandardize_target(real v) const {
  if (out_.hi <= out_.lo) return out_.lo;
  return out_.lo + (out_.hi - out_.lo) * (v + 1.0) / 2.0;
}

std::pair<real, real> Standardizer::input_map(int dim) const {
  const Range& r = in_[static_cast<std::size_t>(dim)];
  if (r.hi <= r.lo) return {0.0, 0.0};
  const real a = 2.0 / (r.hi - r.lo);
  return {a, -a * r.lo - 1.0};
}

std::pair<real, real> Standardizer::target_inverse_map() const {
  if (out_.hi <= out_.lo) return {0.0, out_.lo};
  return {(out_.hi - out_.lo) / 2.0, (out_.hi + out_.lo) / 2.0};
}

// ---------------------------------------------------------------------------
// Random expression sampling

std::array<real, 18> GeneratorConfig::default_op_weights() {
  std::array<real, 18> w{};
  w[static_cast<int>(Op::Add)] = 1.0;
  w[static_cast<int>(Op::Sub)] = 1.0;
  w[static_cast<int>(Op::Mul)] = 1.0;
  w[static_cast<int>(Op::Div)] = 0.25;
  w[static_cast<int>(Op::Abs)] = 0.15;
  w[static_cast<int>(Op::Inv)] = 0.1;
  w[static_cast<int>(Op::Sqrt)] = 0.15;
  w[static_cast<int>(Op::Log)] = 0.1;
  w[static_cast<int>(Op::Exp)] = 0.1;
  w[static_cast<int>(Op::Sin)] = 1.0;
  w[static_cast<int>(Op::Cos)] = 0.8;
  w[static_cast<int>(Op::Asin)] = 0.02;
  w[static_cast<int>(Op::Acos)] = 0.02;
  w[static_cast<int>(Op::Tan)] = 0.05;
  w[static_cast<int>(Op::Atan)] = 0.15;
  w[static_cast<int>(Op::Clip)] = 0.8;
  w[static_cast<int>(Op::Trunc)] = 0.05;
  w[static_cast<int>(Op::Pow)] = 0.4;
  return w;
}

std::string GeneratorConfig::validate() const {
  if (max_nodes < 1) return "max_nodes must be >= 1";
  if (n_candidates < 1) return "n_candidates must be >= 1";
  if (population < n_candidates) return "population must be >= n_candidates";
  if (tournament_size < 1) return "tournament_size must be >= 1";
  if (generations < 0) return "generations must be >= 0";
  if (p_crossover < 0 || p_crossover > 1) return "p_crossover must be in [0,1]";
  if (p_mutate < 0 || p_mutate > 1) return "p_mutate must be in [0,1]";
  if (polish_top < 0) return "polish_top must be >= 0";
  for (real w : op_weights)
    if (w < 0) return "op_weights must be nonnegative";
  return {};
}

namespace {

constexpr int kBinaryOps[] = {0, 1, 2, 3};  // Add..Div
constexpr int kUnaryFirst = static_cast<int>(Op::Abs);
constexpr int kUnaryLast = static_cast<int>(Op::Pow);
constexpr real kClipBounds[] = {1.0, 2.0, 4.0, 8.0};
constexpr int kPowExponents[] = {-2, -1, 2, 3};

Op pick_weighted_op(const GeneratorConfig& cfg, Rng& rng, bool binary_only,
                    bool unary_only) {
  real total = 0.0;
  const int first = unary_only ? kUnaryFirst : 0;
  const int last = binary_only ? 3 : kUnaryLast;
  for (int i = first; i <= last; ++i) total += cfg.op_weights[static_cast<std::size_t>(i)];
  real r = uniform(rng, 0.0, total);
  for (int i = first; i <= last; ++i) {
    r -= cfg.op_weights[static_cast<std::size_t>(i)];
    if (r <= 0.0) return static_cast<Op>(i);
  }
  return binary_only ? Op::Add : Op::Sin;
}

void fill_params(expr::Node& n, Rng& rng) {
  if (n.op == Op::Clip)
    n.value = kClipBounds[static_cast<std::size_t>(uniform_int(rng, 0, 3))];
  else if (n.op == Op::Pow)
    n.ivalue = kPowExponents[static_cast<std::size_t>(uniform_int(rng, 0, 3))];
}

ExprTree sample_leaf(int input_dim, Rng& rng) {
  const real r = uniform(rng, 0.0, 1.0);
  if (r < 0.55) return ExprTree::var(uniform_int(rng, 0, input_dim - 1));
  if (r < 0.92) return ExprTree::constant(normal(rng));
  return ExprTree::leaf(uniform(rng, 0.0, 1.0) < 0.5 ? Op::Pi : Op::E);
}

ExprTree sample_node(const GeneratorConfig& cfg, int input_dim, Rng& rng,
                     int depth, int depth_limit) {
  const real p_op = std::max(0.0, 0.85 - 0.13 * depth);
  if (depth >= depth_limit || uniform(rng, 0.0, 1.0) >= p_op)
    return sample_leaf(input_dim, rng);
  const Op op = pick_weighted_op(cfg, rng, false, false);
  if (arity(op) == 2)
    return ExprTree::binary(op,
                            sample_node(cfg, input_dim, rng, depth + 1, depth_limit),
                            sample_node(cfg, input_dim, rng, depth + 1, depth_limit));
  expr::Node n{op, 0.0, 0};
  fill_params(n, rng);
  return ExprTree::unary(op, sample_node(cfg, input_dim, rng, depth + 1, depth_limit),
                         n.value, n.ivalue);
}

}  // namespace

ExprTree sample_random_expr(const GeneratorConfig& cfg, int input_dim, Rng& rng,
                            int depth_limit) {
  for (int tries = 0; tries < 200; ++tries) {
    ExprTree t = sample_node(cfg, input_dim, rng, 0, depth_limit);
    if (t.node_count() <= cfg.max_nodes) return t;
  }
  return ExprTree::var(uniform_int(rng, 0, input_dim - 1));
}

// ---------------------------------------------------------------------------
// Genetic programming

namespace {

struct EvalData {
  Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> X;
  VecX y;
  explicit EvalData(const Dataset& d) : X(d.X), y(d.y) {}
  Eigen::Index rows() const { return X.rows(); }
  std::span<const real> row(Eigen::Index r) const {
    return {X.data() + r * X.cols(), static_cast<std::size_t>(X.cols())};
  }
};

struct Fitness {
  real obj = std::numeric_limits<real>::infinity();
  int nodes = 0;
  long n_valid = 0;
  bool operator<(const Fitness& o) const {
    if (obj != o.obj) return obj < o.obj;
    return nodes < o.nodes;
  }
};

Fitness eval_fitness(const ExprTree& t, const EvalData& data,
                     std::vector<real>& scratch) {
  Fitness f;
  f.nodes = t.node_count();
  real sum = 0.0;
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const auto v = expr::evaluate(t, data.row(r), scratch);
    if (v) {
      const real e = *v - data.y(r);
      sum += e * e;
      ++f.n_valid;
    } else {
      sum += fitopt::kInvalidRowPenalty;
    }
  }
  f.obj = sum / static_cast<real>(data.rows());
  return f;
}

struct Individual {
  ExprTree tree;
  Fitness fit;
};

// Structure key: node ops plus structural parameters, with numeric constant
// values masked so distinct constants do not count as distinct structures.
std::string structure_key(const ExprTree& t) {
  std::string key;
  key.reserve(static_cast<std::size_t>(t.node_count()) * 3);
  for (const expr::Node& n : t.nodes()) {
    key += static_cast<char>('A' + static_cast<int>(n.op));
    if (n.op == Op::Var) key += std::to_string(n.ivalue);
    if (n.op == Op::Pow) key += std::to_string(n.ivalue + 8);
    if (n.op == Op::Clip) key += std::to_string(static_cast<int>(n.value));
    key += '.';
  }
  return key;
}

class Gp {
 public:
  Gp(const GeneratorConfig& cfg, const Dataset& data)
      : cfg_(cfg), dataset_(data), data_(data), rng_(make_rng(cfg.seed, 0xc0ffee)) {
    min_valid_ = static_cast<long>(
        std::ceil(0.9 * static_cast<real>(data_.rows())));
  }

  std::vector<ExprTree> run(int n_out, std::vector<real>* history) {
    const int pop_size = cfg_.population;
    const int immigrants = std::max(1, pop_size / 20);
    std::vector<Individual> pop;
    pop.reserve(static_cast<std::size_t>(pop_size));
    for (int i = 0; i < pop_size; ++i)
      pop.push_back(fresh_individual(2 + i % 5));

    for (int gen = 0; gen < cfg_.generations; ++gen) {
      const int elite = best_index(pop);
      std::vector<Individual> next;
      next.reserve(static_cast<std::size_t>(pop_size));
      next.push_back(pop[static_cast<std::size_t>(elite)]);
      // A structure may hold at most a few slots; clones beyond that are
      // replaced by fresh blood so one good find cannot take the population
      // over within a couple of generations.
      std::map<std::string, int> census;
      census[structure_key(next[0].tree)] = 1;
      int rejections = 0;
      while (static_cast<int>(next.size()) < pop_size - immigrants) {
        Individual child =
            rejections >= 20 ? fresh_individual(3) : make_offspring(pop);
        int& count = census[structure_key(child.tree)];
        if (count >= 3 && rejections < 20) {
          ++rejections;
          continue;
        }
        rejections = 0;
        ++count;
        next.push_back(std::move(child));
      }
      while (static_cast<int>(next.size()) < pop_size)
        next.push_back(fresh_individual(2 + gen % 5));
      pop = std::move(next);
      if (cfg_.polish_top > 0) polish_best(pop);
      const real best = pop[static_cast<std::size_t>(best_index(pop))].fit.obj;
      if (history) history->push_back(best);
      if (best <= 1e-14) break;  // exact fit found, stop searching
    }
    for (const Individual& ind : pop) consider_archive(ind);
    return select_heads(n_out);
  }

  // A short constant refinement on the best few structures each generation.
  // Raw evolved constants make good structures look mediocre; a handful of
  // quasi-Newton steps lets selection see the structure's real potential.
  void polish_best(std::vector<Individual>& pop) {
    std::vector<int> order(pop.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return pop[static_cast<std::size_t>(a)].fit < pop[static_cast<std::size_t>(b)].fit;
    });
    fitopt::BfgsOptions opts;
    opts.max_iters = 10;
    std::map<std::string, bool> seen;
    int polished = 0;
    for (int idx : order) {
      if (polished >= cfg_.polish_top) break;
      Individual& ind = pop[static_cast<std::size_t>(idx)];
      if (ind.fit.n_valid < min_valid_ || ind.tree.constant_count() == 0) continue;
      if (seen[structure_key(ind.tree)]) continue;
      seen[structure_key(ind.tree)] = true;
      ++polished;
      try {
        fitopt::RefineResult rr = fitopt::refine_constants(ind.tree, dataset_, opts);
        Individual refined = evaluated(std::move(rr.tree));
        if (refined.fit < ind.fit && acceptable(refined)) {
          ind = std::move(refined);
          consider_archive(ind);
        }
      } catch (const std::runtime_error&) {
      }
    }
  }

 private:
  const GeneratorConfig& cfg_;
  const Dataset& dataset_;
  EvalData data_;
  Rng rng_;
  long min_valid_ = 0;
  std::vector<real> scratch_;
  std::map<std::string, Individual> archive_;

  Individual evaluated(ExprTree t) {
    Individual ind{std::move(t), {}};
    ind.fit = eval_fitness(ind.tree, data_, scratch_);
    return ind;
  }

  bool acceptable(const Individual& ind) const {
    return ind.fit.n_valid >= min_valid_;
  }

  Individual fresh_individual(int depth_limit) {
    for (int tries = 0; tries < 50; ++tries) {
      Individual ind = evaluated(
          sample_random_expr(cfg_, static_cast<int>(data_.X.cols()), rng_, depth_limit));
      if (acceptable(ind)) {
        consider_archive(ind);
        return ind;
      }
    }
    // A bare variable is valid everywhere.
    Individual ind = evaluated(
        ExprTree::var(uniform_int(rng_, 0, static_cast<int>(data_.X.cols()) - 1)));
    consider_archive(ind);
    return ind;
  }

  void consider_archive(const Individual& ind) {
    std::string key = structure_key(ind.tree);
    auto it = archive_.find(key);
    if (it == archive_.end()) {
      if (archive_.size() >= 4096) prune_archive();
      archive_.emplace(std::move(key), ind);
    } else if (ind.fit < it->second.fit) {
      it->second = ind;
    }
  }

  void prune_archive() {
    std::vector<std::pair<std::string, Individual>> items(archive_.begin(),
                                                          archive_.end());
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) {
                       if (a.second.fit.obj != b.second.fit.obj)
                         return a.second.fit.obj < b.second.fit.obj;
                       if (a.second.fit.nodes != b.second.fit.nodes)
                         return a.second.fit.nodes < b.second.fit.nodes;
                       return a.first < b.first;
                     });
    archive_.clear();
    for (std::size_t i = 0; i < items.size() / 2; ++i)
      archive_.insert(items[i]);
  }

  static int best_index(const std::vector<Individual>& pop) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(pop.size()); ++i)
      if (pop[static_cast<std::size_t>(i)].fit < pop[static_cast<std::size_t>(best)].fit)
        best = i;
    return best;
  }

  const Individual& tournament(const std::vector<Individual>& pop) {
    int best = uniform_int(rng_, 0, static_cast<int>(pop.size()) - 1);
    for (int i = 1; i < cfg_.tournament_size; ++i) {
      const int c = uniform_int(rng_, 0, static_cast<int>(pop.size()) - 1);
      if (pop[static_cast<std::size_t>(c)].fit < pop[static_cast<std::size_t>(best)].fit)
        best = c;
    }
    return pop[static_cast<std::size_t>(best)];
  }

  Individual make_offspring(const std::vector<Individual>& pop) {
    for (int tries = 0; tries < 10; ++tries) {
      ExprTree child;
      bool bred_clones = false;
      if (uniform(rng_, 0.0, 1.0) < cfg_.p_crossover) {
        const ExprTree& a = tournament(pop).tree;
        const ExprTree& b = tournament(pop).tree;
        bred_clones = structure_key(a) == structure_key(b);
        child = crossover(a, b);
      } else {
        child = tournament(pop).tree;
        bred_clones = true;
      }
      if (bred_clones || uniform(rng_, 0.0, 1.0) < cfg_.p_mutate)
        child = mutate(child);
      Individual ind = evaluated(std::move(child));
      if (acceptable(ind)) {
        consider_archive(ind);
        return ind;
      }
    }
    return fresh_individual(3);
  }

  ExprTree crossover(const ExprTree& a, const ExprTree& b) {
    for (int tries = 0; tries < 8; ++tries) {
      const int i = uniform_int(rng_, 0, a.node_count() - 1);
      const int j = uniform_int(rng_, 0, b.node_count() - 1);
      ExprTree child = a.with_replaced(i, b.subtree(j));
      if (child.node_count() <= cfg_.max_nodes) return child;
    }
    return a;
  }

  ExprTree mutate(const ExprTree& t) {
    const int d = static_cast<int>(data_.X.cols());
    for (int tries = 0; tries < 8; ++tries) {
      ExprTree out = t;
      const int node = uniform_int(rng_, 0, t.node_count() - 1);
      switch (uniform_int(rng_, 0, 7)) {
        case 0:  // replace subtree with a fresh one
          out = t.with_replaced(node, sample_node(cfg_, d, rng_, 0, 3));
          break;
        case 1: {  // point mutation: swap op / redraw payload in place
          auto& nodes = out.mutable_nodes();
          expr::Node& n = nodes[static_cast<std::size_t>(node)];
          if (arity(n.op) == 2) {
            n.op = pick_weighted_op(cfg_, rng_, true, false);
          } else if (arity(n.op) == 1) {
            n.op = pick_weighted_op(cfg_, rng_, false, true);
            n.value = 0.0;
            n.ivalue = 0;
            fill_params(n, rng_);
          } else if (n.op == Op::Var) {
            n.ivalue = uniform_int(rng_, 0, d - 1);
          } else {
            n.op = Op::Const;
            n.value = normal(rng_);
          }
          out.refresh();
          break;
        }
        case 2: {  // jitter one constant / redraw one structural parameter
          std::vector<int> slots;
          for (int i = 0; i < t.node_count(); ++i) {
            const Op op = t.node(i).op;
            if (op == Op::Const || op == Op::Clip || op == Op::Pow)
              slots.push_back(i);
          }
          if (slots.empty()) continue;
          const int i = slots[static_cast<std::size_t>(
              uniform_int(rng_, 0, static_cast<int>(slots.size()) - 1))];
          auto& n = out.mutable_nodes()[static_cast<std::size_t>(i)];
          if (n.op == Op::Const) {
            // jitter locally or jump basins with a fresh draw
            if (uniform(rng_, 0.0, 1.0) < 0.7)
              n.value += normal(rng_, 0.0, 0.3 * (std::fabs(n.value) + 1.0));
            else
              n.value = normal(rng_);
          } else {
            fill_params(n, rng_);
          }
          break;
        }
        case 3: {  // wrap a node in a unary operator
          expr::Node n{pick_weighted_op(cfg_, rng_, false, true), 0.0, 0};
          fill_params(n, rng_);
          out = t.with_replaced(
              node, ExprTree::unary(n.op, t.subtree(node), n.value, n.ivalue));
          break;
        }
        case 4: {  // unwrap a unary node
          std::vector<int> unaries;
          for (int i = 0; i < t.node_count(); ++i)
            if (arity(t.node(i).op) == 1) unaries.push_back(i);
          if (unaries.empty()) continue;
          const int i = unaries[static_cast<std::size_t>(
              uniform_int(rng_, 0, static_cast<int>(unaries.size()) - 1))];
          out = t.with_replaced(i, t.subtree(i + 1));
          break;
        }
        case 5: {  // rescale a variable leaf: x -> (c * x)
          std::vector<int> vars;
          for (int i = 0; i < t.node_count(); ++i)
            if (t.node(i).op == Op::Var) vars.push_back(i);
          if (vars.empty()) continue;
          const int i = vars[static_cast<std::size_t>(
              uniform_int(rng_, 0, static_cast<int>(vars.size()) - 1))];
          out = t.with_replaced(
              i, ExprTree::binary(Op::Mul, ExprTree::constant(normal(rng_, 1.0, 0.3)),
                                  t.subtree(i)));
          break;
        }
        case 6:  // affine wrap: S -> ((c1 * S) + c2)
          out = t.with_replaced(
              node,
              ExprTree::binary(
                  Op::Add,
                  ExprTree::binary(Op::Mul, ExprTree::constant(normal(rng_, 1.0, 0.3)),
                                   t.subtree(node)),
                  ExprTree::constant(normal(rng_, 0.0, 0.3))));
          break;
        case 7: {  // add a regression term: S -> (S + c*x_j) or (S + c*sin(b*x_j))
          const ExprTree x = ExprTree::var(uniform_int(rng_, 0, d - 1));
          ExprTree term =
              uniform(rng_, 0.0, 1.0) < 0.5
                  ? ExprTree::binary(Op::Mul, ExprTree::constant(normal(rng_, 0.0, 0.5)), x)
                  : ExprTree::binary(
                        Op::Mul, ExprTree::constant(normal(rng_, 0.0, 0.5)),
                        ExprTree::unary(Op::Sin,
                                        ExprTree::binary(Op::Mul,
                                                         ExprTree::constant(normal(rng_, 1.0, 0.8)),
                                                         x)));
          const int at = uniform(rng_, 0.0, 1.0) < 0.5 ? 0 : node;
          out = t.with_replaced(
              at, ExprTree::binary(Op::Add, t.subtree(at), std::move(term)));
          break;
        }
      }
      if (out.node_count() <= cfg_.max_nodes) return out;
    }
    return t;
  }

  std::vector<ExprTree> select_heads(int n_out) {
    std::vector<std::pair<std::string, Individual>> items(archive_.begin(),
                                                          archive_.end());
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) {
                       if (a.second.fit.obj != b.second.fit.obj)
                         return a.second.fit.obj < b.second.fit.obj;
                       if (a.second.fit.nodes != b.second.fit.nodes)
                         return a.second.fit.nodes < b.second.fit.nodes;
                       return a.first < b.first;
                     });
    std::vector<ExprTree> out;
    for (const auto& [key, ind] : items) {
      if (static_cast<int>(out.size()) >= n_out) break;
      out.push_back(ind.tree);
    }
    // Degenerate datasets can leave fewer distinct structures than asked for.
    while (static_cast<int>(out.size()) < n_out && !out.empty())
      out.push_back(out.back());
    return out;
  }
};

}  // namespace

std::vector<ExprTree> GpGenerator::generate(const Dataset& data, int n) {
  const std::string err = cfg_.validate();
  if (!err.empty()) throw std::invalid_argument("GpGenerator: " + err);
  history_.clear();
  Gp gp(cfg_, data);
  return gp.run(n, &history_);
}

std::vector<ExprTree> gp_search(const Dataset& data, const GeneratorConfig& cfg) {
  GpGenerator gen(cfg);
  return gen.generate(data, cfg.n_candidates);
}

// ---------------------------------------------------------------------------
// Per-dimension pipeline

Dataset subsample(const Dataset& data, Eigen::Index n, Rng& rng) {
  if (data.rows() <= n) return data;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(data.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  Dataset out;
  out.X.resize(n, data.dim());
  out.y.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    out.X.row(r) = data.X.row(idx[static_cast<std::size_t>(r)]);
    out.y(r) = data.y(idx[static_cast<std::size_t>(r)]);
  }
  return out;
}

namespace {

// Replaces every variable with its standardization map and wraps the root in
// the target's inverse map, so the tree works in original units end to end.
ExprTree compose_with_affine(const ExprTree& winner, const Standardizer& std) {
  ExprTree out = winner;
  // Replace variables back to front so earlier indices stay valid.
  for (int i = out.node_count() - 1; i >= 0; --i) {
    if (out.node(i).op != Op::Var) continue;
    const int v = out.node(i).ivalue;
    const auto [a, b] = std.input_map(v);
    ExprTree mapped =
        a == 0.0 && b == 0.0
            ? ExprTree::constant(0.0)
            : ExprTree::binary(Op::Add,
                               ExprTree::binary(Op::Mul, ExprTree::constant(a),
                                                ExprTree::var(v)),
                               ExprTree::constant(b));
    out = out.with_replaced(i, std::move(mapped));
  }
  const auto [m, q] = std.target_inverse_map();
  return ExprTree::binary(
      Op::Add, ExprTree::binary(Op::Mul, ExprTree::constant(m), std::move(out)),
      ExprTree::constant(q));
}

}  // namespace

DimensionFit fit_dimension(const Dataset& data, ExpressionGenerator& gen,
                           const GeneratorConfig& cfg) {
  if (data.rows() < 20)
    throw std::invalid_argument("fit_dimension: need at least 20 rows, got " +
                                std::to_string(data.rows()));

  Rng split_rng = make_rng(cfg.seed, 0x5b117);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(data.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), split_rng);
  const Eigen::Index n_held = std::max<Eigen::Index>(1, data.rows() / 5);
  const Eigen::Index n_train = data.rows() - n_held;

  Dataset train, held;
  train.X.resize(n_train, data.dim());
  train.y.resize(n_train);
  held.X.resize(n_held, data.dim());
  held.y.resize(n_held);
  for (Eigen::Index r = 0; r < n_train; ++r) {
    train.X.row(r) = data.X.row(idx[static_cast<std::size_t>(r)]);
    train.y(r) = data.y(idx[static_cast<std::size_t>(r)]);
  }
  for (Eigen::Index r = 0; r < n_held; ++r) {
    held.X.row(r) = data.X.row(idx[static_cast<std::size_t>(n_train + r)]);
    held.y(r) = data.y(idx[static_cast<std::size_t>(n_train + r)]);
  }

  const Standardizer std_map = Standardizer::fit(train);
  const Dataset std_train = std_map.standardize(train);

  const std::vector<ExprTree> cands = gen.generate(std_train, cfg.n_candidates);
  fitopt::RankResult ranked = fitopt::rank_candidates(cands, std_train);

  DimensionFit out;
  out.tree = compose_with_affine(ranked.all[0].tree, std_map);
  out.report = fitopt::fit_report(out.tree, held);
  for (const auto& rc : ranked.all) {
    out.r2_before.push_back(rc.report_before.r2);
    out.r2_after.push_back(rc.report.r2);
    out.mse_before.push_back(rc.report_before.mse);
    out.mse_after.push_back(rc.report.mse);
    out.nodes.push_back(rc.tree.node_count());
  }
  return out;
}

}  // namespace symdyn::srgen
