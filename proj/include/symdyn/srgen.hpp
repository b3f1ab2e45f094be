#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "symdyn/expr.hpp"
#include "symdyn/fit.hpp"
#include "symdyn/types.hpp"

namespace symdyn::srgen {

// Per-dimension affine map onto [-1, 1]: lo -> -1, hi -> +1, with a
// degenerate dimension (hi == lo) pinned to 0. The last entry maps the target.
class Standardizer {
 public:
  Standardizer() = default;
  static Standardizer fit(const fitopt::Dataset& data);

  fitopt::Dataset standardize(const fitopt::Dataset& data) const;
  real standardize_input(int dim, real v) const;
  real destandardize_target(real v) const;
  real standardize_target(real v) const;

  int input_dims() const { return static_cast<int>(in_.size()); }
  // Coefficients of the forward map a*v + b for input dimension `dim`.
  std::pair<real, real> input_map(int dim) const;
  // Coefficients of the inverse map m*v + q for the target.
  std::pair<real, real> target_inverse_map() const;

 private:
  struct Range { real lo = 0.0, hi = 0.0; };
  std::vector<Range> in_;
  Range out_;
  static real fwd(const Range& r, real v);
};

struct GeneratorConfig {
  int max_nodes = expr::kDefaultMaxNodes;
  int n_candidates = 7;
  int population = 500;
  int generations = 40;
  int tournament_size = 5;
  real p_crossover = 0.7;
  real p_mutate = 0.25;
  // How many of the best distinct structures get a short constant polish per
  // generation (0 turns the memetic step off and leaves raw evolved
  // constants for downstream refinement to improve).
  int polish_top = 5;
  std::uint64_t seed = 0;
  // Sampling weight per operator, indexed by expr::Op.
  std::array<real, 18> op_weights = default_op_weights();

  static std::array<real, 18> default_op_weights();
  std::string validate() const;  // empty when consistent
};

// Weighted random expression over d inputs; operator probability decays with
// depth so trees stay inside the node budget. Constants are N(0,1) draws,
// integer exponents come from {-2,-1,2,3} and clip bounds from {1,2,4,8}.
expr::ExprTree sample_random_expr(const GeneratorConfig& cfg, int input_dim,
                                  Rng& rng, int depth_limit = 6);

// Candidate source for the fit pipeline. Implementations must return trees
// that validate for the dataset dimension and evaluate to a valid value on at
// least 90% of the dataset rows (regenerating internally as needed).
class ExpressionGenerator {
 public:
  virtual ~ExpressionGenerator() = default;
  virtual std::vector<expr::ExprTree> generate(const fitopt::Dataset& data,
                                               int n) = 0;
};

// Tournament-selected genetic programming over the token vocabulary: subtree
// crossover, point/subtree/wrap mutations, elitism of one, and an archive of
// the best distinct structures seen. Individuals invalid on more than 10% of
// rows are discarded and regenerated.
class GpGenerator final : public ExpressionGenerator {
 public:
  explicit GpGenerator(GeneratorConfig cfg) : cfg_(std::move(cfg)) {}
  std::vector<expr::ExprTree> generate(const fitopt::Dataset& data,
                                       int n) override;
  // Best penalized-MSE fitness after each generation (for monotonicity checks).
  const std::vector<real>& best_fitness_history() const { return history_; }

 private:
  GeneratorConfig cfg_;
  std::vector<real> history_;
};

std::vector<expr::ExprTree> gp_search(const fitopt::Dataset& data,
                                      const GeneratorConfig& cfg);

struct DimensionFit {
  expr::ExprTree tree;         // consumes and produces original-unit values
  fitopt::FitReport report;    // on the held-out split, original units
  // Held-in quality of every candidate before and after refinement,
  // in ranked order (tree index 0 is the winner).
  std::vector<real> r2_before, r2_after;
  std::vector<real> mse_before, mse_after;
  std::vector<int> nodes;
};

// The per-coordinate pipeline: split 80/20, standardize to [-1,1] on the
// training split, generate candidates, refine + rank them, and fold the
// affine maps into the winning tree so callers never handle scaling.
// Requires at least 20 rows.
DimensionFit fit_dimension(const fitopt::Dataset& data,
                           ExpressionGenerator& gen,
                           const GeneratorConfig& cfg);

// Uniform row subsample without replacement (all rows when n >= rows).
fitopt::Dataset subsample(const fitopt::Dataset& data, Eigen::Index n, Rng& rng);

}  // namespace symdyn::srgen
