#pragma once

#include <functional>
#include <string>
#include <vector>

#include "symdyn/expr.hpp"
#include "symdyn/types.hpp"

namespace symdyn::fitopt {

struct Dataset {
  MatX X;   // n x d inputs
  VecX y;   // n targets

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }
};

struct FitReport {
  real mse = 0.0;       // over valid rows only
  real r2 = 0.0;        // over valid rows only
  long n_valid = 0;
};

real mse(const VecX& pred, const VecX& target);
real r2(const VecX& pred, const VecX& target);

// Penalty charged for a row where the expression cannot be evaluated. Keeping
// invalid rows in the objective at a fixed large cost pushes the optimizer
// back into the valid region instead of letting the row set drift mid-run.
constexpr real kInvalidRowPenalty = 1e6;

struct BfgsOptions {
  int max_iters = 100;
  real grad_tol = 1e-8;
  real step_tol = 1e-12;
  real armijo_c1 = 1e-4;
  real backtrack = 0.5;
};

struct BfgsResult {
  VecX x;
  real f = 0.0;
  int iters = 0;
  bool no_progress = false;  // objective was non-finite at x0
};

using Objective = std::function<real(const VecX&)>;
using Gradient = std::function<VecX(const VecX&)>;

// Quasi-Newton minimization with the inverse-Hessian update and a
// backtracking Armijo line search. Monotone: the returned objective value
// never exceeds f(x0).
BfgsResult bfgs_minimize(const Objective& f, const Gradient& g, const VecX& x0,
                         const BfgsOptions& opts = {});

// Objective over a dataset with invalid rows charged kInvalidRowPenalty.
real penalized_objective(const expr::ExprTree& tree, const Dataset& data);

// Per-row predictions and the valid-row FitReport for `tree` on `data`.
FitReport fit_report(const expr::ExprTree& tree, const Dataset& data);

struct RefineResult {
  expr::ExprTree tree;
  FitReport report;
  FitReport report_before;
  real objective = 0.0;       // penalized objective of the returned tree
  real objective_before = 0.0;
};

// BFGS over the tree's constant slots against mean squared error. The refined
// constants are kept only if they do not increase the (penalized) training
// objective; otherwise the original tree is returned. Throws when every row
// evaluates invalid.
RefineResult refine_constants(const expr::ExprTree& tree, const Dataset& data,
                              const BfgsOptions& opts = {});

struct RankedCandidate {
  expr::ExprTree tree;        // refined
  FitReport report;
  FitReport report_before;
  real objective = 0.0;
  real objective_before = 0.0;
  int source_index = 0;       // position in the input list
};

struct RankResult {
  int best = 0;               // index into `all` (already sorted; 0)
  std::vector<RankedCandidate> all;  // ascending by objective
};

// Refines every candidate, then sorts ascending by training error; ties break
// toward fewer nodes, then earlier list position. Throws when no candidate
// has any valid row.
RankResult rank_candidates(const std::vector<expr::ExprTree>& candidates,
                           const Dataset& data, const BfgsOptions& opts = {});

}  // namespace symdyn::fitopt
