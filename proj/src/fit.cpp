#include "symdyn/fit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace symdyn::fitopt {

real mse(const VecX& pred, const VecX& target) {
  if (pred.size() != target.size())
    throw std::invalid_argument("mse: length mismatch");
  if (pred.size() < 1) throw std::invalid_argument("mse: empty input");
  return (pred - target).squaredNorm() / static_cast<real>(pred.size());
}

real r2(const VecX& pred, const VecX& target) {
  if (pred.size() != target.size())
    throw std::invalid_argument("r2: length mismatch");
  if (pred.size() < 2) throw std::invalid_argument("r2: need at least 2 rows");
  const real mean = target.mean();
  const real ss_tot = (target.array() - mean).matrix().squaredNorm();
  if (ss_tot <= 0.0)
    throw std::invalid_argument("r2: degenerate target (zero variance)");
  const real ss_res = (pred - target).squaredNorm();
  return 1.0 - ss_res / ss_tot;
}

BfgsResult bfgs_minimize(const Objective& f, const Gradient& g, const VecX& x0,
                         const BfgsOptions& opts) {
  BfgsResult res;
  res.x = x0;
  res.f = f(x0);
  if (!std::isfinite(res.f)) {
    res.f = std::numeric_limits<real>::infinity();
    res.no_progress = true;
    return res;
  }
  const Eigen::Index m = x0.size();
  MatX H = MatX::Identity(m, m);
  VecX grad = g(res.x);
  if (!grad.allFinite()) return res;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    if (grad.norm() < opts.grad_tol) break;
    VecX dir = -(H * grad);
    real slope = grad.dot(dir);
    if (!(slope < 0.0)) {  // not a descent direction; fall back to steepest
      dir = -grad;
      slope = -grad.squaredNorm();
      H.setIdentity();
    }
    // Backtracking Armijo line search.
    real step = 1.0;
    real f_new = std::numeric_limits<real>::infinity();
    VecX x_new;
    bool accepted = false;
    while (step * dir.norm() >= opts.step_tol) {
      x_new = res.x + step * dir;
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new <= res.f + opts.armijo_c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= opts.backtrack;
    }
    if (!accepted) break;

    VecX grad_new = g(x_new);
    if (!grad_new.allFinite()) {
      res.x = x_new;
      res.f = f_new;
      res.iters = iter + 1;
      break;
    }
    const VecX s = x_new - res.x;
    const VecX yv = grad_new - grad;
    const real sy = s.dot(yv);
    if (sy > 1e-12) {
      const real rho = 1.0 / sy;
      const MatX I = MatX::Identity(m, m);
      H = (I - rho * s * yv.transpose()) * H * (I - rho * yv * s.transpose()) +
          rho * s * s.transpose();
    }
    res.x = x_new;
    res.f = f_new;
    grad = grad_new;
    res.iters = iter + 1;
    if (s.norm() < opts.step_tol) break;
  }
  return res;
}

namespace {

struct RowView {
  std::vector<real> buf;
  std::span<const real> operator()(const MatX& X, Eigen::Index r) {
    buf.resize(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index c = 0; c < X.cols(); ++c)
      buf[static_cast<std::size_t>(c)] = X(r, c);
    return buf;
  }
};

}  // namespace

real penalized_objective(const expr::ExprTree& tree, const Dataset& data) {
  RowView row;
  std::vector<real> scratch;
  real sum = 0.0;
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const auto v = expr::evaluate(tree, row(data.X, r), scratch);
    if (v) {
      const real e = *v - data.y(r);
      sum += e * e;
    } else {
      sum += kInvalidRowPenalty;
    }
  }
  return sum / static_cast<real>(data.rows());
}

FitReport fit_report(const expr::ExprTree& tree, const Dataset& data) {
  RowView row;
  std::vector<real> scratch;
  FitReport rep;
  real ss_res = 0.0, sum = 0.0, sum_sq = 0.0;
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const auto v = expr::evaluate(tree, row(data.X, r), scratch);
    if (!v) continue;
    const real t = data.y(r);
    const real e = *v - t;
    ss_res += e * e;
    sum += t;
    sum_sq += t * t;
    ++rep.n_valid;
  }
  if (rep.n_valid == 0) {
    rep.mse = std::numeric_limits<real>::infinity();
    rep.r2 = 0.0;
    return rep;
  }
  const real n = static_cast<real>(rep.n_valid);
  rep.mse = ss_res / n;
  const real ss_tot = sum_sq - sum * sum / n;
  if (ss_tot > 0.0)
    rep.r2 = 1.0 - ss_res / ss_tot;
  else
    rep.r2 = ss_res <= 1e-300 ? 1.0 : 0.0;
  return rep;
}

RefineResult refine_constants(const expr::ExprTree& tree, const Dataset& data,
                              const BfgsOptions& opts) {
  RefineResult out;
  out.tree = tree;
  out.report_before = fit_report(tree, data);
  if (out.report_before.n_valid == 0)
    throw std::runtime_error("refine_constants: no valid rows");

  out.objective_before = penalized_objective(tree, data);
  const int m = tree.constant_count();
  if (m == 0) {
    out.report = out.report_before;
    out.objective = out.objective_before;
    return out;
  }

  // Objective and gradient over the constant slots; invalid rows contribute
  // the fixed penalty and a zero gradient.
  expr::ExprTree work = tree;
  RowView row;
  std::vector<real> scratch;
  const auto objective = [&](const VecX& c) {
    work.set_constants(std::span<const real>(c.data(), static_cast<std::size_t>(c.size())));
    return penalized_objective(work, data);
  };
  const auto gradient = [&](const VecX& c) {
    work.set_constants(std::span<const real>(c.data(), static_cast<std::size_t>(c.size())));
    VecX g = VecX::Zero(m);
    std::vector<real> vals;
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
      const auto x = row(data.X, r);
      const auto v = expr::evaluate(work, x, vals);
      if (!v) continue;
      const auto gr = expr::grad_constants(work, x);
      if (!gr) continue;
      const real e = 2.0 * (*v - data.y(r));
      for (int j = 0; j < m; ++j) g(j) += e * (*gr)[static_cast<std::size_t>(j)];
    }
    return VecX(g / static_cast<real>(data.rows()));
  };

  const auto init = tree.constants();
  VecX c0 = Eigen::Map<const VecX>(init.data(), static_cast<Eigen::Index>(init.size()));
  const BfgsResult bfgs = bfgs_minimize(objective, gradient, c0, opts);

  expr::ExprTree refined = tree;
  refined.set_constants(std::span<const real>(bfgs.x.data(), static_cast<std::size_t>(bfgs.x.size())));
  const real obj_after = penalized_objective(refined, data);
  if (obj_after <= out.objective_before) {
    out.tree = std::move(refined);
    out.objective = obj_after;
  } else {
    out.objective = out.objective_before;
  }
  out.report = fit_report(out.tree, data);
  return out;
}

RankResult rank_candidates(const std::vector<expr::ExprTree>& candidates,
                           const Dataset& data, const BfgsOptions& opts) {
  if (candidates.empty())
    throw std::invalid_argument("rank_candidates: no candidates");

  RankResult out;
  bool any_valid = false;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    RankedCandidate rc;
    rc.source_index = static_cast<int>(i);
    const FitReport probe = fit_report(candidates[i], data);
    if (probe.n_valid == 0) {
      rc.tree = candidates[i];
      rc.report = rc.report_before = probe;
      rc.objective = rc.objective_before = std::numeric_limits<real>::infinity();
    } else {
      RefineResult rr = refine_constants(candidates[i], data, opts);
      rc.tree = std::move(rr.tree);
      rc.report = rr.report;
      rc.report_before = rr.report_before;
      rc.objective = rr.objective;
      rc.objective_before = rr.objective_before;
      any_valid = true;
    }
    out.all.push_back(std::move(rc));
  }
  if (!any_valid)
    throw std::runtime_error("rank_candidates: every candidate invalid on all rows");

  std::stable_sort(out.all.begin(), out.all.end(),
                   [](const RankedCandidate& a, const RankedCandidate& b) {
                     if (a.objective != b.objective)
                       return a.objective < b.objective;
                     if (a.tree.node_count() != b.tree.node_count())
                       return a.tree.node_count() < b.tree.node_count();
                     return a.source_index < b.source_index;
                   });
  out.best = 0;
  return out;
}

}  // namespace symdyn::fitopt
