#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "symdyn/fit.hpp"
#include "symdyn/srgen.hpp"

using namespace symdyn;
using expr::ExprTree;
using fitopt::Dataset;

namespace {

VecX vec(std::initializer_list<real> v) {
  VecX out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (real x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("mse") {
  CHECK(fitopt::mse(vec({1, 2}), vec({1, 2})) == 0.0);
  CHECK(fitopt::mse(vec({0, 0}), vec({1, 1})) == 1.0);
  CHECK(fitopt::mse(vec({0, 2}), vec({0, 0})) == 2.0);
  CHECK_THROWS_AS(fitopt::mse(vec({1}), vec({1, 2})), std::invalid_argument);
  CHECK_THROWS_AS(fitopt::mse(VecX(), VecX()), std::invalid_argument);
}

TEST_CASE("r2") {
  CHECK(fitopt::r2(vec({3, 1, 4}), vec({3, 1, 4})) == 1.0);
  const VecX target = vec({0, 1, 2});
  CHECK(fitopt::r2(VecX::Constant(3, 1.0), target) == doctest::Approx(0.0));
  CHECK(fitopt::r2(vec({0, 1, 1}), target) == doctest::Approx(0.5));
  CHECK_THROWS_AS(fitopt::r2(vec({1, 1}), vec({2, 2})), std::invalid_argument);
  CHECK_THROWS_AS(fitopt::r2(vec({1}), vec({2})), std::invalid_argument);
}

TEST_CASE("bfgs on a 1-d quadratic") {
  const auto f = [](const VecX& x) { return (x(0) - 3.0) * (x(0) - 3.0); };
  const auto g = [](const VecX& x) {
    return VecX(VecX::Constant(1, 2.0 * (x(0) - 3.0)));
  };
  const auto res = fitopt::bfgs_minimize(f, g, VecX::Zero(1));
  CHECK(std::fabs(res.x(0) - 3.0) < 1e-6);
  CHECK(res.f <= f(VecX::Zero(1)));
}

TEST_CASE("bfgs solves rosenbrock from the classic start") {
  const auto f = [](const VecX& x) {
    const real a = 1.0 - x(0), b = x(1) - x(0) * x(0);
    return a * a + 100.0 * b * b;
  };
  const auto g = [](const VecX& x) {
    VecX out(2);
    const real b = x(1) - x(0) * x(0);
    out(0) = -2.0 * (1.0 - x(0)) - 400.0 * x(0) * b;
    out(1) = 200.0 * b;
    return out;
  };
  const auto res = fitopt::bfgs_minimize(f, g, vec({-1.2, 1.0}));
  CHECK(std::fabs(res.x(0) - 1.0) < 1e-4);
  CHECK(std::fabs(res.x(1) - 1.0) < 1e-4);
}

TEST_CASE("bfgs edge behavior") {
  const auto constant = [](const VecX&) { return 5.0; };
  const auto zero_grad = [](const VecX& x) { return VecX(VecX::Zero(x.size())); };
  const auto res = fitopt::bfgs_minimize(constant, zero_grad, vec({1, 2}));
  CHECK(res.iters == 0);
  CHECK(res.x == vec({1, 2}));

  const auto nan_f = [](const VecX&) { return std::nan(""); };
  const auto r2 = fitopt::bfgs_minimize(nan_f, zero_grad, vec({7}));
  CHECK(r2.no_progress);
  CHECK(r2.x(0) == 7.0);
}

TEST_CASE("bfgs is monotone on random quadratics") {
  Rng rng = make_rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 1 + uniform_int(rng, 0, 4);
    MatX A = MatX::Zero(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) A(i, j) = normal(rng);
    const MatX Q = A.transpose() * A + 0.1 * MatX::Identity(m, m);
    VecX b(m), x0(m);
    for (int i = 0; i < m; ++i) {
      b(i) = normal(rng);
      x0(i) = normal(rng, 0.0, 3.0);
    }
    const auto f = [&](const VecX& x) { return 0.5 * x.dot(Q * x) - b.dot(x); };
    const auto g = [&](const VecX& x) { return VecX(Q * x - b); };
    const auto res = fitopt::bfgs_minimize(f, g, x0);
    CHECK(res.f <= f(x0));
    CHECK(g(res.x).norm() < 1e-5);
  }
}

TEST_CASE("refine_constants recovers the amplitude of a sine") {
  Rng rng = make_rng(11);
  Dataset data;
  data.X.resize(50, 1);
  data.y.resize(50);
  for (int i = 0; i < 50; ++i) {
    const real x = uniform(rng, -3.0, 3.0);
    data.X(i, 0) = x;
    data.y(i) = 2.0 * std::sin(x);
  }
  const ExprTree t = expr::parse("(1 * sin(x0))", 1);
  const auto res = fitopt::refine_constants(t, data);
  CHECK(res.tree.constants()[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(res.report.mse < 1e-10);
  CHECK(res.objective <= res.objective_before);
}

TEST_CASE("refine_constants leaves constant-free trees unchanged") {
  Dataset data;
  data.X.resize(25, 1);
  data.y.resize(25);
  for (int i = 0; i < 25; ++i) {
    data.X(i, 0) = i * 0.1;
    data.y(i) = i * 0.1;
  }
  const ExprTree t = expr::parse("sin(x0)", 1);
  const auto res = fitopt::refine_constants(t, data);
  CHECK(res.tree.node_count() == t.node_count());
  CHECK(res.report.n_valid == 25);
  CHECK(res.objective == res.objective_before);
}

TEST_CASE("refine_constants fails when every row is invalid") {
  Dataset data;
  data.X.resize(5, 1);
  data.X << -1, -2, -3, -4, -5;
  data.y = VecX::Zero(5);
  const ExprTree t = expr::parse("sqrt(x0)", 1);
  CHECK_THROWS_AS(fitopt::refine_constants(t, data), std::runtime_error);
}

TEST_CASE("refinement strictly raises r2 on the two-variable demo target") {
  Rng rng = make_rng(13);
  Dataset data;
  data.X.resize(100, 2);
  data.y.resize(100);
  for (int i = 0; i < 100; ++i) {
    data.X(i, 0) = uniform(rng, -2.0, 2.0);
    data.X(i, 1) = uniform(rng, -2.0, 2.0);
    data.y(i) = 2.0 * M_PI * data.X(i, 0) + data.X(i, 1) * data.X(i, 1);
  }
  const ExprTree cand = expr::parse("((1 * x0) + (0.5 * (x1 * x1)))", 2);
  const auto res = fitopt::refine_constants(cand, data);
  CHECK(res.report.r2 > res.report_before.r2);
  CHECK(res.report.r2 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(res.tree.constants()[0] == doctest::Approx(2.0 * M_PI).epsilon(1e-6));
}

TEST_CASE("refinement never increases the training objective (random trees)") {
  srgen::GeneratorConfig cfg;
  Rng rng = make_rng(19);
  int done = 0;
  for (int trial = 0; trial < 200 && done < 60; ++trial) {
    Dataset data;
    data.X.resize(30, 2);
    data.y.resize(30);
    for (int i = 0; i < 30; ++i) {
      data.X(i, 0) = uniform(rng, -2.0, 2.0);
      data.X(i, 1) = uniform(rng, -2.0, 2.0);
      data.y(i) = std::sin(data.X(i, 0)) + 0.3 * data.X(i, 1);
    }
    const ExprTree t = srgen::sample_random_expr(cfg, 2, rng, 4);
    try {
      const auto res = fitopt::refine_constants(t, data);
      CHECK(res.objective <= res.objective_before + 1e-12);
      ++done;
    } catch (const std::runtime_error&) {
      // every row invalid for this tree; acceptable draw
    }
  }
  CHECK(done >= 60);
}

TEST_CASE("rank_candidates picks the argmin and breaks ties by node count") {
  Dataset data;
  data.X.resize(21, 1);
  data.y.resize(21);
  for (int i = 0; i < 21; ++i) {
    data.X(i, 0) = 1.0 + 0.1 * i;
    data.y(i) = 0.0;
  }
  // Constant-free candidates with distinct fixed errors.
  const std::vector<ExprTree> cands = {expr::parse("pow(x0, 2)", 1),
                                       expr::parse("x0", 1),
                                       expr::parse("pow(x0, 3)", 1)};
  const auto ranked = fitopt::rank_candidates(cands, data);
  CHECK(ranked.all[0].source_index == 1);
  CHECK(ranked.all[0].objective ==
        doctest::Approx(data.X.col(0).squaredNorm() / 21.0));

  // exact tie: both reduce to zero error; fewer nodes wins
  Dataset lin;
  lin.X.resize(20, 1);
  lin.y.resize(20);
  for (int i = 0; i < 20; ++i) {
    lin.X(i, 0) = i * 0.25 - 2.0;
    lin.y(i) = lin.X(i, 0);
  }
  const std::vector<ExprTree> tie = {expr::parse("((x0 + 0) + 0)", 1),
                                     expr::parse("x0", 1)};
  const auto tied = fitopt::rank_candidates(tie, lin);
  CHECK(tied.all[0].tree.node_count() == 1);

  const std::vector<ExprTree> single = {expr::parse("sin(x0)", 1)};
  CHECK(fitopt::rank_candidates(single, lin).all.size() == 1);

  Dataset neg;
  neg.X.resize(20, 1);
  neg.y.resize(20);
  for (int i = 0; i < 20; ++i) {
    neg.X(i, 0) = -1.0 - 0.1 * i;
    neg.y(i) = 1.0;
  }
  const std::vector<ExprTree> all_bad = {expr::parse("sqrt(x0)", 1),
                                         expr::parse("log(x0)", 1)};
  CHECK_THROWS_AS(fitopt::rank_candidates(all_bad, neg), std::runtime_error);
  CHECK_THROWS_AS(fitopt::rank_candidates({}, neg), std::invalid_argument);
}

TEST_CASE("rank_candidates output error equals the minimum over candidates") {
  Rng rng = make_rng(29);
  Dataset data;
  data.X.resize(40, 1);
  data.y.resize(40);
  for (int i = 0; i < 40; ++i) {
    data.X(i, 0) = uniform(rng, -2.0, 2.0);
    data.y(i) = std::cos(data.X(i, 0));
  }
  srgen::GeneratorConfig cfg;
  std::vector<ExprTree> cands;
  for (int i = 0; i < 6; ++i)
    cands.push_back(srgen::sample_random_expr(cfg, 1, rng, 4));
  try {
    const auto ranked = fitopt::rank_candidates(cands, data);
    for (const auto& rc : ranked.all)
      CHECK(ranked.all[0].objective <= rc.objective + 1e-15);
  } catch (const std::runtime_error&) {
  }
}
