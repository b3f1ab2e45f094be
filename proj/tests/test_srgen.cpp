#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "symdyn/fit.hpp"
#include "symdyn/srgen.hpp"

using namespace symdyn;
using expr::ExprTree;
using fitopt::Dataset;

namespace {

Dataset demo_dataset(std::uint64_t seed, int n = 100) {
  Rng rng = make_rng(seed);
  Dataset data;
  data.X.resize(n, 2);
  data.y.resize(n);
  for (int i = 0; i < n; ++i) {
    data.X(i, 0) = uniform(rng, -2.0, 2.0);
    data.X(i, 1) = uniform(rng, -2.0, 2.0);
    data.y(i) = 2.0 * M_PI * data.X(i, 0) + data.X(i, 1) * data.X(i, 1);
  }
  return data;
}

}  // namespace

TEST_CASE("standardizer maps bounds to [-1,1] and inverts exactly") {
  Dataset data;
  data.X.resize(3, 1);
  data.X << -3.0, 1.0, 5.0;
  data.y.resize(3);
  data.y << 10.0, 10.0, 10.0;  // constant target
  const auto s = srgen::Standardizer::fit(data);
  CHECK(s.standardize_input(0, 5.0) == 1.0);
  CHECK(s.standardize_input(0, 1.0) == doctest::Approx(0.0));
  CHECK(s.standardize_input(0, -3.0) == -1.0);
  CHECK(s.standardize_target(123.0) == 0.0);  // degenerate dimension
  CHECK(s.destandardize_target(0.7) == 10.0);

  Rng rng = make_rng(3);
  Dataset r;
  r.X.resize(50, 3);
  r.y.resize(50);
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 3; ++j) r.X(i, j) = normal(rng, 1.0, 4.0);
    r.y(i) = normal(rng, -2.0, 7.0);
  }
  const auto sr = srgen::Standardizer::fit(r);
  const Dataset std_r = sr.standardize(r);
  CHECK(std_r.X.minCoeff() >= -1.0 - 1e-12);
  CHECK(std_r.X.maxCoeff() <= 1.0 + 1e-12);
  for (int i = 0; i < 50; ++i)
    CHECK(sr.destandardize_target(std_r.y(i)) ==
          doctest::Approx(r.y(i)).epsilon(1e-12));
}

TEST_CASE("sample_random_expr respects budget, dimension and seed") {
  srgen::GeneratorConfig cfg;
  cfg.max_nodes = 1;
  Rng rng = make_rng(7);
  for (int i = 0; i < 100; ++i)
    CHECK(srgen::sample_random_expr(cfg, 3, rng).node_count() == 1);

  srgen::GeneratorConfig full;
  Rng rng2 = make_rng(11);
  for (int i = 0; i < 1000; ++i) {
    const ExprTree t = srgen::sample_random_expr(full, 4, rng2);
    CHECK(expr::validate(t, 4).empty());
  }

  Rng a = make_rng(99), b = make_rng(99);
  for (int i = 0; i < 50; ++i)
    CHECK(expr::to_string(srgen::sample_random_expr(full, 2, a)) ==
          expr::to_string(srgen::sample_random_expr(full, 2, b)));
}

TEST_CASE("subsample is a uniform subset of the right size") {
  Dataset data = demo_dataset(1, 100);
  Rng rng = make_rng(5);
  const Dataset sub = srgen::subsample(data, 40, rng);
  CHECK(sub.rows() == 40);
  Rng rng2 = make_rng(5);
  const Dataset all = srgen::subsample(data, 200, rng2);
  CHECK(all.rows() == 100);
}

TEST_CASE("gp_search recovers a linear target to machine precision") {
  Rng rng = make_rng(41);
  Dataset data;
  data.X.resize(100, 2);
  data.y.resize(100);
  for (int i = 0; i < 100; ++i) {
    data.X(i, 0) = uniform(rng, -1.0, 1.0);
    data.X(i, 1) = uniform(rng, -1.0, 1.0);
    data.y(i) = data.X(i, 0);
  }
  srgen::GeneratorConfig cfg;
  cfg.population = 120;
  cfg.generations = 10;
  cfg.seed = 2;
  const auto cands = srgen::gp_search(data, cfg);
  REQUIRE(cands.size() == 7);
  const auto rep = fitopt::fit_report(cands[0], data);
  CHECK(rep.mse < 1e-6);
}

TEST_CASE("gp candidates validate and clear the 90%-valid bar") {
  Dataset data = demo_dataset(6);
  srgen::GeneratorConfig cfg;
  cfg.population = 100;
  cfg.generations = 6;
  cfg.seed = 3;
  srgen::GpGenerator gen(cfg);
  const auto cands = gen.generate(data, 7);
  for (const auto& c : cands) {
    CHECK(expr::validate(c, 2, cfg.max_nodes).empty());
    const auto rep = fitopt::fit_report(c, data);
    CHECK(rep.n_valid >= static_cast<long>(0.9 * static_cast<real>(data.rows())));
  }
}

TEST_CASE("gp best fitness is non-increasing across generations") {
  Dataset data = demo_dataset(8);
  srgen::GeneratorConfig cfg;
  cfg.population = 80;
  cfg.generations = 12;
  cfg.seed = 4;
  srgen::GpGenerator gen(cfg);
  gen.generate(data, 3);
  const auto& hist = gen.best_fitness_history();
  REQUIRE(!hist.empty());
  CHECK(hist.size() <= 12);  // may stop early on an exact fit
  for (std::size_t i = 1; i < hist.size(); ++i)
    CHECK(hist[i] <= hist[i - 1] + 1e-15);
}

TEST_CASE("gp_search is deterministic under a fixed seed") {
  Dataset data = demo_dataset(10);
  srgen::GeneratorConfig cfg;
  cfg.population = 60;
  cfg.generations = 5;
  cfg.seed = 12345;
  const auto a = srgen::gp_search(data, cfg);
  const auto b = srgen::gp_search(data, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(expr::to_string(a[i]) == expr::to_string(b[i]));
}

TEST_CASE("fit_dimension reaches r2 >= 0.99 on the demo target") {
  Dataset data = demo_dataset(20);
  srgen::GeneratorConfig cfg;
  cfg.seed = 0;
  srgen::GpGenerator gen(cfg);
  const auto fit = srgen::fit_dimension(data, gen, cfg);
  CHECK(fit.report.r2 >= 0.99);
  CHECK(fit.report.n_valid == 20);  // 20% of 100 held out
}

TEST_CASE("fit_dimension composes the affine maps into the returned tree") {
  Dataset data = demo_dataset(21);
  srgen::GeneratorConfig cfg;
  cfg.population = 80;
  cfg.generations = 6;
  cfg.seed = 9;
  srgen::GpGenerator gen(cfg);
  const auto fit = srgen::fit_dimension(data, gen, cfg);

  // The returned tree consumes original units directly.
  std::vector<real> x(2);
  int finite = 0;
  for (int i = 0; i < data.rows(); ++i) {
    x[0] = data.X(i, 0);
    x[1] = data.X(i, 1);
    const auto v = expr::evaluate(fit.tree, x);
    if (v) {
      CHECK(std::isfinite(*v));
      ++finite;
    }
  }
  CHECK(finite >= 90);
  CHECK(fit.r2_before.size() == fit.r2_after.size());
  REQUIRE(!fit.r2_after.empty());
}

TEST_CASE("fit_dimension rejects tiny datasets") {
  Dataset data = demo_dataset(22, 10);
  srgen::GeneratorConfig cfg;
  srgen::GpGenerator gen(cfg);
  CHECK_THROWS_AS(srgen::fit_dimension(data, gen, cfg), std::invalid_argument);
}

TEST_CASE("fit_dimension is deterministic end to end") {
  Dataset data = demo_dataset(23);
  srgen::GeneratorConfig cfg;
  cfg.population = 60;
  cfg.generations = 5;
  cfg.seed = 77;
  srgen::GpGenerator g1(cfg), g2(cfg);
  const auto f1 = srgen::fit_dimension(data, g1, cfg);
  const auto f2 = srgen::fit_dimension(data, g2, cfg);
  CHECK(expr::to_string(f1.tree) == expr::to_string(f2.tree));
  CHECK(f1.report.mse == f2.report.mse);
}

TEST_CASE("fit_dimension learns the pendulum angle update from samples") {
  Rng rng = make_rng(31);
  const ExprTree truth = expr::parse(
      "(x0 + (clip((x1 + (((15.0 * sin(x0)) + (3.0 * clip(x2, 2.0))) * 0.05)), "
      "8.0) * 0.05))", 3);
  Dataset data;
  data.X.resize(500, 3);
  data.y.resize(500);
  std::vector<real> x(3);
  for (int i = 0; i < 500; ++i) {
    x[0] = uniform(rng, -M_PI, M_PI);
    x[1] = uniform(rng, -8.0, 8.0);
    x[2] = uniform(rng, -2.0, 2.0);
    data.X(i, 0) = x[0];
    data.X(i, 1) = x[1];
    data.X(i, 2) = x[2];
    data.y(i) = *expr::evaluate(truth, x);
  }
  srgen::GeneratorConfig cfg;
  cfg.seed = 1;
  srgen::GpGenerator gen(cfg);
  const auto fit = srgen::fit_dimension(data, gen, cfg);
  CHECK(fit.report.mse <= 1e-3);
}
