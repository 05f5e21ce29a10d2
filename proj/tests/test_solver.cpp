#include "soco/solver.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace soco;
using namespace soco::testing;

namespace {

/// Objective values computed independently with a generic convex solver.
struct FrozenInstance {
  Matrix K;
  double beta;
  Signal y;
  double optimum;
};

std::vector<FrozenInstance> frozen_instances() {
  std::vector<FrozenInstance> out;
  {
    Signal y(1, 6);
    y << 2.295812, 1.938642, -0.286041, -1.356517, 0.710619, 3.406917;
    out.push_back({scalar_matrix(1.0), 0.7, y, 5.59212261887084});
  }
  {
    Matrix K(2, 2);
    K << 1, 0.3, 0.2, 1;
    Signal y(2, 5);
    y << 1.333584, 0.908301, 0.346564, 1.600035, 1.23284,
        1.779682, 0.938035, 1.635431, 1.579981, 2.687509;
    out.push_back({K, 0.5, y, 2.048009671569844});
  }
  {
    Matrix K(3, 2);
    K << 1, 0, 1, 1, 0, 2;
    Signal y(3, 4);
    y << -5.697348, -0.574106, 5.013666, -2.760851,
        -2.275391, -0.252782, -4.253463, -0.388839,
        -0.046959, -0.013966, -2.965542, -1.097491;
    out.push_back({K, 1.5, y, 35.96337188222911});
  }
  return out;
}

}  // namespace

TEST_CASE("without switching cost each step is least squares") {
  Matrix K(2, 1);
  K << 1, 1;
  Signal y(2, 3);
  y << 1, 2, 3, 3, 0, 1;
  const auto res = solve_fused(K, 0.0, y, Vector::Zero(1));
  CHECK(res.actions(0, 0) == doctest::Approx(2.0));
  CHECK(res.actions(0, 1) == doctest::Approx(1.0));
  CHECK(res.actions(0, 2) == doctest::Approx(2.0));
}

TEST_CASE("heavy switching cost keeps the start action") {
  const ProblemSpec spec = scalar_spec(10.0, 2);
  const auto res = solve_opt(spec, row({1, 1}));
  CHECK(std::abs(res.actions(0, 0)) < 1e-9);
  CHECK(std::abs(res.actions(0, 1)) < 1e-9);
  CHECK(res.objective == doctest::Approx(1.0).epsilon(1e-12));
  // lambda_1 = 2 (the summed residual), lambda_2 = 1
  CHECK(res.duals(0, 0) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(res.duals(0, 1) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(opt_dual_cost(spec, row({1, 1}), res.duals) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("single step with a cheap switch") {
  const ProblemSpec spec = scalar_spec(0.25, 1);
  const auto res = solve_opt(spec, row({1}));
  CHECK(res.actions(0, 0) == doctest::Approx(0.75).epsilon(1e-10));
  CHECK(res.objective == doctest::Approx(0.21875).epsilon(1e-10));
  CHECK(res.duals(0, 0) == doctest::Approx(0.25).epsilon(1e-8));
  CHECK(res.box_violation <= 1e-12);
}

TEST_CASE("frozen instances match the reference optimum") {
  for (const auto& inst : frozen_instances()) {
    const ProblemSpec spec(inst.K, inst.beta, static_cast<int>(inst.y.cols()));
    const auto res = solve_opt(spec, inst.y);
    CHECK(res.objective == doctest::Approx(inst.optimum).epsilon(1e-7));
    const double evaluated = eval_cost(spec, inst.y, res.actions).total();
    CHECK(evaluated == doctest::Approx(res.objective).epsilon(1e-12));
    const auto kkt = kkt_report(inst.K, inst.beta, inst.y, spec.x0(), res.actions);
    CHECK(kkt.stationarity <= 1e-6 * (1 + inst.y.norm()));
    CHECK(kkt.complementarity <= 1e-6 * (1 + inst.y.norm()));
    CHECK(kkt.box_violation <= 1e-6);
  }
}

TEST_CASE("dual value identity holds at the optimum") {
  std::mt19937_64 gen(23);
  Matrix K(3, 2);
  K << 1, 0.5, -0.3, 1, 0.2, 0.2;
  const ProblemSpec spec(K, 0.8, 30);
  const Signal y = random_signal(gen, 3, 30, 2.0);
  const auto res = solve_opt(spec, y);
  CHECK(opt_dual_cost(spec, y, res.duals) == doctest::Approx(res.objective).epsilon(1e-6));
}

TEST_CASE("constant targets in the range of K") {
  Matrix K(2, 1);
  K << 1, 2;
  const ProblemSpec spec(K, 0.3, 6);
  const Signal y = (K * Vector::Constant(1, 4.0)).replicate(1, 6);
  const auto res = solve_opt(spec, y);
  // one switch of size at most 4; the action settles at a constant
  for (int t = 1; t < 6; ++t) CHECK(res.actions(0, t) == doctest::Approx(res.actions(0, 0)));
  CHECK(res.actions(0, 0) <= 4.0 + 1e-9);
}

TEST_CASE("static optimum") {
  const ProblemSpec spec = scalar_spec(0.5, 4);
  const auto s = static_optimum(spec, row({1, 0, 1, 0}));
  CHECK(s.closed_form);
  CHECK(s.x(0) == doctest::Approx(0.375).epsilon(1e-14));
  CHECK(s.cost == doctest::Approx(0.71875).epsilon(1e-14));
  const auto numeric = static_optimum_numeric(spec, row({1, 0, 1, 0}));
  CHECK(numeric.x(0) == doctest::Approx(0.375).epsilon(1e-9));

  // negative mean: the closed form does not apply and the action is clamped at zero
  const auto neg = static_optimum(spec, row({-1, -1, -1, -1}));
  CHECK_FALSE(neg.closed_form);
  CHECK(neg.x(0) == doctest::Approx(-0.875).epsilon(1e-9));
  const auto tiny = static_optimum(scalar_spec(8.0, 4), row({1, 1, 1, 1}));
  CHECK_FALSE(tiny.closed_form);
  CHECK(std::abs(tiny.x(0)) < 1e-9);
  CHECK(tiny.cost == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("solver agrees with the lattice oracle on small instances") {
  std::mt19937_64 gen(31);
  const double h = 1e-3;
  for (int rep = 0; rep < 20; ++rep) {
    const int T = 2 + rep % 5;
    const double beta = 0.1 + 0.2 * (rep % 7);
    const ProblemSpec spec = scalar_spec(beta, T);
    const Signal y = random_signal(gen, 1, T, 1.5, 0.5);
    const auto res = solve_opt(spec, y);
    const auto oracle = brute_force_oracle(spec, y, h, OracleMode::grid);
    CHECK(oracle.grid);
    CHECK(res.objective <= oracle.objective + 1e-9);
    CHECK(oracle.objective - res.objective <= 2.0 * beta * T * h + T * h * h);
  }
  Matrix K(2, 2);
  K << 1, 0.4, 0, 1;
  for (int rep = 0; rep < 5; ++rep) {
    const ProblemSpec spec(K, 0.4, 3);
    const Signal y = random_signal(gen, 2, 3);
    const auto res = solve_opt(spec, y);
    const auto oracle = brute_force_oracle(spec, y, 0.02, OracleMode::grid);
    CHECK(res.objective <= oracle.objective + 1e-9);
    CHECK(oracle.objective - res.objective <= 2.0 * 0.4 * 6 * 0.02 + 0.02);
  }
}

TEST_CASE("oracle from a nonzero start action") {
  const ProblemSpec spec = scalar_spec(0.6, 3);
  const Vector start = Vector::Constant(1, 1.7);
  const Signal y = row({0.2, 2.5, 1.0});
  const auto res = solve_window(spec, y, start);
  const auto oracle = brute_force_oracle(spec, y, 1e-3, OracleMode::grid, &start);
  CHECK(res.objective <= oracle.objective + 1e-9);
  CHECK(oracle.objective - res.objective <= 1e-2);
}

TEST_CASE("subgradient oracle on a larger instance") {
  std::mt19937_64 gen(37);
  Matrix K(2, 2);
  K << 1, 0.2, 0.1, 1;
  const ProblemSpec spec(K, 0.5, 5);
  const Signal y = random_signal(gen, 2, 5, 1.0, 1.0);
  const auto res = solve_opt(spec, y);
  const auto oracle = brute_force_oracle(spec, y, 0.01);
  CHECK_FALSE(oracle.grid);
  CHECK(res.objective <= oracle.objective + 1e-9);
  CHECK(oracle.objective - res.objective <= 1e-3 * (1 + res.objective));
  CHECK_THROWS_AS(brute_force_oracle(spec, y, 0.01, OracleMode::grid), InstanceTooLargeError);
}

TEST_CASE("repeated solves are bit-identical") {
  std::mt19937_64 gen(41);
  const ProblemSpec spec = scalar_spec(0.9, 40);
  const Signal y = random_signal(gen, 1, 40, 3.0);
  const auto a = solve_opt(spec, y);
  const auto b = solve_opt(spec, y);
  CHECK(a.actions == b.actions);
  CHECK(a.objective == b.objective);
}

TEST_CASE("warm start reaches the same optimum") {
  std::mt19937_64 gen(43);
  const ProblemSpec spec = scalar_spec(0.4, 25);
  const Signal y = random_signal(gen, 1, 25);
  const auto cold = solve_opt(spec, y);
  const Signal guess = Signal::Constant(1, 25, 3.0);
  SolveOptions opts;
  opts.warm_start = &guess;
  const auto warm = solve_opt(spec, y, opts);
  CHECK(warm.objective == doctest::Approx(cold.objective).epsilon(1e-8));
}

TEST_CASE("iteration limit reports the best iterate") {
  std::mt19937_64 gen(47);
  Matrix K(3, 3);
  K << 1, 0.5, 0.1, 0.2, 1, 0.3, 0.1, 0.1, 1;
  const ProblemSpec spec(K, 0.7, 200);
  const Signal y = random_signal(gen, 3, 200, 2.0);
  SolveOptions opts;
  opts.max_iter = 1;
  try {
    solve_opt(spec, y, opts);
    FAIL("expected MaxIterationsError");
  } catch (const MaxIterationsError& e) {
    CHECK(e.best().actions.rows() == 3);
    CHECK(e.best().actions.cols() == 200);
    CHECK(std::isfinite(e.best().objective));
  }
}

TEST_CASE("invalid solver inputs") {
  const ProblemSpec spec = scalar_spec(1.0, 3);
  SolveOptions opts;
  opts.tol = 0.0;
  CHECK_THROWS_AS(solve_window(spec, row({1, 2, 3}), spec.x0(), opts), std::invalid_argument);
  CHECK_THROWS_AS(solve_window(spec, Signal(2, 3), spec.x0()), DimensionError);
  CHECK_THROWS_AS(solve_window(spec, row({1}), Vector::Zero(2)), DimensionError);
  CHECK_THROWS_AS(solve_opt(spec, row({1, 2})), DimensionError);
}
