#include "soco/algorithms.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <set>

using namespace soco;
using namespace soco::testing;

namespace {

Realization gaussian_world(const ImpulseResponse& f, double sigma2, const Signal& y_hat,
                           std::uint64_t seed) {
  return realize(f, NoiseSpec::gaussian(scalar_matrix(sigma2)), y_hat, seed);
}

Realization exact_world(const Signal& y) {
  return realize_with_innovations(ImpulseResponse::white(y.rows()), y, Signal::Zero(y.rows(), y.cols()));
}

}  // namespace

TEST_CASE("algorithm names") {
  CHECK(algorithm_kind_from_string("afhc") == AlgorithmKind::afhc);
  CHECK(algorithm_kind_from_string("Open") == AlgorithmKind::open);
  CHECK_THROWS_AS(algorithm_kind_from_string("ogd"), std::invalid_argument);
  AlgorithmRun run;
  run.kind = AlgorithmKind::fhc;
  run.k = 2;
  CHECK(run.name() == "FHC(2)");
}

TEST_CASE("window tiling for a short horizon") {
  const auto k0 = fhc_windows(0, 1, 4);
  REQUIRE(k0.size() == 3);
  CHECK(k0[0].first == 1);
  CHECK(k0[0].last == 1);
  CHECK(k0[0].tau == 0);
  CHECK(k0[1].first == 2);
  CHECK(k0[1].last == 3);
  CHECK(k0[2].first == 4);
  CHECK(k0[2].last == 4);

  const auto k1 = fhc_windows(1, 1, 4);
  REQUIRE(k1.size() == 2);
  CHECK(k1[0].tau == 1);
  CHECK(k1[0].last == 2);
  CHECK(k1[1].first == 3);
  CHECK(k1[1].last == 4);

  CHECK_THROWS_AS(fhc_windows(2, 1, 4), std::invalid_argument);
}

TEST_CASE("windows partition the horizon for every offset") {
  for (int T : {1, 2, 7, 30}) {
    for (int w = 0; w <= 8; ++w) {
      for (int k = 0; k <= w; ++k) {
        int next = 1;
        for (const auto& win : fhc_windows(k, w, T)) {
          CHECK(win.first == next);
          CHECK(win.last >= win.first);
          CHECK(win.last - win.first <= w);
          CHECK(win.first == std::max(win.tau, 1));
          next = win.last + 1;
        }
        CHECK(next == T + 1);
      }
    }
  }
}

TEST_CASE("myopic lookahead makes every online policy the same") {
  const auto f = ImpulseResponse::scalar({1.0, 0.6});
  const ProblemSpec spec = scalar_spec(0.8, 20);
  const auto r = gaussian_world(f, 1.0, Signal::Constant(1, 20, 2.0), 3);
  const auto fhc = run_fhc(spec, r, f, 0, 0);
  const auto afhc = run_afhc(spec, r, f, 0);
  const auto rhc = run_rhc(spec, r, f, 0);
  CHECK(afhc.trajectory == fhc.trajectory);
  CHECK((rhc.trajectory - fhc.trajectory).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("full lookahead with exact predictions") {
  std::mt19937_64 gen(5);
  for (int rep = 0; rep < 5; ++rep) {
    const int T = 6;
    const ProblemSpec spec = scalar_spec(0.3 + 0.2 * rep, T);
    const Signal y = random_signal(gen, 1, T, 1.0, 1.0);
    const auto r = exact_world(y);
    const auto f = ImpulseResponse::white(1);
    const double opt = run_opt(spec, r).cost.total();
    CHECK(run_open(spec, r).cost.total() == doctest::Approx(opt).epsilon(1e-8));
    CHECK(run_rhc(spec, r, f, T - 1).cost.total() == doctest::Approx(opt).epsilon(1e-8));
    // the offset whose single window starts at time 1
    CHECK(run_fhc(spec, r, f, 1, T - 1).cost.total() == doctest::Approx(opt).epsilon(1e-8));
    // a window longer than the horizon covers it from the first offset too
    CHECK(run_fhc(spec, r, f, 0, T).cost.total() == doctest::Approx(opt).epsilon(1e-8));
  }
}

TEST_CASE("a window boundary inside the horizon costs something") {
  // windows {1}, {2}: the first step is planned without seeing the second
  const ProblemSpec spec = scalar_spec(0.25, 2);
  const auto r = exact_world(row({1, 1}));
  const auto f = ImpulseResponse::white(1);
  const auto split = run_fhc(spec, r, f, 0, 1);
  CHECK(split.trajectory(0, 0) == doctest::Approx(0.75).epsilon(1e-9));
  CHECK(split.cost.total() == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(run_opt(spec, r).cost.total() == doctest::Approx(0.234375).epsilon(1e-9));
}

TEST_CASE("averaging never costs more than the average FHC") {
  const auto f = ImpulseResponse::scalar({1.0, 0.5, 0.25});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const int w = 1 + static_cast<int>(seed % 4);
    const ProblemSpec spec = scalar_spec(1.0, 40);
    const auto r = gaussian_world(f, 1.0, Signal::Constant(1, 40, 1.0), seed);
    std::vector<AlgorithmRun> runs;
    const auto afhc = run_afhc(spec, r, f, w, {}, &runs);
    REQUIRE(runs.size() == static_cast<std::size_t>(w + 1));
    double mean = 0.0;
    for (const auto& run : runs) mean += run.cost.total();
    mean /= static_cast<double>(runs.size());
    CHECK(afhc.cost.total() <= mean + 1e-9);
  }
}

TEST_CASE("online actions ignore innovations that arrive later") {
  const auto f = ImpulseResponse::scalar({1.0, 0.9, 0.5, 0.2});
  const ProblemSpec spec = scalar_spec(0.6, 24);
  const auto base = gaussian_world(f, 1.0, Signal::Constant(1, 24, 1.0), 8);
  for (int t0 : {1, 5, 12, 23}) {
    Signal e = base.innovations;
    for (int s = t0 + 1; s <= 24; ++s) e(0, s - 1) += 5.0;
    const auto perturbed = realize_with_innovations(f, base.y_hat, e);
    for (int w : {0, 2, 3}) {
      const auto a = run_afhc(spec, base, f, w);
      const auto b = run_afhc(spec, perturbed, f, w);
      CHECK(a.trajectory.leftCols(t0) == b.trajectory.leftCols(t0));
      const auto ra = run_rhc(spec, base, f, w);
      const auto rb = run_rhc(spec, perturbed, f, w);
      CHECK(ra.trajectory.leftCols(t0) == rb.trajectory.leftCols(t0));
    }
  }
}

TEST_CASE("open loop stays put when switching is expensive") {
  const ProblemSpec spec = scalar_spec(50.0, 2);
  const auto r = realize_with_innovations(ImpulseResponse::white(1), row({0, 0}), row({1, 1}));
  const auto open = run_open(spec, r);
  CHECK(open.trajectory.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(open.cost.total() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("open loop gap is bounded by the projected prediction error") {
  Matrix K(2, 1);
  K << 1, 0.5;
  const ProblemSpec spec(K, 0.7, 30);
  const ImpulseResponse f({Matrix::Identity(2, 2), 0.5 * Matrix::Identity(2, 2)});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = realize(f, NoiseSpec::gaussian(Matrix::Identity(2, 2)), Signal::Ones(2, 30), seed);
    const double gap = run_open(spec, r).cost.total() - run_opt(spec, r).cost.total();
    double bound = 0.0;
    for (int t = 0; t < 30; ++t) bound += 0.5 * proj_seminorm_sq(spec.ops(), r.y.col(t) - r.y_hat.col(t));
    CHECK(gap <= bound + 1e-6);
  }
}

TEST_CASE("offline optimum dominates every policy") {
  const auto f = ImpulseResponse::scalar({1.0, 0.7});
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const ProblemSpec spec = scalar_spec(0.5 + 0.25 * static_cast<double>(seed % 3), 30);
    const auto r = gaussian_world(f, 1.0, Signal::Constant(1, 30, 2.0), seed);
    const double opt = run_opt(spec, r).cost.total();
    CHECK(run_sta(spec, r).cost.total() >= opt - 1e-9);
    CHECK(run_open(spec, r).cost.total() >= opt - 1e-9);
    CHECK(run_afhc(spec, r, f, 3).cost.total() >= opt - 1e-9);
    CHECK(run_rhc(spec, r, f, 3).cost.total() >= opt - 1e-9);
  }
}

TEST_CASE("static and dynamic optimum on fixed targets") {
  const ProblemSpec spec = scalar_spec(0.5, 4);
  const auto r = exact_world(row({1, 0, 1, 0}));
  const auto sta = run_sta(spec, r);
  CHECK(sta.cost.total() == doctest::Approx(0.71875).epsilon(1e-12));
  CHECK(sta.trajectory.cwiseAbs().maxCoeff() == doctest::Approx(0.375));
  const auto zero = exact_world(Signal::Zero(1, 4));
  CHECK(run_sta(spec, zero).cost.total() == doctest::Approx(0.0));
  CHECK(run_opt(spec, zero).cost.total() == doctest::Approx(0.0));
}

TEST_CASE("recorded cost matches the trajectory") {
  const auto f = ImpulseResponse::scalar({1.0, 0.4});
  const ProblemSpec spec = scalar_spec(1.0, 15);
  const auto r = gaussian_world(f, 2.0, Signal::Constant(1, 15, 3.0), 2);
  for (const auto& run : {run_afhc(spec, r, f, 2), run_fhc(spec, r, f, 1, 2), run_opt(spec, r)}) {
    const auto c = eval_cost(spec, r.y, run.trajectory);
    CHECK(c.tracking == run.cost.tracking);
    CHECK(c.switching == run.cost.switching);
  }
}

TEST_CASE("policy inputs are validated") {
  const auto f = ImpulseResponse::white(1);
  const ProblemSpec spec = scalar_spec(1.0, 5);
  const auto r = exact_world(row({1, 2, 3}));
  CHECK_THROWS_AS(run_opt(spec, r), DimensionError);
  const auto ok = exact_world(row({1, 2, 3, 4, 5}));
  CHECK_THROWS_AS(run_afhc(spec, ok, f, -1), std::invalid_argument);
  CHECK_THROWS_AS(run_fhc(spec, ok, f, 3, 2), std::invalid_argument);
}
