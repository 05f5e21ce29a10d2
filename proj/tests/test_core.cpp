#include "soco/core.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace soco;
using namespace soco::testing;

TEST_CASE("scalar identity map has trivial derived operators") {
  const ProblemSpec spec = build_spec(scalar_matrix(1.0), 1.0, 4);
  CHECK(spec.ops().k_pinv(0, 0) == doctest::Approx(1.0));
  CHECK(spec.ops().proj_range(0, 0) == doctest::Approx(1.0));
  CHECK(spec.ops().gram_inv(0, 0) == doctest::Approx(1.0));
  CHECK(spec.x0().size() == 1);
  CHECK(spec.x0()(0) == 0.0);
}

TEST_CASE("tall column map: pseudoinverse and range projector") {
  Matrix K(2, 1);
  K << 1, 1;
  const ProblemSpec spec = build_spec(K, 0.5, 2);
  const auto& ops = spec.ops();
  CHECK(ops.k_pinv(0, 0) == doctest::Approx(0.5));
  CHECK(ops.k_pinv(0, 1) == doctest::Approx(0.5));
  CHECK((ops.proj_range - Matrix::Constant(2, 2, 0.5)).norm() < 1e-14);
  // explicit normal-equations formula agrees with the SVD route
  const Matrix normal = (K.transpose() * K).inverse() * K.transpose();
  CHECK((normal - ops.k_pinv).norm() < 1e-14);
}

TEST_CASE("derived operators satisfy the pseudoinverse identities") {
  std::mt19937_64 gen(11);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix K = random_signal(gen, 3, 2);
    const ProblemSpec spec(K, 1.0, 3);
    const auto& o = spec.ops();
    const Matrix& P = o.proj_range;
    CHECK((P * P - P).norm() <= 1e-10 * P.norm());
    CHECK((P - P.transpose()).norm() <= 1e-10 * P.norm());
    CHECK((o.k_pinv * K * o.k_pinv - o.k_pinv).norm() <= 1e-10 * o.k_pinv.norm());
    CHECK((K * o.k_pinv * K - K).norm() <= 1e-10 * K.norm());
    CHECK((o.gram * o.gram_inv - Matrix::Identity(2, 2)).norm() < 1e-10);
    CHECK((o.kt_pinv - o.k_pinv.transpose()).norm() < 1e-10);
  }
}

TEST_CASE("rank-deficient or empty maps are rejected") {
  Matrix wide(1, 2);
  wide << 1, 1;
  CHECK_THROWS_AS(build_spec(wide, 1.0, 2), SingularGramError);
  CHECK_THROWS_AS(build_spec(Matrix(0, 0), 1.0, 2), DimensionError);
  CHECK_THROWS_AS(build_spec(scalar_matrix(1.0), 0.0, 2), std::invalid_argument);
  CHECK_THROWS_AS(build_spec(scalar_matrix(1.0), 1.0, 0), std::invalid_argument);
  Matrix ill(2, 2);
  ill << 1, 0, 0, 1e-7;
  CHECK_THROWS_AS(build_spec(ill, 1.0, 2), SingularGramError);
}

TEST_CASE("eval_cost splits tracking and switching") {
  const ProblemSpec spec = scalar_spec(3.0, 2);
  auto c = eval_cost(spec, row({1, 0}), row({0, 0}));
  CHECK(c.tracking == doctest::Approx(0.5));
  CHECK(c.switching == 0.0);

  const ProblemSpec heavy = scalar_spec(10.0, 2);
  c = eval_cost(heavy, row({1, 1}), row({1, 1}));
  CHECK(c.tracking == 0.0);
  CHECK(c.switching == doctest::Approx(10.0));
  CHECK(c.total() == c.tracking + c.switching);

  const ProblemSpec four = scalar_spec(0.5, 4);
  c = eval_cost(four, row({1, 0, 1, 0}), row({0.375, 0.375, 0.375, 0.375}));
  CHECK(c.total() == doctest::Approx(0.71875).epsilon(1e-15));
}

TEST_CASE("eval_cost checks shapes") {
  const ProblemSpec spec = scalar_spec(1.0, 3);
  CHECK_THROWS_AS(eval_cost(spec, row({1, 2}), row({1, 2})), DimensionError);
  CHECK_THROWS_AS(eval_cost(spec, row({1, 2, 3}), Signal::Zero(2, 3)), DimensionError);
}

TEST_CASE("zero actions never pay switching") {
  std::mt19937_64 gen(3);
  Matrix K(2, 2);
  K << 2, 1, 0, 1;
  const ProblemSpec spec(K, 0.7, 9);
  const Signal y = random_signal(gen, 2, 9);
  CHECK(eval_cost(spec, y, Signal::Zero(2, 9)).switching == 0.0);
}

TEST_CASE("tracking sum does not depend on time order") {
  std::mt19937_64 gen(5);
  const int T = 2000;
  const ProblemSpec spec = scalar_spec(0.0, T);
  Signal y = random_signal(gen, 1, T, 1e3);
  for (int t = 0; t < T; t += 3) y(0, t) *= 1e-6;
  const Signal x = Signal::Zero(1, T);
  std::vector<Eigen::Index> perm(T);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen);
  Signal yp(1, T);
  for (int t = 0; t < T; ++t) yp(0, t) = y(0, perm[static_cast<std::size_t>(t)]);
  const double a = eval_cost(spec, y, x).tracking;
  const double b = eval_cost(spec, yp, x).tracking;
  CHECK(std::abs(a - b) <= 1e-12 * std::abs(a));
}

TEST_CASE("compensated sum recovers cancelled mass") {
  CompensatedSum s;
  s += 1e16;
  s += 1.0;
  s += -1e16;
  CHECK(s.value() == 1.0);
}

TEST_CASE("projected seminorm") {
  const ProblemSpec scalar = scalar_spec(1.0, 1);
  CHECK(proj_seminorm_sq(scalar.ops(), Vector::Constant(1, 3.0)) == doctest::Approx(9.0));

  Matrix K(2, 1);
  K << 1, 1;
  const ProblemSpec tall(K, 1.0, 1);
  Vector v(2);
  v << 1, -1;
  CHECK(std::abs(proj_seminorm_sq(tall.ops(), v)) < 1e-15);
  CHECK(proj_seminorm_sq(tall.ops(), Vector::Zero(2)) == 0.0);
  CHECK_THROWS_AS(proj_seminorm_sq(tall.ops(), Vector::Zero(3)), DimensionError);
}

TEST_CASE("projection never increases the norm and is exact on the range") {
  std::mt19937_64 gen(17);
  const Matrix K = random_signal(gen, 4, 2);
  const ProblemSpec spec(K, 1.0, 1);
  for (int rep = 0; rep < 100; ++rep) {
    const Vector v = random_signal(gen, 4, 1);
    CHECK(proj_seminorm_sq(spec.ops(), v) <= v.squaredNorm() * (1 + 1e-12));
    const Vector in_range = K * random_signal(gen, 2, 1);
    CHECK(proj_seminorm_sq(spec.ops(), in_range) ==
          doctest::Approx(in_range.squaredNorm()).epsilon(1e-10));
  }
}

TEST_CASE("induced one-norm is the largest absolute column sum") {
  Matrix M(2, 3);
  M << 1, -4, 0.5, -2, 1, 0.5;
  CHECK(induced_norm1(M) == doctest::Approx(5.0));
}
