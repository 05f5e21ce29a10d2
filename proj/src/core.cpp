#include "soco/core.hpp"

#include <cmath>

namespace soco {

namespace {

constexpr double kMaxGramCondition = 1e12;

void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace

Matrix pinv(const Matrix& M, double rel_cutoff) {
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? rel_cutoff * s(0) : 0.0;
  Vector s_inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) s_inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().transpose();
}

ProblemSpec::ProblemSpec(Matrix K, double beta, int horizon)
    : K_(std::move(K)), beta_(beta), horizon_(horizon) {
  require_dims(K_.rows() > 0 && K_.cols() > 0, "K must be nonempty");
  if (!(beta_ >= 0.0) || !std::isfinite(beta_)) {
    throw std::invalid_argument("beta must be finite and nonnegative");
  }
  if (horizon_ < 1) throw std::invalid_argument("horizon must be >= 1");

  ops_.gram = K_.transpose() * K_;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(ops_.gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo <= 0.0 || hi / lo > kMaxGramCondition) {
    throw SingularGramError("K^T K is singular or too ill-conditioned");
  }
  ops_.gram_inv = ops_.gram.llt().solve(Matrix::Identity(n(), n()));
  ops_.k_pinv = pinv(K_);
  ops_.proj_range = K_ * ops_.k_pinv;
  ops_.kt_pinv = pinv(K_.transpose());
}

ProblemSpec ProblemSpec::with_horizon(int horizon) const {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  ProblemSpec copy = *this;
  copy.horizon_ = horizon;
  return copy;
}

ProblemSpec build_spec(const Matrix& K, double beta, int horizon) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
  return ProblemSpec(K, beta, horizon);
}

CostBreakdown eval_window_cost(const Matrix& K, double beta, const Signal& y, const Signal& x,
                               const Vector& x_prev) {
  require_dims(y.rows() == K.rows(), "target dimension does not match K rows");
  require_dims(x.rows() == K.cols(), "action dimension does not match K cols");
  require_dims(y.cols() == x.cols(), "targets and actions differ in length");
  require_dims(x_prev.size() == K.cols(), "x_prev dimension does not match K cols");

  CompensatedSum tracking;
  CompensatedSum switching;
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    const Vector r = y.col(t) - K * x.col(t);
    tracking += 0.5 * r.squaredNorm();
    const auto prev = t == 0 ? x_prev : Vector(x.col(t - 1));
    switching += (x.col(t) - prev).lpNorm<1>();
  }
  return {tracking.value(), beta * switching.value()};
}

CostBreakdown eval_cost(const ProblemSpec& spec, const Signal& y, const Signal& x) {
  require_dims(y.cols() == spec.horizon(), "target length does not match horizon");
  require_dims(x.cols() == spec.horizon(), "trajectory length does not match horizon");
  return eval_window_cost(spec.K(), spec.beta(), y, x, spec.x0());
}

double proj_seminorm_sq(const DerivedOperators& ops, const Vector& v) {
  require_dims(v.size() == ops.proj_range.rows(), "vector dimension does not match m");
  return (ops.proj_range * v).squaredNorm();
}

double induced_norm1(const Matrix& M) {
  return M.cwiseAbs().colwise().sum().maxCoeff();
}

}  // namespace soco
