#pragma once

/// @file
/// @brief Tracking problem definition, cost evaluation and the linear-algebra
/// helpers shared by every other module.
///
/// Sequences are stored column-major: a signal over T steps in R^d is a
/// d x T matrix whose column t-1 holds the value at time t.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace soco {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// d x T sequence, column t-1 is time t.
using Signal = Eigen::MatrixXd;

/// Raised when an input has the wrong shape.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when K^T K is not safely invertible.
class SingularGramError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operators derived from K once and reused everywhere.
struct DerivedOperators {
  Matrix k_pinv;      // n x m, K^+
  Matrix proj_range;  // m x m, K K^+
  Matrix gram;        // n x n, K^T K
  Matrix gram_inv;    // n x n, (K^T K)^{-1}
  Matrix kt_pinv;     // m x n, (K^T)^+
};

/// The tracking instance: minimize sum_t 1/2 |y_t - K x_t|^2 + beta |x_t - x_{t-1}|_1
/// with x_0 = 0.
class ProblemSpec {
 public:
  ProblemSpec(Matrix K, double beta, int horizon);

  const Matrix& K() const { return K_; }
  double beta() const { return beta_; }
  int horizon() const { return horizon_; }
  Eigen::Index m() const { return K_.rows(); }
  Eigen::Index n() const { return K_.cols(); }
  /// Always the zero vector.
  Vector x0() const { return Vector::Zero(n()); }
  const DerivedOperators& ops() const { return ops_; }

  /// Same K and beta, different horizon. Derived operators are copied.
  ProblemSpec with_horizon(int horizon) const;

 private:
  Matrix K_;
  double beta_;
  int horizon_;
  DerivedOperators ops_;
};

/// Checked factory mirroring the constructor.
ProblemSpec build_spec(const Matrix& K, double beta, int horizon);

/// Moore-Penrose pseudoinverse via SVD; singular values below
/// rel_cutoff * sigma_max are treated as zero.
Matrix pinv(const Matrix& M, double rel_cutoff = 1e-12);

struct CostBreakdown {
  double tracking = 0.0;
  double switching = 0.0;
  double total() const { return tracking + switching; }
};

/// sum_t 1/2 |y_t - K x_t|^2 and beta * sum_t |x_t - x_{t-1}|_1, x_0 = 0.
CostBreakdown eval_cost(const ProblemSpec& spec, const Signal& y, const Signal& x);

/// Same as eval_cost but with an explicit starting action and without requiring
/// the sequence length to match the horizon.
CostBreakdown eval_window_cost(const Matrix& K, double beta, const Signal& y, const Signal& x,
                               const Vector& x_prev);

/// v^T (K K^+) v.
double proj_seminorm_sq(const DerivedOperators& ops, const Vector& v);

/// Induced 1-norm (max absolute column sum).
double induced_norm1(const Matrix& M);

/// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double v) {
    add(v);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace soco
