#pragma once

/// @file
/// @brief Fused-lasso window solver.
///
/// Every offline or lookahead subproblem in this library has the form
///
///     min_x  sum_t 1/2 |y_t - K x_t|^2 + beta |x_t - x_{t-1}|_1,   x_0 = x_prev.
///
/// solve_window runs ADMM on the split z_t = x_t - x_{t-1}: the x-update is a
/// block-tridiagonal linear solve, the z-update is soft-thresholding at
/// beta/rho, and rho follows residual balancing.  Whenever the ADMM support of z
/// looks settled the iterate is polished by solving the equality-constrained
/// problem on that support exactly; the polished point is accepted only if it
/// passes the KKT test, so returned solutions are optimal to the requested
/// tolerance rather than to ADMM's slow tail.

#include "soco/core.hpp"

#include <stdexcept>

namespace soco {

struct SolveOptions {
  double tol = 1e-8;
  int max_iter = 50000;
  /// Optional n x N initial actions.
  const Signal* warm_start = nullptr;
};

struct SolveResult {
  Signal actions;  // n x N
  double objective = 0.0;
  /// lambda_t, t = 1..N (lambda_{N+1} = 0), recovered from stationarity.
  Signal duals;
  int iterations = 0;
  /// Largest stationarity residual |K^T K x_t - K^T y_t + lambda_t - lambda_{t+1}|.
  double primal_residual = 0.0;
  /// Largest |z - soft(z + lambda, beta)|, covering dual box feasibility and
  /// complementary slackness on z_t = x_t - x_{t-1}.
  double dual_residual = 0.0;
  /// Largest (|lambda_{t,i}| - beta)_+.
  double box_violation = 0.0;
  bool polished = false;
};

class MaxIterationsError : public std::runtime_error {
 public:
  MaxIterationsError(const std::string& what, SolveResult best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const SolveResult& best() const { return best_; }

 private:
  SolveResult best_;
};

/// Solves the window problem for an arbitrary map K and weight beta >= 0.
SolveResult solve_fused(const Matrix& K, double beta, const Signal& targets, const Vector& x_prev,
                        const SolveOptions& opts = {});

/// Window of the tracking problem in spec, starting from x_prev.
SolveResult solve_window(const ProblemSpec& spec, const Signal& targets, const Vector& x_prev,
                         const SolveOptions& opts = {});

/// Offline dynamic optimum over the full horizon with x_0 = 0.  Also checks
/// the dual value identity and throws std::runtime_error if it fails.
SolveResult solve_opt(const ProblemSpec& spec, const Signal& y, const SolveOptions& opts = {});

/// sum_t 1/2|y_t|^2 - 1/2|K K^+ y_t - (K^T)^+ s_t|^2 with s_t = lambda_t - lambda_{t+1},
/// minus <lambda_1, x_prev> when the window does not start at zero.
double opt_dual_cost(const ProblemSpec& spec, const Signal& y, const Signal& duals,
                     const Vector* x_prev = nullptr);

struct StaticResult {
  Vector x;
  double cost = 0.0;
  /// True when K^+ ybar - (beta/T)(K^T K)^{-1} 1 is strictly positive and was used.
  bool closed_form = false;
};

/// Best constant action, paying one switch from x_0 = 0.
StaticResult static_optimum(const ProblemSpec& spec, const Signal& y);

/// The static problem solved numerically as a one-step window with target ybar.
StaticResult static_optimum_numeric(const ProblemSpec& spec, const Signal& y);

/// KKT diagnostics for an arbitrary candidate trajectory.
struct KktReport {
  Signal duals;
  double stationarity = 0.0;
  double complementarity = 0.0;
  double box_violation = 0.0;
};
KktReport kkt_report(const Matrix& K, double beta, const Signal& targets, const Vector& x_prev,
                     const Signal& actions);

class InstanceTooLargeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class OracleMode { automatic, grid, subgradient };

struct OracleResult {
  Signal actions;
  double objective = 0.0;
  bool grid = false;
};

/// Test oracle.  Grid mode minimizes exactly over a uniform lattice of spacing
/// grid_resolution (dynamic programming over time with an L1 distance
/// transform); subgradient mode runs 10^6 projected-subgradient steps.
OracleResult brute_force_oracle(const ProblemSpec& spec, const Signal& y, double grid_resolution,
                                OracleMode mode = OracleMode::automatic,
                                const Vector* x_prev = nullptr);

}  // namespace soco
