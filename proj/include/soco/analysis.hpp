#pragma once

/// @file
/// @brief Performance bounds, the AFHC loss decomposition and tail bounds.
///
/// Notation used throughout: |f_w|^2 = tr(R_e sum_{s<=w} f(s)^T f(s)) (the
/// R_e-weighted norm), F(w) the projected cumulative error variance.  The
/// scalar tail formulas instead take the unweighted sum_{s<=w} f(s)^2 and the
/// innovation variance sigma^2 separately; each function says which it uses.

#include "soco/algorithms.hpp"
#include "soco/core.hpp"
#include "soco/prediction.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace soco {

/// Norm applied to (K^T K)^{-1} 1 in bound_V.
enum class OnesNorm { l1, l2 };

/// Per-step bound on the expected competitive difference of AFHC:
///   (beta |K^+|_1 |f_w| + 3 beta^2 |(K^T K)^{-1} 1| + F(w)/2) / (w+1).
double bound_V(const ProblemSpec& spec, const ImpulseResponse& f, const NoiseSpec& noise, int w,
               OnesNorm norm = OnesNorm::l1);

/// beta |(K^T)^+ 1|_2.
double bound_B(const ProblemSpec& spec);

/// 4V + 8B^2.
double alpha1(double V, double B);

/// 1/2 tr(K K^+ R_e), the per-step cost floor of any online policy.
double alpha2(const ProblemSpec& spec, const NoiseSpec& noise);

struct BoundReport {
  int w = 0;
  double fw_norm = 0.0;
  double F_w = 0.0;
  double V = 0.0;
  double B = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  /// Switching and prediction parts of V*T.
  double V1 = 0.0;
  double V2 = 0.0;
  /// F(w)/sigma^2; scalar instances only.
  std::optional<double> lambda_bound;
  /// Bernstein parameters a and b; scalar instances with bounded noise only.
  std::optional<double> bern_a;
  std::optional<double> bern_b;
  std::optional<double> epsilon;
};

BoundReport bound_report(const ProblemSpec& spec, const ImpulseResponse& f, const NoiseSpec& noise,
                         int w, OnesNorm norm = OnesNorm::l1);

/// argmin_{0<=w<=w_max} bound_V, ties to the smaller w.
int optimal_window(const ProblemSpec& spec, const ImpulseResponse& f, const NoiseSpec& noise,
                   int w_max, OnesNorm norm = OnesNorm::l1);

struct LossSplit {
  /// Switching mismatch at window starts against OPT.
  double g1 = 0.0;
  /// Prediction error accumulated inside windows, in the K K^+ seminorm.
  double g2 = 0.0;
};

/// g1 and g2 for one realization.  fhc_runs must be FHC(0..w) in order and
/// every run must come from r.
LossSplit decompose_g1_g2(const AlgorithmRun& afhc, const std::vector<AlgorithmRun>& fhc_runs,
                          const AlgorithmRun& opt, const Realization& r, const ImpulseResponse& f,
                          const ProblemSpec& spec, int w);

/// T x T matrix mapping innovations to the in-window prediction errors of
/// FHC(k): row t holds f(t-s) for s from the start of t's window up to t.
/// Scalar impulse responses only.
Matrix build_A_matrix(const ImpulseResponse& f, int w, int horizon, int k);

/// Symmetric square root of (1/(w+1)) sum_k A_k^T A_k, so that
/// 1/2 |A e|^2 = g2 for a scalar instance with K != 0.
Matrix combine_A(const std::vector<Matrix>& blocks);

/// Convenience: combine_A over k = 0..w.
Matrix build_combined_A(const ImpulseResponse& f, int w, int horizon);

struct SpectralCheck {
  double lambda_max = 0.0;
  /// sum_{s<=w} (w-s+1) f(s)^2, i.e. F(w)/sigma^2 for K != 0.
  double bound = 0.0;
  int iterations = 0;
};

/// Largest eigenvalue of A A^T by power iteration (relative tol 1e-10)
/// alongside its trace bound.  Throws ConvergenceError if the iteration cap
/// is hit.
SpectralCheck spectral_bound_check(const Matrix& A, const ImpulseResponse& f, int w,
                                   int max_iter = 1'000'000);

/// Inputs of the scalar tail formulas.
struct TailParams {
  int T = 1;
  int w = 0;
  double beta = 0.0;
  double epsilon = 0.0;
  /// Unweighted sum_{s<=w} f(s)^2.
  double fw_unweighted_sq = 0.0;
  double sigma2 = 1.0;
  double lambda = 0.0;
  double F_w = 0.0;
};

/// Scalar instance with bounded noise only; throws std::invalid_argument otherwise.
TailParams tail_params(const ProblemSpec& spec, const ImpulseResponse& f, const NoiseSpec& noise,
                       int w);

struct TailBound {
  double two_term = 0.0;
  double simplified = 0.0;
};

/// Raw (unclamped) bounds on P(comp_diff > V T + u).
TailBound conc_tail_bound(const TailParams& p, double u);

/// Exponent denominators d1, d2 of the two-term bound, and a + b u.
struct TailDenominators {
  double first = 0.0;
  double second = 0.0;
  double combined = 0.0;
};
TailDenominators tail_denominators(const TailParams& p, double u);

double bern_a(const TailParams& p);
double bern_b(const TailParams& p);

/// exp(-u^2 / (2 eps^2 beta^2 T fw / ((w+1) sigma^2))) with fw = sum f(s)^2.
double g1_tail_bound(int T, int w, double beta, double eps, double fw_unweighted_sq,
                     double sigma2, double u);

/// exp(-u^2 / (8 eps^2 lambda (T F(w)/(w+1) + u))).
double g2_tail_bound(int T, int w, double eps, double lambda, double F_w, double u);

/// Clamp to [0, 1].
double as_probability(double bound);

/// Lower bound on cost(STA) - cost(OPT) for targets y.
double sta_gap_lower_bound(const ProblemSpec& spec, const Signal& y);

struct RegretConditionReport {
  /// Monte Carlo mean of sum_t |K K^+ (y_t - ybar)|^2 per prediction sequence.
  std::vector<double> variation;
  double infimum = 0.0;
  /// (8V + 16B^2) T and (4V + 8B^2) T.
  double threshold = 0.0;
  double threshold_alpha1 = 0.0;
  bool holds = false;
};

/// Whether the expected target variation exceeds (8V + 16B^2) T for every
/// prediction sequence in the family.
RegretConditionReport regret_condition_check(const ProblemSpec& spec, const ImpulseResponse& f,
                                             const NoiseSpec& noise,
                                             const std::vector<Signal>& y_hat_family, int w,
                                             int samples, std::uint64_t seed);

struct MetricRecord {
  double cost_alg = 0.0;
  double cost_opt = 0.0;
  double cost_sta = 0.0;
  double regret = 0.0;
  double comp_diff = 0.0;
  std::optional<double> g1;
  std::optional<double> g2;
  std::uint64_t seed = 0;
};

MetricRecord make_metric_record(const AlgorithmRun& alg, const AlgorithmRun& opt,
                                const AlgorithmRun& sta, std::uint64_t seed,
                                std::optional<LossSplit> split = std::nullopt);

}  // namespace soco
