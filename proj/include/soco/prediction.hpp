#pragma once

/// @file
/// @brief Colored-noise prediction error model.
///
/// The realized target is y_t = yhat_t + sum_{s=1}^t f(t-s) e(s), where e(s)
/// are i.i.d. innovations with covariance R_e and f is an impulse response with
/// f(0) = I.  A prediction made at time tau keeps only the innovations up to tau.

#include "soco/core.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace soco {

class ImpulseResponse {
 public:
  /// taps[0] must be exactly the identity.
  explicit ImpulseResponse(std::vector<Matrix> taps);

  /// f(0) = I and nothing else.
  static ImpulseResponse white(Eigen::Index dim);
  /// Scalar impulse response from tap values (first must be 1).
  static ImpulseResponse scalar(const std::vector<double>& taps);

  Eigen::Index dim() const { return taps_.front().rows(); }
  /// Index of the last stored tap.
  int length() const { return static_cast<int>(taps_.size()) - 1; }
  bool has_tap(int s) const { return s >= 0 && s <= length(); }
  /// Caller must check has_tap first.
  const Matrix& tap(int s) const { return taps_[static_cast<std::size_t>(s)]; }
  const std::vector<Matrix>& taps() const { return taps_; }

  /// sum_{s<=w} |f(s)|_F^2, without the R_e weighting.
  double unweighted_norm_sq(int w) const;

 private:
  std::vector<Matrix> taps_;
};

enum class NoiseFamily { gaussian, uniform_bounded, truncated_gaussian, zero };

const char* to_string(NoiseFamily family);
NoiseFamily noise_family_from_string(const std::string& name);

class NoiseSpec {
 public:
  NoiseSpec(Matrix covariance, NoiseFamily family, std::optional<double> epsilon = std::nullopt);

  static NoiseSpec gaussian(Matrix covariance) {
    return NoiseSpec(std::move(covariance), NoiseFamily::gaussian);
  }

  const Matrix& covariance() const { return cov_; }
  NoiseFamily family() const { return family_; }
  const std::optional<double>& epsilon() const { return epsilon_; }
  Eigen::Index dim() const { return cov_.rows(); }
  const Matrix& chol_lower() const { return chol_; }
  /// Scalar variance; throws unless dim() == 1.
  double sigma2() const;

 private:
  Matrix cov_;
  NoiseFamily family_;
  std::optional<double> epsilon_;
  Matrix chol_;
};

struct InnovationDraw {
  Vector e;
  /// Proposals consumed; > 1 only for the truncated family.
  int attempts = 1;
};

/// e(t) for the given seed. Depends only on (seed, t).
InnovationDraw draw_innovation(const NoiseSpec& noise, std::uint64_t seed, std::int64_t t);

struct Realization {
  Signal y_hat;
  Signal innovations;
  Signal y;
  std::uint64_t seed = 0;
  /// Fraction of accepted proposals (1 unless truncated).
  double acceptance_rate = 1.0;

  int horizon() const { return static_cast<int>(y.cols()); }
};

Realization realize(const ImpulseResponse& f, const NoiseSpec& noise, const Signal& y_hat,
                    std::uint64_t seed);

/// Builds a realization from explicit innovations (deterministic test hook).
Realization realize_with_innovations(const ImpulseResponse& f, const Signal& y_hat,
                                     const Signal& innovations, std::uint64_t seed = 0);

/// y_{t|tau} for t = t_first..t_last (1-based, inclusive), using innovations
/// up to min(tau, T).  Negative tau is treated as 0.
Signal predict_range(const ImpulseResponse& f, const Signal& y_hat, const Signal& innovations,
                     int tau, int t_first, int t_last);

/// y_{t|tau} for t = tau+1..T, forward from the time-zero predictions.
Signal predict_at(const Realization& r, const ImpulseResponse& f, int tau);

/// Same quantity computed backward from the realized targets.
Signal predict_at_backward(const Realization& r, const ImpulseResponse& f, int tau);

/// tr(R_e sum_{s=0}^w f(s)^T f(s)).
double fw_norm_sq(const ImpulseResponse& f, const Matrix& R_e, int w);
double fw_norm_sq(const ImpulseResponse& f, const NoiseSpec& noise, int w);

/// tr(R_e sum_{s=0}^w (w-s+1) f(s)^T K K^+ f(s)).
double big_F(const ImpulseResponse& f, const Matrix& R_e, const DerivedOperators& ops, int w);
double big_F(const ImpulseResponse& f, const NoiseSpec& noise, const DerivedOperators& ops, int w);

class InconsistentModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// f(s) = R_y(s) R_e^{-1} for s = 0..L (R_y beyond the supplied lags is zero).
ImpulseResponse wiener_impulse(const std::vector<Matrix>& R_y, const Matrix& R_e, int L);

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KalmanSystem {
  Matrix A, B, C, Q, R, S;
};

struct KalmanResult {
  ImpulseResponse impulse;
  Matrix R_e;
  Matrix P;
  Matrix gain;
  int iterations = 0;
};

/// Steady-state innovations model of a stable state-space system.  Taps are
/// f(s) = C A^{s-1} K_p, truncated at max_len or once |f(s)|_F < 1e-12.
KalmanResult kalman_impulse(const KalmanSystem& sys, std::optional<int> max_len = std::nullopt,
                            int max_iter = 100000, double tol = 1e-10);

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int samples = 0;
};

/// Monte Carlo estimate of E|P dy_w|^2 with dy_w = sum_{s=0}^w f(w-s) e(s).
/// P is the identity unless a projector is given.
McEstimate mc_error_covariance(const ImpulseResponse& f, const NoiseSpec& noise, int w, int samples,
                               std::uint64_t seed, const Matrix* projector = nullptr);

}  // namespace soco
