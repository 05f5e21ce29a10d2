#include "soco/prediction.hpp"

#include "soco/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace soco {

namespace {

constexpr double kTapNegligible = 1e-12;
constexpr int kMaxTruncationAttempts = 1000000;

bool is_identity(const Matrix& M) {
  return M.rows() == M.cols() && M == Matrix::Identity(M.rows(), M.cols());
}

}  // namespace

// ---------------------------------------------------------------------------
// ImpulseResponse

ImpulseResponse::ImpulseResponse(std::vector<Matrix> taps) : taps_(std::move(taps)) {
  if (taps_.empty()) throw std::invalid_argument("impulse response needs at least f(0)");
  if (!is_identity(taps_.front())) throw std::invalid_argument("f(0) must be the identity");
  const auto d = taps_.front().rows();
  for (const auto& tap : taps_) {
    if (tap.rows() != d || tap.cols() != d) throw DimensionError("impulse taps must all be d x d");
  }
}

ImpulseResponse ImpulseResponse::white(Eigen::Index dim) {
  return ImpulseResponse({Matrix::Identity(dim, dim)});
}

ImpulseResponse ImpulseResponse::scalar(const std::vector<double>& taps) {
  std::vector<Matrix> m;
  m.reserve(taps.size());
  for (double v : taps) m.push_back(Matrix::Constant(1, 1, v));
  return ImpulseResponse(std::move(m));
}

double ImpulseResponse::unweighted_norm_sq(int w) const {
  if (w < 0) throw std::invalid_argument("w must be >= 0");
  double acc = 0.0;
  for (int s = 0; s <= std::min(w, length()); ++s) acc += tap(s).squaredNorm();
  return acc;
}

// ---------------------------------------------------------------------------
// NoiseSpec

const char* to_string(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::gaussian: return "gaussian";
    case NoiseFamily::uniform_bounded: return "uniform-bounded";
    case NoiseFamily::truncated_gaussian: return "truncated-gaussian";
    case NoiseFamily::zero: return "zero";
  }
  return "unknown";
}

NoiseFamily noise_family_from_string(const std::string& name) {
  if (name == "gaussian") return NoiseFamily::gaussian;
  if (name == "uniform-bounded" || name == "uniform") return NoiseFamily::uniform_bounded;
  if (name == "truncated-gaussian") return NoiseFamily::truncated_gaussian;
  if (name == "zero") return NoiseFamily::zero;
  throw std::invalid_argument("unknown noise family '" + name + "'");
}

NoiseSpec::NoiseSpec(Matrix covariance, NoiseFamily family, std::optional<double> epsilon)
    : cov_(std::move(covariance)), family_(family), epsilon_(epsilon) {
  if (cov_.rows() == 0 || cov_.rows() != cov_.cols()) {
    throw DimensionError("R_e must be a nonempty square matrix");
  }
  if ((cov_ - cov_.transpose()).norm() > 1e-12 * std::max(1.0, cov_.norm())) {
    throw std::invalid_argument("R_e must be symmetric");
  }
  Eigen::LLT<Matrix> llt(cov_);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("R_e must be positive definite");
  chol_ = llt.matrixL();

  const bool bounded = family_ == NoiseFamily::uniform_bounded ||
                       family_ == NoiseFamily::truncated_gaussian;
  if (bounded && !(epsilon_ && *epsilon_ > 0.0)) {
    throw std::invalid_argument(std::string(to_string(family_)) + " noise needs epsilon > 0");
  }
  if (family_ == NoiseFamily::uniform_bounded) {
    const double var = (*epsilon_) * (*epsilon_) / 3.0;
    const Matrix expected = var * Matrix::Identity(dim(), dim());
    if ((cov_ - expected).cwiseAbs().maxCoeff() > 1e-9 * var) {
      throw std::invalid_argument("uniform-bounded noise requires R_e = (epsilon^2/3) I");
    }
  }
}

double NoiseSpec::sigma2() const {
  if (dim() != 1) throw DimensionError("sigma2 is only defined for scalar noise");
  return cov_(0, 0);
}

InnovationDraw draw_innovation(const NoiseSpec& noise, std::uint64_t seed, std::int64_t t) {
  const auto d = noise.dim();
  InnovationDraw out{Vector::Zero(d), 1};
  rng::Stream stream(seed, static_cast<std::uint64_t>(t));
  switch (noise.family()) {
    case NoiseFamily::zero:
      break;
    case NoiseFamily::gaussian: {
      Vector z(d);
      for (Eigen::Index i = 0; i < d; ++i) z(i) = stream.normal();
      out.e = noise.chol_lower() * z;
      break;
    }
    case NoiseFamily::uniform_bounded: {
      const double eps = *noise.epsilon();
      for (Eigen::Index i = 0; i < d; ++i) {
        double v = stream.symmetric(eps);
        if (std::abs(v) >= eps) v = std::nextafter(v, 0.0);
        out.e(i) = v;
      }
      break;
    }
    case NoiseFamily::truncated_gaussian: {
      const double eps = *noise.epsilon();
      Vector z(d);
      for (out.attempts = 1; out.attempts <= kMaxTruncationAttempts; ++out.attempts) {
        for (Eigen::Index i = 0; i < d; ++i) z(i) = stream.normal();
        out.e = noise.chol_lower() * z;
        if (out.e.cwiseAbs().maxCoeff() < eps) return out;
      }
      throw std::runtime_error("truncated gaussian: acceptance region too small");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Realizations and predictions

Realization realize_with_innovations(const ImpulseResponse& f, const Signal& y_hat,
                                     const Signal& innovations, std::uint64_t seed) {
  if (y_hat.cols() < 1) throw DimensionError("y_hat must have at least one step");
  if (innovations.rows() != y_hat.rows() || innovations.cols() != y_hat.cols()) {
    throw DimensionError("innovations must match y_hat in shape");
  }
  if (f.dim() != y_hat.rows()) throw DimensionError("impulse dimension does not match targets");
  Realization r;
  r.y_hat = y_hat;
  r.innovations = innovations;
  r.seed = seed;
  r.y = y_hat;
  const int T = static_cast<int>(y_hat.cols());
  for (int t = 1; t <= T; ++t) {
    for (int s = std::max(1, t - f.length()); s <= t; ++s) {
      r.y.col(t - 1) += f.tap(t - s) * innovations.col(s - 1);
    }
  }
  return r;
}

Realization realize(const ImpulseResponse& f, const NoiseSpec& noise, const Signal& y_hat,
                    std::uint64_t seed) {
  if (noise.dim() != y_hat.rows()) throw DimensionError("noise dimension does not match targets");
  const auto T = y_hat.cols();
  Signal e(y_hat.rows(), T);
  long attempts = 0;
  for (Eigen::Index t = 1; t <= T; ++t) {
    auto draw = draw_innovation(noise, seed, t);
    e.col(t - 1) = draw.e;
    attempts += draw.attempts;
  }
  Realization r = realize_with_innovations(f, y_hat, e, seed);
  r.acceptance_rate = T > 0 ? static_cast<double>(T) / static_cast<double>(attempts) : 1.0;
  return r;
}

Signal predict_range(const ImpulseResponse& f, const Signal& y_hat, const Signal& innovations,
                     int tau, int t_first, int t_last) {
  const int T = static_cast<int>(y_hat.cols());
  if (t_first < 1 || t_last > T || t_first > t_last + 1) {
    throw std::out_of_range("prediction range outside [1, T]");
  }
  const int known = std::clamp(tau, 0, T);
  Signal out(y_hat.rows(), t_last - t_first + 1);
  for (int t = t_first; t <= t_last; ++t) {
    Vector v = y_hat.col(t - 1);
    for (int s = std::max(1, t - f.length()); s <= std::min(known, t); ++s) {
      v += f.tap(t - s) * innovations.col(s - 1);
    }
    out.col(t - t_first) = v;
  }
  return out;
}

Signal predict_at(const Realization& r, const ImpulseResponse& f, int tau) {
  const int T = r.horizon();
  if (tau < 0 || tau >= T) throw std::out_of_range("tau must satisfy 0 <= tau < T");
  return predict_range(f, r.y_hat, r.innovations, tau, tau + 1, T);
}

Signal predict_at_backward(const Realization& r, const ImpulseResponse& f, int tau) {
  const int T = r.horizon();
  if (tau < 0 || tau >= T) throw std::out_of_range("tau must satisfy 0 <= tau < T");
  Signal out(r.y.rows(), T - tau);
  for (int t = tau + 1; t <= T; ++t) {
    Vector v = r.y.col(t - 1);
    for (int s = std::max(tau + 1, t - f.length()); s <= t; ++s) {
      v -= f.tap(t - s) * r.innovations.col(s - 1);
    }
    out.col(t - tau - 1) = v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Correlation metrics

double fw_norm_sq(const ImpulseResponse& f, const Matrix& R_e, int w) {
  if (w < 0) throw std::invalid_argument("w must be >= 0");
  if (R_e.rows() != f.dim()) throw DimensionError("R_e does not match impulse dimension");
  Matrix acc = Matrix::Zero(f.dim(), f.dim());
  for (int s = 0; s <= std::min(w, f.length()); ++s) acc += f.tap(s).transpose() * f.tap(s);
  return (R_e * acc).trace();
}

double fw_norm_sq(const ImpulseResponse& f, const NoiseSpec& noise, int w) {
  return fw_norm_sq(f, noise.covariance(), w);
}

double big_F(const ImpulseResponse& f, const Matrix& R_e, const DerivedOperators& ops, int w) {
  if (w < 0) throw std::invalid_argument("w must be >= 0");
  if (R_e.rows() != f.dim() || ops.proj_range.rows() != f.dim()) {
    throw DimensionError("R_e, impulse and K K^+ dimensions disagree");
  }
  Matrix acc = Matrix::Zero(f.dim(), f.dim());
  for (int s = 0; s <= std::min(w, f.length()); ++s) {
    acc += static_cast<double>(w - s + 1) * (f.tap(s).transpose() * ops.proj_range * f.tap(s));
  }
  return (R_e * acc).trace();
}

double big_F(const ImpulseResponse& f, const NoiseSpec& noise, const DerivedOperators& ops, int w) {
  return big_F(f, noise.covariance(), ops, w);
}

// ---------------------------------------------------------------------------
// Wiener and Kalman instantiations

ImpulseResponse wiener_impulse(const std::vector<Matrix>& R_y, const Matrix& R_e, int L) {
  if (R_y.empty()) throw std::invalid_argument("R_y needs at least the lag-0 term");
  if (L < 0) throw std::invalid_argument("L must be >= 0");
  const auto d = R_y.front().rows();
  if (R_e.rows() != d || R_e.cols() != d) throw DimensionError("R_e does not match R_y");
  Eigen::LLT<Matrix> ry0(R_y.front());
  if (ry0.info() != Eigen::Success) throw std::invalid_argument("R_y(0) must be positive definite");
  const Matrix R_e_inv = R_e.fullPivLu().inverse();

  std::vector<Matrix> taps;
  taps.reserve(static_cast<std::size_t>(L) + 1);
  for (int s = 0; s <= L; ++s) {
    if (static_cast<std::size_t>(s) < R_y.size()) {
      taps.push_back(R_y[static_cast<std::size_t>(s)] * R_e_inv);
    } else {
      taps.push_back(Matrix::Zero(d, d));
    }
  }
  const Matrix I = Matrix::Identity(d, d);
  if ((taps.front() - I).cwiseAbs().maxCoeff() > 1e-8) {
    throw InconsistentModelError("R_y(0) R_e^{-1} differs from the identity");
  }
  taps.front() = I;
  return ImpulseResponse(std::move(taps));
}

KalmanResult kalman_impulse(const KalmanSystem& sys, std::optional<int> max_len, int max_iter,
                            double tol) {
  const auto ns = sys.A.rows();
  const auto p = sys.C.rows();
  if (sys.A.cols() != ns || sys.C.cols() != ns || sys.B.rows() != ns ||
      sys.Q.rows() != sys.B.cols() || sys.R.rows() != p || sys.S.rows() != sys.B.cols() ||
      sys.S.cols() != p) {
    throw DimensionError("inconsistent Kalman system dimensions");
  }
  Eigen::EigenSolver<Matrix> eig(sys.A, false);
  const double radius = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (!(radius < 1.0)) {
    throw ConvergenceError("Kalman: A is not stable (spectral radius " + std::to_string(radius) +
                           ")");
  }

  const Matrix BQB = sys.B * sys.Q * sys.B.transpose();
  const Matrix BS = sys.B * sys.S;
  Matrix P = BQB + Matrix::Identity(ns, ns);
  Matrix R_e, gain;
  int it = 0;
  bool converged = false;
  while (it < max_iter && !converged) {
    ++it;
    R_e = sys.R + sys.C * P * sys.C.transpose();
    Eigen::LDLT<Matrix> ldlt(R_e);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
      throw ConvergenceError("Kalman: innovation covariance is not positive definite");
    }
    const Matrix cross = sys.A * P * sys.C.transpose() + BS;
    gain = ldlt.solve(cross.transpose()).transpose();
    Matrix next = sys.A * P * sys.A.transpose() + BQB - gain * R_e * gain.transpose();
    next = 0.5 * (next + next.transpose());
    if (!next.allFinite()) throw ConvergenceError("Kalman: Riccati iteration diverged");
    converged = (next - P).norm() <= tol * std::max(1.0, next.norm());
    P = std::move(next);
  }
  if (!converged) throw ConvergenceError("Kalman: Riccati iteration did not converge");

  R_e = sys.R + sys.C * P * sys.C.transpose();
  R_e = 0.5 * (R_e + R_e.transpose());
  Eigen::LDLT<Matrix> ldlt(R_e);
  gain = ldlt.solve((sys.A * P * sys.C.transpose() + BS).transpose()).transpose();

  const int cap = max_len.value_or(10000);
  std::vector<Matrix> taps{Matrix::Identity(p, p)};
  Matrix Apow = Matrix::Identity(ns, ns);
  for (int s = 1; s <= cap; ++s) {
    Matrix tap = sys.C * Apow * gain;
    if (tap.norm() < kTapNegligible) break;
    taps.push_back(std::move(tap));
    Apow = Apow * sys.A;
  }
  return KalmanResult{ImpulseResponse(std::move(taps)), R_e, P, gain, it};
}

McEstimate mc_error_covariance(const ImpulseResponse& f, const NoiseSpec& noise, int w, int samples,
                               std::uint64_t seed, const Matrix* projector) {
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  if (w < 0) throw std::invalid_argument("w must be >= 0");
  CompensatedSum sum, sum_sq;
  for (int i = 0; i < samples; ++i) {
    const std::uint64_t key = rng::mix(seed, static_cast<std::uint64_t>(i));
    Vector dy = Vector::Zero(f.dim());
    for (int s = 0; s <= w; ++s) {
      if (!f.has_tap(w - s)) continue;
      dy += f.tap(w - s) * draw_innovation(noise, key, s).e;
    }
    const double v = projector ? (*projector * dy).squaredNorm() : dy.squaredNorm();
    sum += v;
    sum_sq += v * v;
  }
  McEstimate out;
  out.samples = samples;
  out.mean = sum.value() / samples;
  if (samples > 1) {
    const double var = std::max(0.0, (sum_sq.value() - samples * out.mean * out.mean) / (samples - 1));
    out.std_error = std::sqrt(var / samples);
  }
  return out;
}

}  // namespace soco
