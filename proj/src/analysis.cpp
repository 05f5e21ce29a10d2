#include "soco/analysis.hpp"

#include "soco/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace soco {

namespace {

bool is_scalar(const ProblemSpec& spec) { return spec.m() == 1 && spec.n() == 1; }

void check_w(int w) {
  if (w < 0) throw std::invalid_argument("w must be >= 0");
}

double ones_gram_norm(const ProblemSpec& spec, OnesNorm norm) {
  const Vector v = spec.ops().gram_inv * Vector::Ones(spec.n());
  return norm == OnesNorm::l1 ? v.lpNorm<1>() : v.norm();
}

double tap_or_zero(const ImpulseResponse& f, int s) {
  return f.has_tap(s) ? f.tap(s)(0, 0) : 0.0;
}

/// sum_{s<=w} (w-s+1) f(s)^2 for a scalar response.
double weighted_tap_sum(const ImpulseResponse& f, int w) {
  double acc = 0.0;
  for (int s = 0; s <= std::min(w, f.length()); ++s) {
    const double v = f.tap(s)(0, 0);
    acc += static_cast<double>(w - s + 1) * v * v;
  }
  return acc;
}

}  // namespace

double bound_V(const ProblemSpec& spec, const ImpulseResponse& f, const NoiseSpec& noise, int w,
               OnesNorm norm) {
  check_w(w);
  const double beta = spec.beta();
  const double fw = std::sqrt(fw_norm_sq(f, noise, w));
  const double F = big_F(f, noise, spec.ops(), w);
  const double num = beta * induced_norm1(spec.ops().k_pinv) * fw +
                     3.0 * beta * beta * ones_gram_norm(spec, norm) + 0.5 * F;
  return num / static_cast<double>(w + 1);
}

double bound_B(const ProblemSpec& spec) {
  return spec.beta() * (spec.ops().kt_pinv * Vector::Ones(spec.n())).norm();
}

double alpha1(double V, double B) { return 4.0 * V + 8.0 * B * B; }

double alpha2(const ProblemSpec& spec, const NoiseSpec& noise) {
  if (noise.dim() != spec.m()) throw DimensionError("noise dimension != K rows");
  return 0.5 * (spec.ops().proj_range * noise.covariance()).trace();
}

BoundReport bound_report(const ProblemSpec& spec, const ImpulseResponse& f, const NoiseSpec& noise,
                         int w, OnesNorm norm) {
  check_w(w);
  BoundReport rep;
  const double T = static_cast<double>(spec.horizon());
  const double beta = spec.beta();
  const double per = 1.0 / static_cast<double>(w + 1);
  rep.w = w;
  rep.fw_norm = std::sqrt(fw_norm_sq(f, noise, w));
  rep.F_w = big_F(f, noise, spec.ops(), w);
  rep.V = bound_V(spec, f, noise, w, norm);
  rep.B = bound_B(spec);
  rep.alpha1 = alpha1(rep.V, rep.B);
  rep.alpha2 = alpha2(spec, noise);
  rep.V1 = T * per *
           (beta * induced_norm1(spec.ops().k_pinv) * rep.fw_norm +
            3.0 * beta * beta * ones_gram_norm(spec, norm));
  rep.V2 = T * per * rep.F_w / 2.0;
  if (is_scalar(spec)) {
    const double sigma2 = noise.sigma2();
    rep.lambda_bound = rep.F_w / sigma2;
    if (noise.epsilon()) {
      const TailParams p = tail_params(spec, f, noise, w);
      rep.bern_a = bern_a(p);
      rep.bern_b = bern_b(p);
    }
  }
  rep.epsilon = noise.epsilon();
  return rep;
}

int optimal_window(const ProblemSpec& spec, const ImpulseResponse& f, const NoiseSpec& noise,
                   int w_max, OnesNorm norm) {
  if (w_max < 0 || w_max > spec.horizon() - 1) {
    throw std::invalid_argument("w_max must lie in [0, T-1]");
  }
  int best = 0;
  double best_v = bound_V(spec, f, noise, 0, norm);
  for (int w = 1; w <= w_max; ++w) {
    const double v = bound_V(spec, f, noise, w, norm);
    if (v < best_v) {
      best_v = v;
      best = w;
    }
  }
  return best;
}

LossSplit decompose_g1_g2(const AlgorithmRun& afhc, const std::vector<AlgorithmRun>& fhc_runs,
                          const AlgorithmRun& opt, const Realization& r, const ImpulseResponse& f,
                          const ProblemSpec& spec, int w) {
  check_w(w);
  const int T = spec.horizon();
  auto matches = [&](const AlgorithmRun& run) {
    return run.trajectory.cols() == T && run.trajectory.rows() == spec.n();
  };
  if (r.horizon() != T || !matches(afhc) || !matches(opt) || afhc.w != w ||
      static_cast<int>(fhc_runs.size()) != w + 1) {
    throw std::invalid_argument("decompose_g1_g2: runs do not belong to one realization");
  }
  for (int k = 0; k <= w; ++k) {
    const AlgorithmRun& run = fhc_runs[static_cast<std::size_t>(k)];
    if (!matches(run) || run.k != k || run.w != w) {
      throw std::invalid_argument("decompose_g1_g2: FHC runs must be offsets 0..w in order");
    }
  }

  const auto& ops = spec.ops();
  CompensatedSum g1, g2;
  for (int k = 0; k <= w; ++k) {
    const Signal& xk = fhc_runs[static_cast<std::size_t>(k)].trajectory;
    for (const Window& win : fhc_windows(k, w, T)) {
      if (win.tau >= 2) {
        const Eigen::Index c = win.tau - 2;
        g1 += spec.beta() * (opt.trajectory.col(c) - xk.col(c)).lpNorm<1>();
      }
      const Signal pred = predict_range(f, r.y_hat, r.innovations, win.tau - 1, win.first, win.last);
      for (int t = win.first; t <= win.last; ++t) {
        const Vector err = r.y.col(t - 1) - pred.col(t - win.first);
        g2 += 0.5 * proj_seminorm_sq(ops, err);
      }
    }
  }
  const double scale = 1.0 / static_cast<double>(w + 1);
  return {scale * g1.value(), scale * g2.value()};
}

Matrix build_A_matrix(const ImpulseResponse& f, int w, int horizon, int k) {
  if (f.dim() != 1) throw DimensionError("build_A_matrix requires a scalar impulse response");
  Matrix A = Matrix::Zero(horizon, horizon);
  for (const Window& win : fhc_windows(k, w, horizon)) {
    for (int t = win.first; t <= win.last; ++t) {
      for (int s = win.first; s <= t; ++s) A(t - 1, s - 1) = tap_or_zero(f, t - s);
    }
  }
  return A;
}

Matrix combine_A(const std::vector<Matrix>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("combine_A: no blocks");
  Matrix M = Matrix::Zero(blocks.front().cols(), blocks.front().cols());
  for (const auto& A : blocks) M += A.transpose() * A;
  M /= static_cast<double>(blocks.size());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(M);
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

Matrix build_combined_A(const ImpulseResponse& f, int w, int horizon) {
  std::vector<Matrix> blocks;
  for (int k = 0; k <= w; ++k) blocks.push_back(build_A_matrix(f, w, horizon, k));
  return combine_A(blocks);
}

SpectralCheck spectral_bound_check(const Matrix& A, const ImpulseResponse& f, int w, int max_iter) {
  if (f.dim() != 1) throw DimensionError("spectral_bound_check requires a scalar impulse response");
  check_w(w);
  SpectralCheck out;
  out.bound = weighted_tap_sum(f, w);
  const Matrix M = A * A.transpose();
  const Eigen::Index n = M.rows();
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + 1e-3 * static_cast<double>(i % 7);
  v.normalize();
  double lam = v.dot(M * v);
  for (int it = 1; it <= max_iter; ++it) {
    Vector mv = M * v;
    const double nrm = mv.norm();
    if (nrm == 0.0) {
      out.lambda_max = 0.0;
      out.iterations = it;
      return out;
    }
    v = mv / nrm;
    const double next = v.dot(M * v);
    if (std::abs(next - lam) <= 1e-10 * std::max(1.0, std::abs(next))) {
      out.lambda_max = next;
      out.iterations = it;
      return out;
    }
    lam = next;
  }
  throw ConvergenceError("power iteration did not converge");
}

TailParams tail_params(const ProblemSpec& spec, const ImpulseResponse& f, const NoiseSpec& noise,
                       int w) {
  check_w(w);
  if (!is_scalar(spec) || noise.dim() != 1 || f.dim() != 1) {
    throw std::invalid_argument("tail bounds are defined for scalar instances only");
  }
  if (!noise.epsilon()) throw std::invalid_argument("tail bounds need a noise bound epsilon");
  TailParams p;
  p.T = spec.horizon();
  p.w = w;
  p.beta = spec.beta();
  p.epsilon = *noise.epsilon();
  p.fw_unweighted_sq = f.unweighted_norm_sq(w);
  p.sigma2 = noise.sigma2();
  p.F_w = big_F(f, noise, spec.ops(), w);
  p.lambda = p.F_w / p.sigma2;
  return p;
}

double bern_a(const TailParams& p) {
  const double e2 = p.epsilon * p.epsilon;
  const double ratio = static_cast<double>(p.T) / static_cast<double>(p.w + 1);
  return 8.0 * e2 * ratio *
         std::max(p.beta * p.beta * p.fw_unweighted_sq / p.sigma2, 4.0 * p.lambda * p.F_w);
}

double bern_b(const TailParams& p) { return 16.0 * p.epsilon * p.epsilon * p.lambda; }

TailDenominators tail_denominators(const TailParams& p, double u) {
  const double e2 = p.epsilon * p.epsilon;
  const double ratio = static_cast<double>(p.T) / static_cast<double>(p.w + 1);
  TailDenominators d;
  d.first = 8.0 * e2 * p.beta * p.beta * ratio * p.fw_unweighted_sq / p.sigma2;
  d.second = 16.0 * e2 * p.lambda * (2.0 * ratio * p.F_w + u);
  d.combined = bern_a(p) + bern_b(p) * u;
  return d;
}

namespace {

/// exp(-u^2 / d) with the d = 0 limit handled.
double gaussian_like(double u, double d) {
  if (d <= 0.0) return u > 0.0 ? 0.0 : 1.0;
  return std::exp(-u * u / d);
}

}  // namespace

TailBound conc_tail_bound(const TailParams& p, double u) {
  if (u < 0.0) throw std::invalid_argument("u must be >= 0");
  const TailDenominators d = tail_denominators(p, u);
  TailBound out;
  out.two_term = gaussian_like(u, d.first) + gaussian_like(u, d.second);
  out.simplified = 2.0 * gaussian_like(u, d.combined);
  return out;
}

double g1_tail_bound(int T, int w, double beta, double eps, double fw_unweighted_sq,
                     double sigma2, double u) {
  const double d = 2.0 * eps * eps * beta * beta * static_cast<double>(T) * fw_unweighted_sq /
                   (static_cast<double>(w + 1) * sigma2);
  return gaussian_like(u, d);
}

double g2_tail_bound(int T, int w, double eps, double lambda, double F_w, double u) {
  const double d = 8.0 * eps * eps * lambda *
                   (static_cast<double>(T) * F_w / static_cast<double>(w + 1) + u);
  return gaussian_like(u, d);
}

double as_probability(double bound) { return std::clamp(bound, 0.0, 1.0); }

double sta_gap_lower_bound(const ProblemSpec& spec, const Signal& y) {
  if (y.rows() != spec.m()) throw DimensionError("targets do not match K rows");
  const double T = static_cast<double>(y.cols());
  const Vector ybar = y.rowwise().mean();
  CompensatedSum var;
  for (Eigen::Index t = 0; t < y.cols(); ++t) var += proj_seminorm_sq(spec.ops(), y.col(t) - ybar);
  const double B = bound_B(spec);
  const Vector ones = Vector::Ones(spec.n());
  const double C = spec.beta() * spec.beta() * ones.dot(spec.ops().gram_inv * ones) / (2.0 * T);
  const double gap = std::max(0.0, std::sqrt(var.value()) - 2.0 * B * std::sqrt(T));
  return 0.5 * gap * gap - 2.0 * B * B * T - C;
}

RegretConditionReport regret_condition_check(const ProblemSpec& spec, const ImpulseResponse& f,
                                             const NoiseSpec& noise,
                                             const std::vector<Signal>& y_hat_family, int w,
                                             int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  if (y_hat_family.empty()) throw std::invalid_argument("empty prediction family");
  RegretConditionReport rep;
  const double T = static_cast<double>(spec.horizon());
  const double V = bound_V(spec, f, noise, w);
  const double B = bound_B(spec);
  rep.threshold = (8.0 * V + 16.0 * B * B) * T;
  rep.threshold_alpha1 = alpha1(V, B) * T;
  rep.infimum = std::numeric_limits<double>::infinity();
  for (const Signal& y_hat : y_hat_family) {
    if (y_hat.cols() != spec.horizon()) throw DimensionError("prediction length != horizon");
    CompensatedSum acc;
    for (int i = 0; i < samples; ++i) {
      const Realization r = realize(f, noise, y_hat, rng::mix(seed, static_cast<std::uint64_t>(i)));
      const Vector ybar = r.y.rowwise().mean();
      CompensatedSum v;
      for (Eigen::Index t = 0; t < r.y.cols(); ++t) {
        v += proj_seminorm_sq(spec.ops(), r.y.col(t) - ybar);
      }
      acc += v.value();
    }
    rep.variation.push_back(acc.value() / samples);
    rep.infimum = std::min(rep.infimum, rep.variation.back());
  }
  rep.holds = rep.infimum > rep.threshold;
  return rep;
}

MetricRecord make_metric_record(const AlgorithmRun& alg, const AlgorithmRun& opt,
                                const AlgorithmRun& sta, std::uint64_t seed,
                                std::optional<LossSplit> split) {
  MetricRecord m;
  m.cost_alg = alg.cost.total();
  m.cost_opt = opt.cost.total();
  m.cost_sta = sta.cost.total();
  m.regret = m.cost_alg - m.cost_sta;
  m.comp_diff = m.cost_alg - m.cost_opt;
  if (split) {
    m.g1 = split->g1;
    m.g2 = split->g2;
  }
  m.seed = seed;
  return m;
}

}  // namespace soco
