#include "soco/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace soco {

namespace {

constexpr double kDualIdentityTol = 1e-6;
constexpr long kMaxGridStates = 4'000'000;
constexpr int kSubgradientIters = 1'000'000;

double soft_threshold(double v, double k) {
  if (v > k) return v - k;
  if (v < -k) return v + k;
  return 0.0;
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Column differences x_t - x_{t-1} with x_0 = x_prev.
Signal differences(const Signal& x, const Vector& x_prev) {
  Signal d(x.rows(), x.cols());
  d.col(0) = x.col(0) - x_prev;
  for (Eigen::Index t = 1; t < x.cols(); ++t) d.col(t) = x.col(t) - x.col(t - 1);
  return d;
}

/// Factorization of the ADMM x-update system
///   blocks (G + rho I + rho I[t<N]) on the diagonal, -rho I off the diagonal.
class BlockTridiagonal {
 public:
  void factor(const Matrix& G, double rho, Eigen::Index N) {
    rho_ = rho;
    N_ = N;
    n_ = G.rows();
    if (n_ == 1) {
      const double g = G(0, 0);
      pivots_.assign(static_cast<std::size_t>(N), 0.0);
      for (Eigen::Index t = 0; t < N; ++t) {
        double d = g + rho + (t + 1 < N ? rho : 0.0);
        if (t > 0) d -= rho * rho / pivots_[static_cast<std::size_t>(t - 1)];
        pivots_[static_cast<std::size_t>(t)] = d;
      }
      return;
    }
    blocks_.clear();
    blocks_.reserve(static_cast<std::size_t>(N));
    const Matrix I = Matrix::Identity(n_, n_);
    Matrix prev_inv;
    for (Eigen::Index t = 0; t < N; ++t) {
      Matrix d = G + rho * I + (t + 1 < N ? rho : 0.0) * I;
      if (t > 0) d -= rho * rho * prev_inv;
      blocks_.emplace_back(d);
      prev_inv = blocks_.back().solve(I);
    }
  }

  /// Overwrites rhs with the solution.
  void solve(Signal& rhs) const {
    if (n_ == 1) {
      for (Eigen::Index t = 1; t < N_; ++t) {
        rhs(0, t) += rho_ * rhs(0, t - 1) / pivots_[static_cast<std::size_t>(t - 1)];
      }
      rhs(0, N_ - 1) /= pivots_[static_cast<std::size_t>(N_ - 1)];
      for (Eigen::Index t = N_ - 2; t >= 0; --t) {
        rhs(0, t) = (rhs(0, t) + rho_ * rhs(0, t + 1)) / pivots_[static_cast<std::size_t>(t)];
      }
      return;
    }
    for (Eigen::Index t = 1; t < N_; ++t) {
      rhs.col(t) += rho_ * blocks_[static_cast<std::size_t>(t - 1)].solve(rhs.col(t - 1));
    }
    rhs.col(N_ - 1) = blocks_[static_cast<std::size_t>(N_ - 1)].solve(rhs.col(N_ - 1));
    for (Eigen::Index t = N_ - 2; t >= 0; --t) {
      rhs.col(t) =
          blocks_[static_cast<std::size_t>(t)].solve(rhs.col(t) + rho_ * rhs.col(t + 1));
    }
  }

 private:
  double rho_ = 1.0;
  Eigen::Index N_ = 0, n_ = 0;
  std::vector<double> pivots_;
  std::vector<Eigen::LLT<Matrix>> blocks_;
};

/// Exact minimizer on the support of z: entries with z == 0 are fused to their
/// predecessor, the others carry the sign of z.
Signal polish_scalar(double g, const Signal& Kty, double beta, double x_prev, const Signal& z) {
  const Eigen::Index N = Kty.cols();
  Signal x(1, N);
  Eigen::Index a = 0;
  while (a < N) {
    Eigen::Index b = a;
    while (b + 1 < N && z(0, b + 1) == 0.0) ++b;
    if (a == 0 && z(0, 0) == 0.0) {
      x.block(0, a, 1, b - a + 1).setConstant(x_prev);
    } else {
      double num = Kty.block(0, a, 1, b - a + 1).sum() - beta * sign_of(z(0, a));
      if (b + 1 < N) num += beta * sign_of(z(0, b + 1));
      x.block(0, a, 1, b - a + 1).setConstant(num / (g * static_cast<double>(b - a + 1)));
    }
    a = b + 1;
  }
  return x;
}

Signal polish_general(const Matrix& G, const Signal& Kty, double beta, const Vector& x_prev,
                      const Signal& z) {
  const Eigen::Index n = Kty.rows();
  const Eigen::Index N = Kty.cols();
  Eigen::MatrixXi var(n, N);
  int V = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index t = 0; t < N; ++t) {
      if (z(i, t) != 0.0) {
        var(i, t) = V++;
      } else {
        var(i, t) = t == 0 ? -1 : var(i, t - 1);
      }
    }
  }
  Matrix H = Matrix::Zero(V, V);
  Vector c = Vector::Zero(V);
  for (Eigen::Index t = 0; t < N; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const int j = var(i, t);
      if (j < 0) continue;
      c(j) += Kty(i, t);
      for (Eigen::Index i2 = 0; i2 < n; ++i2) {
        const int j2 = var(i2, t);
        if (j2 >= 0) {
          H(j, j2) += G(i, i2);
        } else {
          c(j) -= G(i, i2) * x_prev(i2);
        }
      }
    }
  }
  for (Eigen::Index t = 0; t < N; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (z(i, t) == 0.0) continue;
      const double s = beta * sign_of(z(i, t));
      c(var(i, t)) -= s;
      if (t > 0 && var(i, t - 1) >= 0) c(var(i, t - 1)) += s;
    }
  }
  const Vector v = V > 0 ? Vector(H.ldlt().solve(c)) : Vector();
  Signal x(n, N);
  for (Eigen::Index t = 0; t < N; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const int j = var(i, t);
      x(i, t) = j < 0 ? x_prev(i) : v(j);
    }
  }
  return x;
}

SolveResult finish(const Matrix& K, double beta, const Signal& targets, const Vector& x_prev,
                   Signal x, int iterations, bool polished) {
  SolveResult out;
  KktReport kkt = kkt_report(K, beta, targets, x_prev, x);
  out.objective = eval_window_cost(K, beta, targets, x, x_prev).total();
  out.actions = std::move(x);
  out.duals = std::move(kkt.duals);
  out.primal_residual = kkt.stationarity;
  out.dual_residual = kkt.complementarity;
  out.box_violation = kkt.box_violation;
  out.iterations = iterations;
  out.polished = polished;
  return out;
}

}  // namespace

KktReport kkt_report(const Matrix& K, double beta, const Signal& targets, const Vector& x_prev,
                     const Signal& actions) {
  const Eigen::Index N = actions.cols();
  KktReport rep;
  rep.duals.resize(actions.rows(), N);
  Vector acc = Vector::Zero(actions.rows());
  for (Eigen::Index t = N - 1; t >= 0; --t) {
    acc += K.transpose() * (targets.col(t) - K * actions.col(t));
    rep.duals.col(t) = acc;
  }
  const Matrix G = K.transpose() * K;
  const Signal z = differences(actions, x_prev);
  for (Eigen::Index t = 0; t < N; ++t) {
    Vector next = t + 1 < N ? Vector(rep.duals.col(t + 1)) : Vector::Zero(actions.rows());
    const Vector st = G * actions.col(t) - K.transpose() * targets.col(t) + rep.duals.col(t) - next;
    rep.stationarity = std::max(rep.stationarity, st.norm());
    for (Eigen::Index i = 0; i < actions.rows(); ++i) {
      const double lam = rep.duals(i, t);
      const double zi = z(i, t);
      rep.complementarity =
          std::max(rep.complementarity, std::abs(zi - soft_threshold(zi + lam, beta)));
      rep.box_violation = std::max(rep.box_violation, std::abs(lam) - beta);
    }
  }
  rep.box_violation = std::max(0.0, rep.box_violation);
  return rep;
}

SolveResult solve_fused(const Matrix& K, double beta, const Signal& targets, const Vector& x_prev,
                        const SolveOptions& opts) {
  if (targets.cols() < 1) throw DimensionError("window must contain at least one step");
  if (targets.rows() != K.rows()) throw DimensionError("targets do not match K rows");
  if (x_prev.size() != K.cols()) throw DimensionError("x_prev does not match K cols");
  if (!(opts.tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  if (opts.max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");

  const Eigen::Index n = K.cols();
  const Eigen::Index N = targets.cols();
  const Matrix G = K.transpose() * K;
  const Signal Kty = K.transpose() * targets;
  const double scale = 1.0 + targets.norm();
  const double kkt_tol = opts.tol * scale;

  if (beta == 0.0) {
    Signal x = G.llt().solve(Kty);
    return finish(K, beta, targets, x_prev, std::move(x), 0, true);
  }

  Signal x(n, N);
  if (opts.warm_start && opts.warm_start->rows() == n && opts.warm_start->cols() == N) {
    x = *opts.warm_start;
  } else {
    x = x_prev.replicate(1, N);
  }
  Signal z = differences(x, x_prev);
  for (Eigen::Index t = 0; t < N; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) z(i, t) = soft_threshold(z(i, t), 0.0);
  }
  Signal u = Signal::Zero(n, N);
  Signal z_old(n, N), rhs(n, N), dz(n, N);

  double rho = beta;
  BlockTridiagonal system;
  system.factor(G, rho, N);

  const bool cheap_polish = n == 1 || n * N <= 200;
  const int polish_period = cheap_polish ? 10 : 50;
  auto try_polish = [&](int it) -> std::optional<SolveResult> {
    Signal cand = n == 1 ? polish_scalar(G(0, 0), Kty, beta, x_prev(0), z)
                         : polish_general(G, Kty, beta, x_prev, z);
    if (!cand.allFinite()) return std::nullopt;
    SolveResult res = finish(K, beta, targets, x_prev, std::move(cand), it, true);
    if (res.dual_residual <= kkt_tol && res.primal_residual <= kkt_tol) return res;
    return std::nullopt;
  };

  for (int it = 1; it <= opts.max_iter; ++it) {
    rhs = Kty + rho * (z - u);
    if (N > 1) rhs.leftCols(N - 1) -= rho * (z.rightCols(N - 1) - u.rightCols(N - 1));
    rhs.col(0) += rho * x_prev;
    system.solve(rhs);
    x.swap(rhs);

    z_old = z;
    const double thresh = beta / rho;
    double prim_sq = 0.0;
    for (Eigen::Index t = 0; t < N; ++t) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double dx = x(i, t) - (t == 0 ? x_prev(i) : x(i, t - 1));
        const double v = dx + u(i, t);
        const double zt = soft_threshold(v, thresh);
        z(i, t) = zt;
        u(i, t) = v - zt;
        prim_sq += (dx - zt) * (dx - zt);
      }
    }
    dz = z - z_old;
    double dual_sq = 0.0;
    for (Eigen::Index t = 0; t < N; ++t) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = dz(i, t) - (t + 1 < N ? dz(i, t + 1) : 0.0);
        dual_sq += d * d;
      }
    }
    const double r_prim = std::sqrt(prim_sq);
    const double r_dual = rho * std::sqrt(dual_sq);

    const bool admm_converged = r_prim <= kkt_tol && r_dual <= kkt_tol;
    if (it % polish_period == 0 || admm_converged || it == opts.max_iter) {
      if (cheap_polish || r_prim <= 1e-3 * scale || admm_converged || it == opts.max_iter) {
        if (auto res = try_polish(it)) return *res;
      }
      if (admm_converged) {
        SolveResult res = finish(K, beta, targets, x_prev, x, it, false);
        if (res.dual_residual <= kkt_tol && res.primal_residual <= kkt_tol) return res;
      }
    }

    if (it % 10 == 0) {
      if (r_prim > 10.0 * r_dual) {
        rho *= 2.0;
        u /= 2.0;
        system.factor(G, rho, N);
      } else if (r_dual > 10.0 * r_prim) {
        rho /= 2.0;
        u *= 2.0;
        system.factor(G, rho, N);
      }
    }
  }

  SolveResult best = finish(K, beta, targets, x_prev, x, opts.max_iter, false);
  throw MaxIterationsError("fused solver: iteration limit reached", std::move(best));
}

SolveResult solve_window(const ProblemSpec& spec, const Signal& targets, const Vector& x_prev,
                         const SolveOptions& opts) {
  return solve_fused(spec.K(), spec.beta(), targets, x_prev, opts);
}

double opt_dual_cost(const ProblemSpec& spec, const Signal& y, const Signal& duals,
                     const Vector* x_prev) {
  if (y.rows() != spec.m() || duals.rows() != spec.n() || duals.cols() != y.cols()) {
    throw DimensionError("opt_dual_cost: shape mismatch");
  }
  const auto& ops = spec.ops();
  const Eigen::Index N = y.cols();
  CompensatedSum acc;
  for (Eigen::Index t = 0; t < N; ++t) {
    Vector s = duals.col(t);
    if (t + 1 < N) s -= duals.col(t + 1);
    acc += 0.5 * y.col(t).squaredNorm();
    acc += -0.5 * (ops.proj_range * y.col(t) - ops.kt_pinv * s).squaredNorm();
  }
  if (x_prev) acc += -duals.col(0).dot(*x_prev);
  return acc.value();
}

SolveResult solve_opt(const ProblemSpec& spec, const Signal& y, const SolveOptions& opts) {
  if (y.cols() != spec.horizon()) throw DimensionError("solve_opt: target length != horizon");
  SolveResult res = solve_window(spec, y, spec.x0(), opts);
  const double dual = opt_dual_cost(spec, y, res.duals);
  if (std::abs(dual - res.objective) > kDualIdentityTol * (1.0 + std::abs(res.objective))) {
    throw std::runtime_error("solve_opt: primal and dual values disagree");
  }
  return res;
}

StaticResult static_optimum_numeric(const ProblemSpec& spec, const Signal& y) {
  const double T = static_cast<double>(y.cols());
  const Vector ybar = y.rowwise().mean();
  SolveOptions opts;
  opts.tol = 1e-12;
  const SolveResult one = solve_fused(spec.K(), spec.beta() / T, ybar, spec.x0(), opts);
  StaticResult out;
  out.x = one.actions.col(0);
  const Signal traj = out.x.replicate(1, y.cols());
  out.cost = eval_window_cost(spec.K(), spec.beta(), y, traj, spec.x0()).total();
  out.closed_form = false;
  return out;
}

StaticResult static_optimum(const ProblemSpec& spec, const Signal& y) {
  if (y.rows() != spec.m() || y.cols() < 1) throw DimensionError("static_optimum: bad targets");
  const double T = static_cast<double>(y.cols());
  const auto& ops = spec.ops();
  const Vector ybar = y.rowwise().mean();
  const Vector x = ops.k_pinv * ybar - (spec.beta() / T) * ops.gram_inv * Vector::Ones(spec.n());
  if (x.minCoeff() > 0.0) {
    StaticResult out;
    out.x = x;
    const Signal traj = x.replicate(1, y.cols());
    out.cost = eval_window_cost(spec.K(), spec.beta(), y, traj, spec.x0()).total();
    out.closed_form = true;
    return out;
  }
  return static_optimum_numeric(spec, y);
}

// ---------------------------------------------------------------------------
// Oracle

namespace {

struct Lattice {
  std::vector<double> lo;
  std::vector<int> count;
  double h = 0.0;
  long states = 1;
};

Lattice make_lattice(const Matrix& K, const Signal& y, const Vector& x_prev, double h, bool scalar) {
  const Eigen::Index n = K.cols();
  const Matrix G = K.transpose() * K;
  const Signal ls = G.llt().solve(K.transpose() * y);
  Lattice lat;
  lat.h = h;
  for (Eigen::Index i = 0; i < n; ++i) {
    double lo = std::min(x_prev(i), ls.row(i).minCoeff());
    double hi = std::max(x_prev(i), ls.row(i).maxCoeff());
    if (!scalar) {
      const double pad = 0.5 * (hi - lo) + 0.5;
      lo -= pad;
      hi += pad;
    }
    // Align the lattice so that x_prev is a node.
    const double start = x_prev(i) - std::ceil((x_prev(i) - lo) / h - 1e-9) * h;
    const int cnt = static_cast<int>(std::ceil((hi - start) / h - 1e-9)) + 1;
    lat.lo.push_back(start);
    lat.count.push_back(std::max(cnt, 1));
    lat.states *= lat.count.back();
    if (lat.states > kMaxGridStates) throw InstanceTooLargeError("oracle lattice too large");
  }
  return lat;
}

OracleResult grid_oracle(const Matrix& K, double beta, const Signal& y, const Vector& x_prev,
                         double h) {
  const Eigen::Index n = K.cols();
  const Eigen::Index N = y.cols();
  const Lattice lat = make_lattice(K, y, x_prev, h, n == 1);
  const long S = lat.states;

  std::vector<long> stride(static_cast<std::size_t>(n));
  long st = 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    stride[static_cast<std::size_t>(i)] = st;
    st *= lat.count[static_cast<std::size_t>(i)];
  }
  auto point = [&](long s) {
    Vector p(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const long c = (s / stride[static_cast<std::size_t>(i)]) % lat.count[static_cast<std::size_t>(i)];
      p(i) = lat.lo[static_cast<std::size_t>(i)] + static_cast<double>(c) * h;
    }
    return p;
  };
  Matrix pts(n, S);
  for (long s = 0; s < S; ++s) pts.col(s) = point(s);
  const Matrix Kpts = K * pts;

  std::vector<double> cost(static_cast<std::size_t>(S));
  std::vector<std::vector<long>> back(static_cast<std::size_t>(N));
  for (long s = 0; s < S; ++s) {
    cost[static_cast<std::size_t>(s)] =
        0.5 * (y.col(0) - Kpts.col(s)).squaredNorm() + beta * (pts.col(s) - x_prev).lpNorm<1>();
  }
  std::vector<double> m(static_cast<std::size_t>(S));
  std::vector<long> arg(static_cast<std::size_t>(S));
  const double step = beta * h;
  for (Eigen::Index t = 1; t < N; ++t) {
    m = cost;
    for (long s = 0; s < S; ++s) arg[static_cast<std::size_t>(s)] = s;
    // Separable L1 distance transform, one axis at a time.
    for (Eigen::Index a = 0; a < n; ++a) {
      const long sa = stride[static_cast<std::size_t>(a)];
      const long ca = lat.count[static_cast<std::size_t>(a)];
      for (long s = 0; s < S; ++s) {
        const long c = (s / sa) % ca;
        if (c == 0) continue;
        const auto cur = static_cast<std::size_t>(s), prv = static_cast<std::size_t>(s - sa);
        if (m[prv] + step < m[cur]) {
          m[cur] = m[prv] + step;
          arg[cur] = arg[prv];
        }
      }
      for (long s = S - 1; s >= 0; --s) {
        const long c = (s / sa) % ca;
        if (c == ca - 1) continue;
        const auto cur = static_cast<std::size_t>(s), nxt = static_cast<std::size_t>(s + sa);
        if (m[nxt] + step < m[cur]) {
          m[cur] = m[nxt] + step;
          arg[cur] = arg[nxt];
        }
      }
    }
    back[static_cast<std::size_t>(t)] = arg;
    for (long s = 0; s < S; ++s) {
      cost[static_cast<std::size_t>(s)] =
          m[static_cast<std::size_t>(s)] + 0.5 * (y.col(t) - Kpts.col(s)).squaredNorm();
    }
  }
  long best = static_cast<long>(std::min_element(cost.begin(), cost.end()) - cost.begin());
  OracleResult out;
  out.grid = true;
  out.actions.resize(n, N);
  for (Eigen::Index t = N - 1; t >= 0; --t) {
    out.actions.col(t) = pts.col(best);
    if (t > 0) best = back[static_cast<std::size_t>(t)][static_cast<std::size_t>(best)];
  }
  out.objective = eval_window_cost(K, beta, y, out.actions, x_prev).total();
  return out;
}

OracleResult subgradient_oracle(const Matrix& K, double beta, const Signal& y,
                                const Vector& x_prev) {
  const Eigen::Index n = K.cols();
  const Eigen::Index N = y.cols();
  const Matrix G = K.transpose() * K;
  const Signal ls = G.llt().solve(K.transpose() * y);
  const double radius = 1.0 + std::max(ls.cwiseAbs().maxCoeff(), x_prev.cwiseAbs().maxCoeff());

  Signal x = x_prev.replicate(1, N);
  OracleResult best;
  best.actions = x;
  best.objective = eval_window_cost(K, beta, y, x, x_prev).total();
  Signal g(n, N);
  for (int k = 0; k < kSubgradientIters; ++k) {
    const Signal d = differences(x, x_prev);
    g = G * x - K.transpose() * y;
    for (Eigen::Index t = 0; t < N; ++t) {
      for (Eigen::Index i = 0; i < n; ++i) {
        g(i, t) += beta * sign_of(d(i, t));
        if (t + 1 < N) g(i, t) -= beta * sign_of(d(i, t + 1));
      }
    }
    const double gn = g.norm();
    if (gn == 0.0) break;
    x -= (radius / std::sqrt(static_cast<double>(k) + 1.0)) / gn * g;
    x = x.cwiseMax(-2.0 * radius).cwiseMin(2.0 * radius);
    const double obj = eval_window_cost(K, beta, y, x, x_prev).total();
    if (obj < best.objective) {
      best.objective = obj;
      best.actions = x;
    }
  }
  return best;
}

}  // namespace

OracleResult brute_force_oracle(const ProblemSpec& spec, const Signal& y, double grid_resolution,
                                OracleMode mode, const Vector* x_prev) {
  if (y.rows() != spec.m() || y.cols() < 1) throw DimensionError("oracle: bad targets");
  const Vector start = x_prev ? *x_prev : spec.x0();
  const long size = static_cast<long>(spec.n()) * y.cols();
  if (mode == OracleMode::grid && size > 6) {
    throw InstanceTooLargeError("grid oracle requires n*T <= 6");
  }
  if (mode == OracleMode::subgradient || (mode == OracleMode::automatic && size > 6)) {
    return subgradient_oracle(spec.K(), spec.beta(), y, start);
  }
  if (!(grid_resolution > 0.0)) throw std::invalid_argument("grid_resolution must be > 0");
  return grid_oracle(spec.K(), spec.beta(), y, start, grid_resolution);
}

}  // namespace soco
