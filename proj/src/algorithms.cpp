#include "soco/algorithms.hpp"

#include <algorithm>
#include <cctype>

namespace soco {

namespace {

void check_inputs(const ProblemSpec& spec, const Realization& r) {
  if (r.horizon() != spec.horizon()) throw DimensionError("realization length != horizon");
  if (r.y.rows() != spec.m()) throw DimensionError("realization dimension != K rows");
}

void check_window(int w) {
  if (w < 0) throw std::invalid_argument("w must be >= 0");
}

AlgorithmRun make_run(const ProblemSpec& spec, const Realization& r, AlgorithmKind kind, int k,
                      int w, Signal x) {
  AlgorithmRun run;
  run.kind = kind;
  run.k = k;
  run.w = w;
  run.cost = eval_cost(spec, r.y, x);
  run.trajectory = std::move(x);
  return run;
}

SolveResult solve_tagged(const ProblemSpec& spec, const Signal& targets, const Vector& x_prev,
                         const SolveOptions& opts, int index) {
  try {
    return solve_window(spec, targets, x_prev, opts);
  } catch (const MaxIterationsError& e) {
    throw WindowSolveError(std::string(e.what()) + " (window " + std::to_string(index) + ")",
                           index);
  }
}

}  // namespace

const char* to_string(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::fhc: return "FHC";
    case AlgorithmKind::afhc: return "AFHC";
    case AlgorithmKind::open: return "OPEN";
    case AlgorithmKind::opt: return "OPT";
    case AlgorithmKind::sta: return "STA";
    case AlgorithmKind::rhc: return "RHC";
  }
  return "?";
}

AlgorithmKind algorithm_kind_from_string(const std::string& name) {
  std::string up = name;
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (auto kind : {AlgorithmKind::fhc, AlgorithmKind::afhc, AlgorithmKind::open,
                    AlgorithmKind::opt, AlgorithmKind::sta, AlgorithmKind::rhc}) {
    if (up == to_string(kind)) return kind;
  }
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

std::string AlgorithmRun::name() const {
  if (kind == AlgorithmKind::fhc) return "FHC(" + std::to_string(k) + ")";
  return to_string(kind);
}

std::vector<Window> fhc_windows(int k, int w, int horizon) {
  if (w < 0 || k < 0 || k > w) throw std::invalid_argument("FHC offset must satisfy 0 <= k <= w");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  const int period = w + 1;
  // Smallest tau >= -w with tau = k (mod w+1).
  int tau = -w + (((k + w) % period) + period) % period;
  std::vector<Window> out;
  for (; tau <= horizon; tau += period) {
    const int first = std::max(tau, 1);
    const int last = std::min(tau + w, horizon);
    if (first > last) continue;
    out.push_back({tau, first, last});
  }
  return out;
}

AlgorithmRun run_fhc(const ProblemSpec& spec, const Realization& r, const ImpulseResponse& f,
                     int k, int w, const SolveOptions& opts) {
  check_inputs(spec, r);
  check_window(w);
  const auto windows = fhc_windows(k, w, spec.horizon());
  Signal x(spec.n(), spec.horizon());
  Vector x_prev = spec.x0();
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const Window& win = windows[i];
    const Signal targets =
        predict_range(f, r.y_hat, r.innovations, win.tau - 1, win.first, win.last);
    const SolveResult res = solve_tagged(spec, targets, x_prev, opts, static_cast<int>(i));
    x.middleCols(win.first - 1, win.last - win.first + 1) = res.actions;
    x_prev = res.actions.col(res.actions.cols() - 1);
  }
  return make_run(spec, r, AlgorithmKind::fhc, k, w, std::move(x));
}

AlgorithmRun run_afhc(const ProblemSpec& spec, const Realization& r, const ImpulseResponse& f,
                      int w, const SolveOptions& opts, std::vector<AlgorithmRun>* fhc_runs) {
  check_inputs(spec, r);
  check_window(w);
  Signal sum = Signal::Zero(spec.n(), spec.horizon());
  if (fhc_runs) fhc_runs->clear();
  for (int k = 0; k <= w; ++k) {
    AlgorithmRun run = run_fhc(spec, r, f, k, w, opts);
    sum += run.trajectory;
    if (fhc_runs) fhc_runs->push_back(std::move(run));
  }
  return make_run(spec, r, AlgorithmKind::afhc, -1, w, sum / static_cast<double>(w + 1));
}

AlgorithmRun run_open(const ProblemSpec& spec, const Realization& r, const SolveOptions& opts) {
  check_inputs(spec, r);
  const SolveResult res = solve_tagged(spec, r.y_hat, spec.x0(), opts, 0);
  return make_run(spec, r, AlgorithmKind::open, -1, 0, res.actions);
}

AlgorithmRun run_opt(const ProblemSpec& spec, const Realization& r, const SolveOptions& opts) {
  check_inputs(spec, r);
  SolveResult res;
  try {
    res = solve_opt(spec, r.y, opts);
  } catch (const MaxIterationsError& e) {
    throw WindowSolveError(e.what(), 0);
  }
  return make_run(spec, r, AlgorithmKind::opt, -1, 0, std::move(res.actions));
}

AlgorithmRun run_sta(const ProblemSpec& spec, const Realization& r) {
  check_inputs(spec, r);
  const StaticResult st = static_optimum(spec, r.y);
  return make_run(spec, r, AlgorithmKind::sta, -1, 0, st.x.replicate(1, spec.horizon()));
}

AlgorithmRun run_rhc(const ProblemSpec& spec, const Realization& r, const ImpulseResponse& f,
                     int w, const SolveOptions& opts) {
  check_inputs(spec, r);
  check_window(w);
  const int T = spec.horizon();
  Signal x(spec.n(), T);
  Vector x_prev = spec.x0();
  for (int t = 1; t <= T; ++t) {
    const Signal targets = predict_range(f, r.y_hat, r.innovations, t - 1, t, std::min(t + w, T));
    const SolveResult res = solve_tagged(spec, targets, x_prev, opts, t - 1);
    x.col(t - 1) = res.actions.col(0);
    x_prev = x.col(t - 1);
  }
  return make_run(spec, r, AlgorithmKind::rhc, -1, w, std::move(x));
}

}  // namespace soco
