#pragma once

/// @file
/// @brief Online and offline tracking policies evaluated on one realization.
///
/// Online policies only see predictions: an action committed at time t is
/// computed from y_{.|tau} with tau <= t-1.  FHC(k) re-plans every w+1 steps
/// on the offset grid tau = k mod (w+1), AFHC averages the w+1 offsets, RHC
/// re-plans every step and keeps the first action.

#include "soco/core.hpp"
#include "soco/prediction.hpp"
#include "soco/solver.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace soco {

enum class AlgorithmKind { fhc, afhc, open, opt, sta, rhc };

const char* to_string(AlgorithmKind kind);
/// Accepts "FHC", "AFHC", "OPEN", "OPT", "STA", "RHC" (case-insensitive).
AlgorithmKind algorithm_kind_from_string(const std::string& name);

struct AlgorithmRun {
  AlgorithmKind kind = AlgorithmKind::opt;
  /// Offset for FHC, -1 otherwise.
  int k = -1;
  /// Lookahead; windows hold w+1 steps.  0 for the offline policies.
  int w = 0;
  Signal trajectory;
  CostBreakdown cost;

  /// "FHC(2)", "AFHC", ...
  std::string name() const;
};

/// A planning window: actions first..last (1-based, inclusive) are computed
/// from predictions made at time tau-1.
struct Window {
  int tau = 1;
  int first = 1;
  int last = 1;
};

/// Windows of FHC(k): starts tau = k mod (w+1) in [-w, T], each covering
/// tau..tau+w clipped to [1, T].  Starts whose window is empty are skipped.
std::vector<Window> fhc_windows(int k, int w, int horizon);

/// Solver failure inside a policy, tagged with the offending window.
class WindowSolveError : public std::runtime_error {
 public:
  WindowSolveError(const std::string& what, int window_index)
      : std::runtime_error(what), window_(window_index) {}
  int window_index() const { return window_; }

 private:
  int window_;
};

AlgorithmRun run_fhc(const ProblemSpec& spec, const Realization& r, const ImpulseResponse& f,
                     int k, int w, const SolveOptions& opts = {});

/// Pointwise mean of FHC(0..w).  The individual FHC runs are stored in
/// fhc_runs when it is non-null.
AlgorithmRun run_afhc(const ProblemSpec& spec, const Realization& r, const ImpulseResponse& f,
                      int w, const SolveOptions& opts = {},
                      std::vector<AlgorithmRun>* fhc_runs = nullptr);

/// One full-horizon plan against the time-zero predictions.
AlgorithmRun run_open(const ProblemSpec& spec, const Realization& r, const SolveOptions& opts = {});

AlgorithmRun run_opt(const ProblemSpec& spec, const Realization& r, const SolveOptions& opts = {});

AlgorithmRun run_sta(const ProblemSpec& spec, const Realization& r);

/// Receding horizon: plan t..t+w from y_{.|t-1}, commit the first action.
AlgorithmRun run_rhc(const ProblemSpec& spec, const Realization& r, const ImpulseResponse& f,
                     int w, const SolveOptions& opts = {});

}  // namespace soco
