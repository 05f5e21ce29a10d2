#pragma once

/// @file
/// @brief Experiment configs, seeded Monte Carlo runs and their on-disk outputs.
///
/// Sample i of an experiment draws its world from seed rng::mix(config.seed, i),
/// so every sample is independent of the others, of the thread that ran it and
/// of the lookahead being swept.  Results are reduced in sample-index order.

#include "soco/algorithms.hpp"
#include "soco/analysis.hpp"
#include "soco/core.hpp"
#include "soco/prediction.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace soco {

/// Invalid experiment configuration; path() names the offending field, e.g.
/// "noise.R_e".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : std::invalid_argument(path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct ImpulseConfig {
  /// iid | explicit | wiener | kalman
  std::string kind = "iid";
  /// explicit: the taps, f(0) first.
  std::vector<Matrix> taps;
  /// wiener: autocovariances R_y(0..), truncation L.
  std::vector<Matrix> autocov;
  int length = 0;
  /// kalman: state-space model and optional tap cap.
  KalmanSystem system;
  std::optional<int> max_len;
};

struct NoiseConfig {
  NoiseFamily family = NoiseFamily::gaussian;
  /// Empty for a Kalman model, where the innovation covariance is derived.
  Matrix R_e;
  std::optional<double> epsilon;
};

struct YHatConfig {
  /// constant | sinusoid | alternating | explicit
  std::string kind = "constant";
  /// constant: value; sinusoid: offset; alternating: offset.
  Vector offset;
  /// sinusoid and alternating.
  Vector amplitude;
  double period = 1.0;
  double phase = 0.0;
  /// explicit: m x T.
  Signal values;
};

struct AlgorithmConfig {
  AlgorithmKind kind = AlgorithmKind::afhc;
  int w = 0;
  /// FHC offset.
  int k = 0;
};

struct ExperimentConfig {
  Matrix K;
  double beta = 1.0;
  int T = 1;
  ImpulseConfig impulse;
  NoiseConfig noise;
  YHatConfig y_hat;
  std::vector<AlgorithmConfig> algorithms;
  int samples = 1;
  std::uint64_t seed = 0;
  std::string output = "experiment";
};

/// Parses and validates a config; throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
/// Resolved config with every default spelled out; parse_config(config_to_json(c))
/// reproduces c.
nlohmann::json config_to_json(const ExperimentConfig& c);

/// The objects a config describes.
struct Model {
  ProblemSpec spec;
  ImpulseResponse f;
  NoiseSpec noise;
  Signal y_hat;
};

Model build_model(const ExperimentConfig& c);

/// Label used in outputs: "AFHC", "FHC(1)", ...
std::string algorithm_label(const AlgorithmConfig& a);

struct SampleRow {
  int sample = 0;
  std::uint64_t seed = 0;
  std::string algorithm;
  int w = 0;
  CostBreakdown cost;
  MetricRecord metrics;
};

struct AbortedSample {
  int sample = 0;
  std::uint64_t seed = 0;
  std::string error;
};

struct Moments {
  double mean = 0.0;
  double std_error = 0.0;
  int count = 0;
};

/// Mean and sample-stddev/sqrt(n), accumulated in the given order.
Moments moments(const std::vector<double>& values);

struct AlgorithmSummary {
  std::string algorithm;
  int w = 0;
  Moments cost;
  Moments regret;
  Moments comp_diff;
  Moments cost_opt;
  /// mean cost / mean cost(OPT).
  double comp_ratio = 0.0;
  std::optional<Moments> g1;
  std::optional<Moments> g2;
  /// Samples where comp_diff > g1 + g2 + 1e-6 (AFHC only).
  int decomposition_violations = 0;
  /// Samples where cost(AFHC) exceeded the mean FHC cost by more than 1e-9.
  int jensen_violations = 0;
};

struct ExperimentResult {
  std::vector<SampleRow> rows;
  std::vector<AbortedSample> aborted;
  std::vector<AlgorithmSummary> summaries;
  /// One report per distinct lookahead among the configured algorithms.
  std::vector<BoundReport> bounds;
  /// V with the 2-norm of (K^T K)^{-1} 1, matching bounds entry by entry.
  std::vector<double> V_norm2;
  int samples = 0;
  /// More than 0.1% of samples aborted.
  bool failed = false;
};

/// Worker count from SOCO_THREADS, else the hardware concurrency.
int default_thread_count();

ExperimentResult run_experiment(const ExperimentConfig& c, int threads = 0);

struct TailRow {
  double u = 0.0;
  double threshold = 0.0;
  int exceed = 0;
  double empirical = 0.0;
  double std_error = 0.0;
  /// Clamped to [0, 1].
  double two_term = 0.0;
  double simplified = 0.0;
};

struct TailResult {
  int w = 0;
  double VT = 0.0;
  int samples = 0;
  std::vector<TailRow> rows;
  /// empirical <= two_term + 3 std_error at every u.
  bool within_bound = true;
};

/// Exceedance frequencies of AFHC's competitive difference over VT.  Uses the
/// first AFHC entry of the config; the noise must be bounded.
TailResult tail_experiment(const ExperimentConfig& c, const std::vector<double>& u_grid,
                           int threads = 0);

struct SweepRow {
  int w = 0;
  std::string algorithm;
  double V = 0.0;
  Moments comp_diff;
  Moments regret;
};

/// Reruns the experiment for each lookahead (same sample seeds).  Windowed
/// algorithms take the swept w; FHC entries whose offset exceeds it are dropped.
std::vector<SweepRow> sweep_window(const ExperimentConfig& c, const std::vector<int>& w_list,
                                   int threads = 0);

/// 17 significant digits, '.' decimal point, independent of the locale.
std::string format_double(double v);

/// JSON text with every floating-point value written by format_double.
std::string dump_json(const nlohmann::json& j, int indent = 2);

std::string samples_csv(const std::vector<SampleRow>& rows);
nlohmann::json summary_json(const ExperimentResult& result);
nlohmann::json bound_report_json(const BoundReport& report);
nlohmann::json realization_json(const Realization& r);

/// Writes <prefix>.samples.csv, <prefix>.summary.json and <prefix>.config.json.
void write_outputs(const ExperimentResult& result, const ExperimentConfig& c,
                   const std::string& prefix);

std::string tail_csv(const TailResult& t);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace soco
