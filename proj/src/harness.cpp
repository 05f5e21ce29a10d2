#include "soco/harness.hpp"

#include "soco/rng.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

namespace soco {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// JSON readers with field paths

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(path + "." + key, "missing field");
  return *it;
}

const json* optional_field(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double read_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

int read_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<int>();
}

std::string read_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

/// A number (1 x 1) or nested arrays, one inner array per row.
Matrix read_matrix(const json& j, const std::string& path) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a number or nested arrays");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array() || j[0].empty()) throw ConfigError(path, "expected nested arrays");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(rp, "rows must have equal length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      M(r, c) = read_number(row[static_cast<std::size_t>(c)], rp + "[" + std::to_string(c) + "]");
    }
  }
  return M;
}

Vector read_vector(const json& j, const std::string& path) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a number or an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = read_number(j[i], path + "[" + std::to_string(i) + "]");
  }
  return v;
}

std::vector<Matrix> read_matrix_list(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array");
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(read_matrix(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

/// Sequence over time: scalars for m = 1, otherwise one array per step.
Signal read_signal(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array");
  const auto T = static_cast<Eigen::Index>(j.size());
  if (j[0].is_number()) {
    Signal s(1, T);
    for (Eigen::Index t = 0; t < T; ++t) {
      s(0, t) = read_number(j[static_cast<std::size_t>(t)], path + "[" + std::to_string(t) + "]");
    }
    return s;
  }
  const Vector first = read_vector(j[0], path + "[0]");
  Signal s(first.size(), T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const std::string tp = path + "[" + std::to_string(t) + "]";
    const Vector v = read_vector(j[static_cast<std::size_t>(t)], tp);
    if (v.size() != first.size()) throw ConfigError(tp, "inconsistent dimension");
    s.col(t) = v;
  }
  return s;
}

json matrix_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json signal_json(const Signal& s) {
  json a = json::array();
  for (Eigen::Index t = 0; t < s.cols(); ++t) {
    if (s.rows() == 1) {
      a.push_back(s(0, t));
    } else {
      a.push_back(vector_json(s.col(t)));
    }
  }
  return a;
}

bool windowed(AlgorithmKind k) {
  return k == AlgorithmKind::fhc || k == AlgorithmKind::afhc || k == AlgorithmKind::rhc;
}

// ---------------------------------------------------------------------------
// Per-sample execution

struct SampleOutcome {
  std::vector<SampleRow> rows;
  std::vector<char> decomposition_violation;
  std::vector<char> jensen_violation;
  std::optional<std::string> error;
};

SampleOutcome run_sample(const Model& model, const ExperimentConfig& c, int index) {
  SampleOutcome out;
  const std::uint64_t seed = rng::mix(c.seed, static_cast<std::uint64_t>(index));
  try {
    const Realization r = realize(model.f, model.noise, model.y_hat, seed);
    const AlgorithmRun opt = run_opt(model.spec, r);
    const AlgorithmRun sta = run_sta(model.spec, r);
    for (const AlgorithmConfig& a : c.algorithms) {
      AlgorithmRun run;
      std::optional<LossSplit> split;
      bool decomposition = false, jensen = false;
      switch (a.kind) {
        case AlgorithmKind::afhc: {
          std::vector<AlgorithmRun> fhc;
          run = run_afhc(model.spec, r, model.f, a.w, {}, &fhc);
          split = decompose_g1_g2(run, fhc, opt, r, model.f, model.spec, a.w);
          decomposition = run.cost.total() - opt.cost.total() > split->g1 + split->g2 + 1e-6;
          CompensatedSum mean_fhc;
          for (const auto& f : fhc) mean_fhc += f.cost.total() / static_cast<double>(fhc.size());
          jensen = run.cost.total() > mean_fhc.value() + 1e-9;
          break;
        }
        case AlgorithmKind::fhc: run = run_fhc(model.spec, r, model.f, a.k, a.w); break;
        case AlgorithmKind::rhc: run = run_rhc(model.spec, r, model.f, a.w); break;
        case AlgorithmKind::open: run = run_open(model.spec, r); break;
        case AlgorithmKind::opt: run = opt; break;
        case AlgorithmKind::sta: run = sta; break;
      }
      SampleRow row;
      row.sample = index;
      row.seed = seed;
      row.algorithm = algorithm_label(a);
      row.w = a.w;
      row.cost = run.cost;
      row.metrics = make_metric_record(run, opt, sta, seed, split);
      out.rows.push_back(std::move(row));
      out.decomposition_violation.push_back(decomposition ? 1 : 0);
      out.jensen_violation.push_back(jensen ? 1 : 0);
    }
  } catch (const std::exception& e) {
    out.rows.clear();
    out.error = e.what();
  }
  return out;
}

template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int count = std::min(threads, n);
  pool.reserve(static_cast<std::size_t>(count));
  for (int t = 0; t < count; ++t) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

void validate(const ExperimentConfig& c) {
  if (c.samples < 1) throw ConfigError("samples", "must be >= 1");
  if (c.T < 1) throw ConfigError("spec.T", "must be >= 1");
  for (std::size_t i = 0; i < c.algorithms.size(); ++i) {
    const auto& a = c.algorithms[i];
    const std::string p = "algorithms[" + std::to_string(i) + "]";
    if (a.w < 0 || a.w > c.T - 1) throw ConfigError(p + ".w", "must lie in [0, T-1]");
    if (a.kind == AlgorithmKind::fhc && (a.k < 0 || a.k > a.w)) {
      throw ConfigError(p + ".k", "must lie in [0, w]");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("$", "config must be an object");
  ExperimentConfig c;

  const json& spec = require(j, "spec", "$");
  c.K = read_matrix(require(spec, "K", "spec"), "spec.K");
  c.beta = read_number(require(spec, "beta", "spec"), "spec.beta");
  if (!(c.beta > 0.0)) throw ConfigError("spec.beta", "must be > 0");
  c.T = read_int(require(spec, "T", "spec"), "spec.T");
  if (c.T < 1) throw ConfigError("spec.T", "must be >= 1");
  const auto m = c.K.rows();

  const json& imp = require(j, "impulse", "$");
  c.impulse.kind = read_string(require(imp, "kind", "impulse"), "impulse.kind");
  if (c.impulse.kind == "explicit") {
    const json& taps = require(imp, "taps", "impulse");
    if (taps.is_array() && !taps.empty() && taps[0].is_number()) {
      for (std::size_t i = 0; i < taps.size(); ++i) {
        c.impulse.taps.push_back(Matrix::Constant(
            1, 1, read_number(taps[i], "impulse.taps[" + std::to_string(i) + "]")));
      }
    } else {
      c.impulse.taps = read_matrix_list(taps, "impulse.taps");
    }
  } else if (c.impulse.kind == "wiener") {
    c.impulse.autocov = read_matrix_list(require(imp, "R_y", "impulse"), "impulse.R_y");
    c.impulse.length = read_int(require(imp, "L", "impulse"), "impulse.L");
    if (c.impulse.length < 0) throw ConfigError("impulse.L", "must be >= 0");
  } else if (c.impulse.kind == "kalman") {
    auto& sys = c.impulse.system;
    sys.A = read_matrix(require(imp, "A", "impulse"), "impulse.A");
    sys.B = read_matrix(require(imp, "B", "impulse"), "impulse.B");
    sys.C = read_matrix(require(imp, "C", "impulse"), "impulse.C");
    sys.Q = read_matrix(require(imp, "Q", "impulse"), "impulse.Q");
    sys.R = read_matrix(require(imp, "R", "impulse"), "impulse.R");
    if (const json* s = optional_field(imp, "S")) {
      sys.S = read_matrix(*s, "impulse.S");
    } else {
      sys.S = Matrix::Zero(sys.B.cols(), sys.C.rows());
    }
    if (const json* L = optional_field(imp, "L")) c.impulse.max_len = read_int(*L, "impulse.L");
  } else if (c.impulse.kind != "iid") {
    throw ConfigError("impulse.kind", "unknown kind '" + c.impulse.kind + "'");
  }

  const json& noise = require(j, "noise", "$");
  try {
    c.noise.family = noise_family_from_string(
        read_string(require(noise, "family", "noise"), "noise.family"));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("noise.family", e.what());
  }
  if (const json* re = optional_field(noise, "R_e")) {
    c.noise.R_e = read_matrix(*re, "noise.R_e");
  } else if (c.impulse.kind != "kalman") {
    throw ConfigError("noise.R_e", "missing field");
  }
  if (const json* eps = optional_field(noise, "epsilon")) {
    c.noise.epsilon = read_number(*eps, "noise.epsilon");
  }

  const json& yh = require(j, "y_hat", "$");
  c.y_hat.kind = read_string(require(yh, "kind", "y_hat"), "y_hat.kind");
  auto sized = [&](const json& v, const std::string& path) {
    Vector out = read_vector(v, path);
    if (out.size() == 1 && m > 1) out = Vector::Constant(m, out(0));
    if (out.size() != m) throw ConfigError(path, "dimension must match K rows");
    return out;
  };
  if (c.y_hat.kind == "constant") {
    c.y_hat.offset = sized(require(yh, "value", "y_hat"), "y_hat.value");
  } else if (c.y_hat.kind == "sinusoid") {
    c.y_hat.offset = sized(require(yh, "offset", "y_hat"), "y_hat.offset");
    c.y_hat.amplitude = sized(require(yh, "amplitude", "y_hat"), "y_hat.amplitude");
    c.y_hat.period = read_number(require(yh, "period", "y_hat"), "y_hat.period");
    if (!(c.y_hat.period > 0.0)) throw ConfigError("y_hat.period", "must be > 0");
    if (const json* ph = optional_field(yh, "phase")) c.y_hat.phase = read_number(*ph, "y_hat.phase");
  } else if (c.y_hat.kind == "alternating") {
    c.y_hat.amplitude = sized(require(yh, "amplitude", "y_hat"), "y_hat.amplitude");
    if (const json* off = optional_field(yh, "offset")) {
      c.y_hat.offset = sized(*off, "y_hat.offset");
    } else {
      c.y_hat.offset = Vector::Zero(m);
    }
  } else if (c.y_hat.kind == "explicit") {
    c.y_hat.values = read_signal(require(yh, "values", "y_hat"), "y_hat.values");
    if (c.y_hat.values.rows() != m) throw ConfigError("y_hat.values", "dimension must match K rows");
    if (c.y_hat.values.cols() != c.T) throw ConfigError("y_hat.values", "length must equal spec.T");
  } else {
    throw ConfigError("y_hat.kind", "unknown kind '" + c.y_hat.kind + "'");
  }

  const json& algs = require(j, "algorithms", "$");
  if (!algs.is_array()) throw ConfigError("algorithms", "expected an array");
  for (std::size_t i = 0; i < algs.size(); ++i) {
    const std::string p = "algorithms[" + std::to_string(i) + "]";
    AlgorithmConfig a;
    try {
      a.kind = algorithm_kind_from_string(read_string(require(algs[i], "name", p), p + ".name"));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(p + ".name", e.what());
    }
    if (const json* w = optional_field(algs[i], "w")) {
      a.w = read_int(*w, p + ".w");
    } else if (windowed(a.kind)) {
      throw ConfigError(p + ".w", "missing field");
    }
    if (const json* k = optional_field(algs[i], "k")) a.k = read_int(*k, p + ".k");
    if (!windowed(a.kind)) a.w = 0;
    if (a.kind != AlgorithmKind::fhc) a.k = 0;
    c.algorithms.push_back(a);
  }

  c.samples = read_int(require(j, "samples", "$"), "samples");
  const json& seed = require(j, "seed", "$");
  if (!seed.is_number_unsigned()) {
    throw ConfigError("seed", "expected a non-negative 64-bit integer");
  }
  c.seed = seed.get<std::uint64_t>();
  if (const json* out = optional_field(j, "output")) c.output = read_string(*out, "output");

  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("$", "cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["spec"] = {{"K", matrix_json(c.K)}, {"beta", c.beta}, {"T", c.T}};
  json imp = {{"kind", c.impulse.kind}};
  if (c.impulse.kind == "explicit") {
    json taps = json::array();
    for (const auto& t : c.impulse.taps) taps.push_back(matrix_json(t));
    imp["taps"] = taps;
  } else if (c.impulse.kind == "wiener") {
    json ry = json::array();
    for (const auto& t : c.impulse.autocov) ry.push_back(matrix_json(t));
    imp["R_y"] = ry;
    imp["L"] = c.impulse.length;
  } else if (c.impulse.kind == "kalman") {
    const auto& s = c.impulse.system;
    imp["A"] = matrix_json(s.A);
    imp["B"] = matrix_json(s.B);
    imp["C"] = matrix_json(s.C);
    imp["Q"] = matrix_json(s.Q);
    imp["R"] = matrix_json(s.R);
    imp["S"] = matrix_json(s.S);
    if (c.impulse.max_len) imp["L"] = *c.impulse.max_len;
  }
  j["impulse"] = imp;
  json noise = {{"family", to_string(c.noise.family)}};
  if (c.noise.R_e.size() > 0) noise["R_e"] = matrix_json(c.noise.R_e);
  if (c.noise.epsilon) noise["epsilon"] = *c.noise.epsilon;
  j["noise"] = noise;
  json yh = {{"kind", c.y_hat.kind}};
  if (c.y_hat.kind == "constant") {
    yh["value"] = vector_json(c.y_hat.offset);
  } else if (c.y_hat.kind == "sinusoid") {
    yh["offset"] = vector_json(c.y_hat.offset);
    yh["amplitude"] = vector_json(c.y_hat.amplitude);
    yh["period"] = c.y_hat.period;
    yh["phase"] = c.y_hat.phase;
  } else if (c.y_hat.kind == "alternating") {
    yh["offset"] = vector_json(c.y_hat.offset);
    yh["amplitude"] = vector_json(c.y_hat.amplitude);
  } else {
    yh["values"] = signal_json(c.y_hat.values);
  }
  j["y_hat"] = yh;
  json algs = json::array();
  for (const auto& a : c.algorithms) {
    json e = {{"name", to_string(a.kind)}, {"w", a.w}};
    if (a.kind == AlgorithmKind::fhc) e["k"] = a.k;
    algs.push_back(e);
  }
  j["algorithms"] = algs;
  j["samples"] = c.samples;
  j["seed"] = c.seed;
  j["output"] = c.output;
  return j;
}

Model build_model(const ExperimentConfig& c) {
  ProblemSpec spec = [&] {
    try {
      return build_spec(c.K, c.beta, c.T);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("spec.K", e.what());
    }
  }();
  const auto m = spec.m();

  Matrix R_e = c.noise.R_e;
  std::optional<ImpulseResponse> f;
  try {
    if (c.impulse.kind == "iid") {
      f = ImpulseResponse::white(m);
    } else if (c.impulse.kind == "explicit") {
      f = ImpulseResponse(c.impulse.taps);
    } else if (c.impulse.kind == "wiener") {
      f = wiener_impulse(c.impulse.autocov, R_e, c.impulse.length);
    } else {
      KalmanResult kr = kalman_impulse(c.impulse.system, c.impulse.max_len.value_or(c.T));
      if (R_e.size() > 0) {
        if (R_e.rows() != kr.R_e.rows() || R_e.cols() != kr.R_e.cols() ||
            (R_e - kr.R_e).norm() > 1e-8 * std::max(1.0, kr.R_e.norm())) {
          throw ConfigError("noise.R_e", "does not match the innovation covariance of the model");
        }
      }
      R_e = kr.R_e;
      f = std::move(kr.impulse);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("impulse", e.what());
  }
  if (f->dim() != m) throw ConfigError("impulse", "dimension must match K rows");

  std::optional<NoiseSpec> noise;
  try {
    noise.emplace(R_e, c.noise.family, c.noise.epsilon);
  } catch (const std::exception& e) {
    throw ConfigError("noise", e.what());
  }
  if (noise->dim() != m) throw ConfigError("noise.R_e", "dimension must match K rows");

  Signal y_hat(m, c.T);
  for (int t = 1; t <= c.T; ++t) {
    const auto col = static_cast<Eigen::Index>(t - 1);
    if (c.y_hat.kind == "constant") {
      y_hat.col(col) = c.y_hat.offset;
    } else if (c.y_hat.kind == "sinusoid") {
      const double arg = 2.0 * std::numbers::pi * t / c.y_hat.period + c.y_hat.phase;
      y_hat.col(col) = c.y_hat.offset + std::sin(arg) * c.y_hat.amplitude;
    } else if (c.y_hat.kind == "alternating") {
      y_hat.col(col) = c.y_hat.offset + (t % 2 == 1 ? 1.0 : -1.0) * c.y_hat.amplitude;
    } else {
      y_hat.col(col) = c.y_hat.values.col(col);
    }
  }
  return Model{std::move(spec), std::move(*f), std::move(*noise), std::move(y_hat)};
}

std::string algorithm_label(const AlgorithmConfig& a) {
  if (a.kind == AlgorithmKind::fhc) return "FHC(" + std::to_string(a.k) + ")";
  return to_string(a.kind);
}

// ---------------------------------------------------------------------------
// Experiments

Moments moments(const std::vector<double>& values) {
  Moments out;
  out.count = static_cast<int>(values.size());
  if (values.empty()) return out;
  CompensatedSum sum;
  for (double v : values) sum += v;
  out.mean = sum.value() / static_cast<double>(values.size());
  if (values.size() > 1) {
    CompensatedSum sq;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    const double var = sq.value() / static_cast<double>(values.size() - 1);
    out.std_error = std::sqrt(var / static_cast<double>(values.size()));
  }
  return out;
}

int default_thread_count() {
  if (const char* env = std::getenv("SOCO_THREADS")) {
    int n = 0;
    const char* end = env + std::char_traits<char>::length(env);
    auto [ptr, ec] = std::from_chars(env, end, n);
    if (ec == std::errc() && ptr == end && n >= 1) return n;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

ExperimentResult run_experiment(const ExperimentConfig& c, int threads) {
  validate(c);
  const Model model = build_model(c);
  if (threads <= 0) threads = default_thread_count();

  std::vector<SampleOutcome> outcomes(static_cast<std::size_t>(c.samples));
  parallel_for(c.samples, threads, [&](int i) {
    outcomes[static_cast<std::size_t>(i)] = run_sample(model, c, i);
  });

  ExperimentResult res;
  res.samples = c.samples;
  const std::size_t na = c.algorithms.size();
  std::vector<std::vector<double>> cost(na), regret(na), cd(na), copt(na), g1(na), g2(na);
  std::vector<int> decomposition(na, 0), jensen(na, 0);
  for (int i = 0; i < c.samples; ++i) {
    SampleOutcome& o = outcomes[static_cast<std::size_t>(i)];
    if (o.error) {
      res.aborted.push_back({i, rng::mix(c.seed, static_cast<std::uint64_t>(i)), *o.error});
      continue;
    }
    for (std::size_t a = 0; a < na; ++a) {
      const SampleRow& row = o.rows[a];
      cost[a].push_back(row.cost.total());
      regret[a].push_back(row.metrics.regret);
      cd[a].push_back(row.metrics.comp_diff);
      copt[a].push_back(row.metrics.cost_opt);
      if (row.metrics.g1) g1[a].push_back(*row.metrics.g1);
      if (row.metrics.g2) g2[a].push_back(*row.metrics.g2);
      decomposition[a] += o.decomposition_violation[a];
      jensen[a] += o.jensen_violation[a];
    }
    for (auto& row : o.rows) res.rows.push_back(std::move(row));
  }
  for (std::size_t a = 0; a < na; ++a) {
    AlgorithmSummary s;
    s.algorithm = algorithm_label(c.algorithms[a]);
    s.w = c.algorithms[a].w;
    s.cost = moments(cost[a]);
    s.regret = moments(regret[a]);
    s.comp_diff = moments(cd[a]);
    s.cost_opt = moments(copt[a]);
    s.comp_ratio = s.cost_opt.mean != 0.0 ? s.cost.mean / s.cost_opt.mean
                                          : std::numeric_limits<double>::infinity();
    if (c.algorithms[a].kind == AlgorithmKind::afhc) {
      s.g1 = moments(g1[a]);
      s.g2 = moments(g2[a]);
    }
    s.decomposition_violations = decomposition[a];
    s.jensen_violations = jensen[a];
    res.summaries.push_back(std::move(s));
  }
  std::set<int> ws;
  for (const auto& a : c.algorithms) {
    if (windowed(a.kind)) ws.insert(a.w);
  }
  for (int w : ws) {
    res.bounds.push_back(bound_report(model.spec, model.f, model.noise, w));
    res.V_norm2.push_back(bound_V(model.spec, model.f, model.noise, w, OnesNorm::l2));
  }
  res.failed = static_cast<double>(res.aborted.size()) > 0.001 * c.samples;
  return res;
}

TailResult tail_experiment(const ExperimentConfig& c, const std::vector<double>& u_grid,
                           int threads) {
  auto it = std::find_if(c.algorithms.begin(), c.algorithms.end(),
                         [](const AlgorithmConfig& a) { return a.kind == AlgorithmKind::afhc; });
  if (it == c.algorithms.end()) throw ConfigError("algorithms", "tail experiment needs an AFHC entry");
  if (!c.noise.epsilon) throw ConfigError("noise.epsilon", "tail experiment needs bounded noise");
  ExperimentConfig run = c;
  run.algorithms = {*it};
  const Model model = build_model(run);
  const TailParams params = tail_params(model.spec, model.f, model.noise, it->w);
  const ExperimentResult res = run_experiment(run, threads);

  TailResult out;
  out.w = it->w;
  out.VT = bound_V(model.spec, model.f, model.noise, it->w) * model.spec.horizon();
  out.samples = static_cast<int>(res.rows.size());
  const double n = static_cast<double>(res.rows.size());
  for (double u : u_grid) {
    TailRow row;
    row.u = u;
    row.threshold = out.VT + u;
    for (const auto& r : res.rows) {
      if (r.metrics.comp_diff > row.threshold) ++row.exceed;
    }
    row.empirical = n > 0 ? row.exceed / n : 0.0;
    row.std_error = n > 0 ? std::sqrt(row.empirical * (1.0 - row.empirical) / n) : 0.0;
    const TailBound b = conc_tail_bound(params, u);
    row.two_term = as_probability(b.two_term);
    row.simplified = as_probability(b.simplified);
    if (row.empirical > row.two_term + 3.0 * row.std_error) out.within_bound = false;
    out.rows.push_back(row);
  }
  return out;
}

std::vector<SweepRow> sweep_window(const ExperimentConfig& c, const std::vector<int>& w_list,
                                   int threads) {
  const Model model = build_model(c);
  std::vector<SweepRow> out;
  for (int w : w_list) {
    if (w < 0 || w > c.T - 1) throw ConfigError("w", "must lie in [0, T-1]");
    ExperimentConfig run = c;
    run.algorithms.clear();
    for (auto a : c.algorithms) {
      if (!windowed(a.kind)) continue;
      a.w = w;
      if (a.kind == AlgorithmKind::fhc && a.k > w) continue;
      run.algorithms.push_back(a);
    }
    if (run.algorithms.empty()) run.algorithms.push_back({AlgorithmKind::afhc, w, 0});
    const ExperimentResult res = run_experiment(run, threads);
    const double V = bound_V(model.spec, model.f, model.noise, w);
    for (const auto& s : res.summaries) {
      out.push_back({w, s.algorithm, V, s.comp_diff, s.regret});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

namespace {

bool is_leaf(const json& j) { return !j.is_object() && !j.is_array(); }

void emit(const json& j, int indent, int depth, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        emit(it.value(), indent, depth + 1, out);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool flat = std::all_of(j.begin(), j.end(), is_leaf);
      const bool rows = std::all_of(j.begin(), j.end(), [](const json& e) {
        return e.is_array() && std::all_of(e.begin(), e.end(), is_leaf);
      });
      if (flat || rows) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          emit(j[i], indent, depth + 1, out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        emit(j[i], indent, depth + 1, out);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_double(v) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

json moments_json(const Moments& m) {
  return {{"mean", m.mean}, {"std_error", m.std_error}, {"count", m.count}};
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string csv_double(double v) { return format_double(v); }

}  // namespace

std::string dump_json(const json& j, int indent) {
  std::string out;
  emit(j, indent, 0, out);
  out += "\n";
  return out;
}

std::string samples_csv(const std::vector<SampleRow>& rows) {
  std::string out =
      "sample,seed,algorithm,w,cost_total,cost_tracking,cost_switching,cost_opt,cost_sta,regret,"
      "comp_diff,g1,g2\n";
  for (const auto& r : rows) {
    out += std::to_string(r.sample) + "," + std::to_string(r.seed) + "," + r.algorithm + "," +
           std::to_string(r.w) + "," + csv_double(r.cost.total()) + "," +
           csv_double(r.cost.tracking) + "," + csv_double(r.cost.switching) + "," +
           csv_double(r.metrics.cost_opt) + "," + csv_double(r.metrics.cost_sta) + "," +
           csv_double(r.metrics.regret) + "," + csv_double(r.metrics.comp_diff) + "," +
           (r.metrics.g1 ? csv_double(*r.metrics.g1) : "") + "," +
           (r.metrics.g2 ? csv_double(*r.metrics.g2) : "") + "\n";
  }
  return out;
}

json bound_report_json(const BoundReport& b) {
  return {{"w", b.w},
          {"fw_norm", b.fw_norm},
          {"F_w", b.F_w},
          {"V", b.V},
          {"B", b.B},
          {"alpha1", b.alpha1},
          {"alpha2", b.alpha2},
          {"V1", b.V1},
          {"V2", b.V2},
          {"lambda_bound", opt_json(b.lambda_bound)},
          {"bern_a", opt_json(b.bern_a)},
          {"bern_b", opt_json(b.bern_b)},
          {"epsilon", opt_json(b.epsilon)}};
}

json summary_json(const ExperimentResult& res) {
  json j;
  j["samples"] = res.samples;
  j["completed"] = res.samples - static_cast<int>(res.aborted.size());
  j["failed"] = res.failed;
  json algs = json::array();
  for (const auto& s : res.summaries) {
    json a = {{"algorithm", s.algorithm},
              {"w", s.w},
              {"cost", moments_json(s.cost)},
              {"regret", moments_json(s.regret)},
              {"comp_diff", moments_json(s.comp_diff)},
              {"cost_opt", moments_json(s.cost_opt)},
              {"comp_ratio", s.comp_ratio},
              {"decomposition_violations", s.decomposition_violations},
              {"jensen_violations", s.jensen_violations}};
    a["g1"] = s.g1 ? moments_json(*s.g1) : json(nullptr);
    a["g2"] = s.g2 ? moments_json(*s.g2) : json(nullptr);
    algs.push_back(a);
  }
  j["algorithms"] = algs;
  json bounds = json::array();
  json vnorm2 = json::array();
  for (std::size_t i = 0; i < res.bounds.size(); ++i) {
    bounds.push_back(bound_report_json(res.bounds[i]));
    vnorm2.push_back({{"w", res.bounds[i].w}, {"V", res.V_norm2[i]}});
  }
  j["bounds"] = bounds;
  j["V_norm2"] = vnorm2;
  json aborted = json::array();
  for (const auto& a : res.aborted) {
    aborted.push_back({{"sample", a.sample}, {"seed", a.seed}, {"error", a.error}});
  }
  j["aborted"] = aborted;
  return j;
}

json realization_json(const Realization& r) {
  return {{"seed", r.seed},
          {"y_hat", signal_json(r.y_hat)},
          {"innovations", signal_json(r.innovations)},
          {"y", signal_json(r.y)},
          {"acceptance_rate", r.acceptance_rate}};
}

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace

void write_outputs(const ExperimentResult& result, const ExperimentConfig& c,
                   const std::string& prefix) {
  write_file(prefix + ".samples.csv", samples_csv(result.rows));
  write_file(prefix + ".summary.json", dump_json(summary_json(result)));
  write_file(prefix + ".config.json", dump_json(config_to_json(c)));
}

std::string tail_csv(const TailResult& t) {
  std::string out = "u,threshold,exceed,empirical,std_error,two_term_bound,simplified_bound\n";
  for (const auto& r : t.rows) {
    out += format_double(r.u) + "," + format_double(r.threshold) + "," + std::to_string(r.exceed) +
           "," + format_double(r.empirical) + "," + format_double(r.std_error) + "," +
           format_double(r.two_term) + "," + format_double(r.simplified) + "\n";
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "w,algorithm,V,mean_comp_diff,se_comp_diff,mean_regret,se_regret,samples\n";
  for (const auto& r : rows) {
    out += std::to_string(r.w) + "," + r.algorithm + "," + format_double(r.V) + "," +
           format_double(r.comp_diff.mean) + "," + format_double(r.comp_diff.std_error) + "," +
           format_double(r.regret.mean) + "," + format_double(r.regret.std_error) + "," +
           std::to_string(r.comp_diff.count) + "\n";
  }
  return out;
}

}  // namespace soco
