// Command-line front end for experiments and bound evaluation.
//
// Exit codes: 0 success, 1 invalid input or failed run, 2 a --check
// assertion did not hold.

#include "soco/harness.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

constexpr int kExitInvalid = 1;
constexpr int kExitCheck = 2;

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const int v = std::stoi(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad integer '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

/// "lo:hi:step", inclusive of hi when it lies on the grid.
std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(std::stod(item));
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
    throw std::invalid_argument("grid must be lo:hi:step with step > 0 and hi >= lo");
  }
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(parts[0] + static_cast<double>(i) * parts[2]);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

/// Statistical and per-sample assertions over a finished experiment.
std::vector<std::string> check_experiment(const soco::ExperimentResult& res,
                                          const soco::ExperimentConfig& c) {
  std::vector<std::string> failures;
  const double T = static_cast<double>(c.T);
  for (const auto& s : res.summaries) {
    if (s.decomposition_violations > 0) {
      failures.push_back(s.algorithm + ": comp_diff exceeded g1 + g2 in " +
                         std::to_string(s.decomposition_violations) + " samples");
    }
    if (s.jensen_violations > 0) {
      failures.push_back(s.algorithm + ": averaged cost exceeded the mean FHC cost in " +
                         std::to_string(s.jensen_violations) + " samples");
    }
    if (s.comp_diff.mean < -1e-6) failures.push_back(s.algorithm + ": negative comp_diff");
    if (s.algorithm == "AFHC") {
      for (const auto& b : res.bounds) {
        if (b.w != s.w) continue;
        if (s.comp_diff.mean > b.V * T + 3.0 * s.comp_diff.std_error) {
          failures.push_back("AFHC: mean comp_diff above V T + 3 SE");
        }
        if (s.cost.mean < b.alpha2 * T - 2.0 * std::sqrt(T) - 3.0 * s.cost.std_error) {
          failures.push_back("AFHC: mean cost below alpha2 T - 2 sqrt(T) - 3 SE");
        }
      }
    }
  }
  if (res.failed) failures.push_back("more than 0.1% of samples aborted");
  return failures;
}

int run_and_write(const soco::ExperimentConfig& c, bool check) {
  const soco::ExperimentResult res = soco::run_experiment(c);
  soco::write_outputs(res, c, c.output);
  std::cout << soco::dump_json(soco::summary_json(res));
  if (res.failed) {
    std::cerr << "error: " << res.aborted.size() << " of " << res.samples << " samples aborted\n";
    return kExitInvalid;
  }
  if (check) {
    const auto failures = check_experiment(res, c);
    for (const auto& f : failures) std::cerr << "check failed: " << f << "\n";
    if (!failures.empty()) return kExitCheck;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online tracking with switching costs under correlated prediction noise"};
  app.require_subcommand(1);

  std::string config_path;
  bool check = false;

  auto* bounds = app.add_subcommand("bounds", "Print the bound report");
  std::optional<int> bounds_w;
  bounds->add_option("--config", config_path, "Experiment config (JSON)")->required();
  bounds->add_option("--w", bounds_w, "Lookahead (default: every configured w)");

  auto* run = app.add_subcommand("run", "Run the configured experiment");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_flag("--check", check, "Assert the expected bounds on the results");

  auto* mc = app.add_subcommand("montecarlo", "Run the experiment with a given sample count");
  int samples = 0;
  mc->add_option("--config", config_path, "Experiment config (JSON)")->required();
  mc->add_option("--samples", samples, "Number of samples")->required()->check(CLI::PositiveNumber);
  mc->add_flag("--check", check, "Assert the expected bounds on the results");

  auto* sweep = app.add_subcommand("sweep-window", "Sweep the lookahead");
  std::string w_list = "0,1,2,4,8";
  sweep->add_option("--config", config_path, "Experiment config (JSON)")->required();
  sweep->add_option("--w", w_list, "Comma-separated lookaheads");

  auto* tail = app.add_subcommand("tail", "Empirical tail of AFHC's competitive difference");
  std::string u_grid = "0:50:5";
  tail->add_option("--config", config_path, "Experiment config (JSON)")->required();
  tail->add_option("--u-grid", u_grid, "Deviation grid lo:hi:step");
  tail->add_flag("--check", check, "Assert empirical <= bound + 3 SE at every u");

  auto* real = app.add_subcommand("realize", "Dump one sampled world");
  std::uint64_t seed = 0;
  real->add_option("--config", config_path, "Experiment config (JSON)")->required();
  real->add_option("--seed", seed, "Realization seed")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitInvalid;
  }

  try {
    soco::ExperimentConfig c = soco::load_config(config_path);

    if (*bounds) {
      const soco::Model model = soco::build_model(c);
      std::vector<int> ws;
      if (bounds_w) {
        if (*bounds_w < 0 || *bounds_w > c.T - 1) throw soco::ConfigError("w", "must lie in [0, T-1]");
        ws.push_back(*bounds_w);
      } else {
        for (const auto& a : c.algorithms) {
          if (std::find(ws.begin(), ws.end(), a.w) == ws.end()) ws.push_back(a.w);
        }
        if (ws.empty()) ws.push_back(0);
      }
      nlohmann::json out = nlohmann::json::array();
      for (int w : ws) {
        nlohmann::json j = soco::bound_report_json(soco::bound_report(model.spec, model.f, model.noise, w));
        j["V_norm2"] = soco::bound_V(model.spec, model.f, model.noise, w, soco::OnesNorm::l2);
        out.push_back(j);
      }
      std::cout << soco::dump_json(ws.size() == 1 ? out[0] : out);
      return 0;
    }
    if (*run) return run_and_write(c, check);
    if (*mc) {
      c.samples = samples;
      return run_and_write(c, check);
    }
    if (*sweep) {
      const auto rows = soco::sweep_window(c, parse_int_list(w_list));
      const std::string csv = soco::sweep_csv(rows);
      write_text(c.output + ".sweep.csv", csv);
      std::cout << csv;
      return 0;
    }
    if (*tail) {
      const soco::TailResult t = soco::tail_experiment(c, parse_grid(u_grid));
      const std::string csv = soco::tail_csv(t);
      write_text(c.output + ".tail.csv", csv);
      std::cout << csv;
      if (check && !t.within_bound) {
        std::cerr << "check failed: empirical tail above bound + 3 SE\n";
        return kExitCheck;
      }
      return 0;
    }
    if (*real) {
      const soco::Model model = soco::build_model(c);
      const soco::Realization r = soco::realize(model.f, model.noise, model.y_hat, seed);
      std::cout << soco::dump_json(soco::realization_json(r));
      return 0;
    }
  } catch (const soco::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return 0;
}
