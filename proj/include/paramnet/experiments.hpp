#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "paramnet/chain.hpp"
#include "paramnet/trainer.hpp"

namespace paramnet {

struct ExperimentSpec {
  ChainConfig chain;
  TrainConfig train;
  double snr_db = 20.0;  // single trial
  std::vector<double> snr_list{0, 5, 10, 15, 20, 25};
  std::size_t trials_per_snr = 100;
  std::vector<Method> methods = Method::all_standard();
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = ".";
  /// 0 = hardware concurrency.
  std::size_t threads = 0;

  /// Defaults of the single-trial run: 20000 iterations, Simple vs Proposed.
  static ExperimentSpec single_defaults();
  /// Defaults of the SER-vs-SNR sweep: 10000 iterations, all five methods.
  static ExperimentSpec sweep_defaults();

  void validate() const;
};

/// Applies the keys of a flat YAML document on top of `spec`. Throws
/// ParseError with the line number on malformed input or unknown keys.
void apply_config_text(ExperimentSpec& spec, const std::string& text);
void apply_config_file(ExperimentSpec& spec, const std::filesystem::path& path);

/// "a:b:c" (start:stop:step, inclusive) or a comma list.
std::vector<double> parse_snr_list(const std::string& text);
std::vector<Method> parse_methods(const std::string& text);

/// Seed of trial `trial` at SNR index `snr_index`.
std::uint64_t trial_seed(std::uint64_t master, std::size_t snr_index,
                         std::size_t trial);

struct MethodOutcome {
  Method method;
  double final_ser = 1.0;
  bool diverged = false;
  std::size_t iterations_completed = 0;
  TrainTrace trace;
};

/// Trains every method on one shared trial (seed = spec.seed) and writes
/// single_<method>.csv plus single_status.csv into spec.output_dir.
std::vector<MethodOutcome> run_single_trial(const ExperimentSpec& spec);

struct SweepResult {
  std::vector<double> snr_db;
  std::vector<Method> methods;
  /// mean_ser[snr][method]
  std::vector<std::vector<double>> mean_ser;
  std::size_t divergent_runs = 0;
};

/// Monte Carlo SER-vs-SNR sweep. Writes ser_vs_snr.csv and
/// ser_vs_snr_trials.csv into spec.output_dir.
SweepResult run_monte_carlo(const ExperimentSpec& spec);

/// Exit codes: 0 success, 1 usage error, 2 runtime or I/O error.
int cli_main(int argc, const char* const* argv, std::ostream& out,
             std::ostream& err);

}  // namespace paramnet
