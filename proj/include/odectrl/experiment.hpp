#pragma once

#include <cstdint>
#include <string>

#include "odectrl/data.hpp"
#include "odectrl/optimizer.hpp"
#include "odectrl/propagation.hpp"
#include "odectrl/types.hpp"

namespace odectrl {

// One experiment as the CLI sees it: resolved from a JSON config file,
// command-line flags, and the ODECTRL_OUT environment variable (flags win
// over the file; the env var only replaces the default output directory).
struct ExperimentConfig {
  std::string architecture = "resnet";
  std::string tableau = "euler";
  int layers = 20;
  double dt = 0;  // 0 picks the default: T/N with T = 5, or dt = T for the
                  // simplex kind, whose alphas already sum to one
  int iters = 10000;
  std::uint64_t seed = 1;
  std::string data = "donut1d";  // generator name, mnist100, or a CSV path
  std::string idx_images;        // used when data == "mnist100"
  std::string idx_labels;
  int samples = 0;  // per-split sample count for generators; 0 = default
  std::string out_dir = "out";
  bool fixed_classifier = false;
  int threads = 1;
  double target_acc = -1.0;  // early stop on train accuracy; <= 0 disables
};

// Parses the JSON config file; unknown keys are rejected so typos cannot
// silently fall back to defaults.
ExperimentConfig load_experiment_config(const std::string& path);

struct ResolvedData {
  LabeledDataset train;
  LabeledDataset test;
};

// Generator names draw train and test independently (test seed is offset
// from the train seed); CSV paths are split half/half after a seeded
// shuffle; mnist100 reads the configured IDX pair as digits {0, 8} with the
// canonical 100/500 split.
ResolvedData resolve_data(const ExperimentConfig& cfg);

// Default per-split sizes: donut1d 500, the other generators 1000.
int default_sample_count(const std::string& name);

NetworkConfig<double> build_network(const ExperimentConfig& cfg, int width);

struct RunResult {
  TrainRecord record;
  NetworkConfig<double> network;
  std::string history_path;
  std::string params_path;
  std::string trajectory_path;
  std::string alphas_path;  // empty unless the architecture carries alphas
};

// Trains per the config and writes history.csv, params.json, trajectory.csv
// and (alpha kinds only) alphas.csv under cfg.out_dir. Reruns with the same
// config produce byte-identical files.
RunResult run_training(const ExperimentConfig& cfg);

// Writes a generated dataset as CSV.
void run_generate(const std::string& name, int count, std::uint64_t seed,
                  const std::string& out_path);

// params.json round trip, used by the eval subcommand.
void save_params(const std::string& path, const ExperimentConfig& cfg,
                 const NetworkConfig<double>& net, const ParameterSet<double>& params,
                 int iterations);
struct StoredParams {
  NetworkConfig<double> network;
  ParameterSet<double> params;
};
StoredParams load_params(const std::string& path);

struct EvalResult {
  double loss = 0;
  double accuracy = 0;
  Eigen::Index count = 0;
};
EvalResult run_eval(const std::string& params_path, const LabeledDataset& data);

}  // namespace odectrl
