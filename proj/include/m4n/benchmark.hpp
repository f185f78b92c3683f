#pragma once

#include "m4n/dataset_io.hpp"
#include "m4n/trainer.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace m4n {

std::vector<double> default_lambda_grid();  // 2^-1 .. 2^-10

struct BenchConfig {
  std::string dataset;
  TaskKind task = TaskKind::multiclass;
  std::optional<int> states;
  Method method = Method::m4n;
  std::vector<double> lambda_grid = default_lambda_grid();
  int passes = 50;
  int spmp_iters = 20;
  bool warm_start = true;
  std::optional<double> kernel_gamma;  // median heuristic when empty
  std::uint64_t seed = 0;
  int splits = 14;
  std::string out_dir;                 // no files written when empty
  bool timing = false;                 // record wall_ms (breaks byte-identical reruns)
  double oracle_error_delta = 0.0;
  bool standardize = true;
  int gap_every = 10;                  // passes between logged dual gaps
  int gap_spmp_iters = 50;
};

struct SplitResult {
  int split = 0;
  std::uint64_t split_seed = 0;
  double lambda = 0.0;
  double val_loss = 0.0;
  double test_loss = 0.0;
  double kernel_gamma = 0.0;
  double wall_ms = 0.0;
};

struct ExperimentResult {
  std::string dataset;
  Method method = Method::m4n;
  std::uint64_t dataset_hash = 0;
  std::vector<SplitResult> splits;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single split
  double min = 0.0;
  double max = 0.0;
};

/// Seed of split s; depends only on the run seed and the dataset bytes.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t dataset_hash, int split);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

/// 60 / 20 / 20 permutation split.
SplitIndices make_split(std::size_t n, std::uint64_t seed);

Dataset subset(const Dataset& d, const std::vector<std::size_t>& idx);

/// Standardizes columns of train/val/test with statistics from train.
void standardize(Dataset& train, Dataset& val, Dataset& test);

/// Runs the split / lambda-selection protocol. When cfg.out_dir is set,
/// writes results.jsonl, summary.txt, summary.json, diagnostics.jsonl and
/// run_config.json there.
ExperimentResult run_benchmark(const BenchConfig& cfg);

}  // namespace m4n
