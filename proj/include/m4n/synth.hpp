#pragma once

#include "m4n/trainer.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace m4n {

// blobs:      k Gaussian classes, centers (c - (k-1)/2) * separation on axis 0.
// flat-noise: x uniform on [0,1]^dim, y ~ rho independently of x.
// ordinal:    k ordered bins of w^T x + noise.
// hmm:        sticky Markov chain over `states`, Gaussian emissions.
// ranking:    `items` noisy linear scores, rank 1 for the largest.
struct SynthParams {
  std::string kind = "blobs";
  int n = 300;
  int k = 3;
  int dim = 2;
  double separation = 3.0;
  std::vector<double> rho;  // flat-noise class probabilities
  int length = 4;
  int states = 3;
  double stay = 0.7;        // hmm self-transition probability
  int items = 4;
  double noise = 0.5;
  int mc_samples = 500;     // ranking Bayes marginals
  std::uint64_t seed = 0;
};

struct SynthResult {
  Dataset data;
  TaskSpec task;
  std::vector<Label> bayes;          // Bayes-optimal label for each input
  std::optional<double> bayes_error; // analytic expected loss when available
};

SynthResult synth_generate(const SynthParams& params);

/// Bayes-optimal labels for arbitrary inputs under the generating model.
std::vector<Label> synth_bayes(const SynthParams& params, const Matrix& inputs);

/// Dataset file plus `<path>.bayes` (one label per line in file grammar).
void write_synth(const std::string& path, const SynthResult& result);

}  // namespace m4n
