#pragma once

#include "m4n/spmp.hpp"

#include <cstdint>
#include <limits>
#include <optional>

namespace m4n {

/// A feasible pair for the calibration problem. delta_s is bracketed by the
/// SP-MP bounds on the partition function.
struct ZetaWitness {
  Vector v;
  Vector mu;
  double delta_l = 0.0;        // excess task risk of decode(v) under mu
  double delta_s = 0.0;        // excess surrogate risk (upper bound)
  double delta_s_lower = 0.0;  // excess surrogate risk (lower bound)
};

struct CalibrationEstimate {
  std::vector<double> epsilons;
  // Smallest excess surrogate risk found among pairs with delta_l >= eps,
  // +inf when the search found no feasible pair. The true infimum can only
  // be smaller.
  std::vector<double> zeta;
  std::vector<std::optional<ZetaWitness>> witnesses;
  std::size_t pairs_evaluated = 0;
  // Pair with the smallest delta_s / delta_l among screened pairs with
  // delta_l >= min(epsilons), re-certified at the larger budget.
  std::optional<ZetaWitness> ratio_witness;
  double constant_c = 0.0;
};

struct ZetaOptions {
  int v_samples = 2000;
  int mu_samples = 50;       // v_samples * mu_samples pairs are screened
  int refine_rounds = 200;   // local perturbation steps per epsilon
  int screen_iters = 200;    // SP-MP budget while screening
  int certify_iters = 5000;  // SP-MP budget for reported witnesses
  double v_scale = 2.0;
  std::uint64_t seed = 0;
};

/// Randomized search for the calibration function on a small task.
CalibrationEstimate zeta_bruteforce(const TaskSpec& task, const std::vector<double>& epsilons,
                                    const ZetaOptions& opts = {});

/// Excess surrogate and task risks of a single pair, with Omega* bounded by
/// SP-MP at `iters` rounds.
ZetaWitness evaluate_pair(const TaskSpec& task, const Vector& v, const Vector& mu, int iters);

/// Smallest C such that every Bayes-optimal label has probability >= 1 / C,
/// estimated over structured and random conditional distributions. Chains use
/// the decomposable bound max_m C_m. Returns +inf when an optimal label can
/// have zero probability.
double constant_c(const TaskSpec& task, int random_samples = 20000, std::uint64_t seed = 0);

struct PermutationDecomposition {
  std::vector<Label> permutations;
  std::vector<double> weights;
  double max_error = 0.0;  // max |sum_s w_s P_s - 11^T / M| entrywise
  double d_bound = 0.0;    // number of permutations used
};

/// Decomposes the uniform doubly stochastic matrix into M cyclic shifts.
PermutationDecomposition ranking_d_bound(int M);

}  // namespace m4n
