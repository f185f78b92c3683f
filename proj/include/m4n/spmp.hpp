#pragma once

#include "m4n/projections.hpp"

#include <optional>
#include <utility>

namespace m4n {

/// Max player state mu and min player state nu of the oracle game
/// F(nu, mu) = nu^T A mu + v^T mu.
struct SaddlePair {
  PolytopeState mu;
  PolytopeState nu;
};

struct SpmpOptions {
  int iterations = 20;              // K
  std::optional<double> eta;        // defaults to 1 / (2 L)
  std::optional<double> target_gap; // stop once the certified gap is below this
  int check_every = 10;             // certification period when target_gap is set
  SinkhornOptions sinkhorn;
};

struct OracleResult {
  PolytopeState mu_bar;   // average of the half-step max-player iterates
  PolytopeState nu_bar;   // average of the half-step min-player iterates
  SaddlePair last;        // final full-step iterates, used for warm starts
  double gap = 0.0;       // certified duality gap of (mu_bar, nu_bar)
  double upper = 0.0;     // max_mu F(nu_bar, mu) + a, upper bound on the game value
  double lower = 0.0;     // min_nu F(nu, mu_bar) + a, lower bound on the game value
  double saddle_value = 0.0;  // F(nu_bar, mu_bar) + a
  int iterations = 0;
};

struct SaddleBounds {
  double upper;  // max_mu F(nu, mu), centered
  double lower;  // min_nu F(nu, mu), centered
  double gap() const { return upper - lower; }
};

/// Exact inner max/min of the bilinear game over polytope vertices.
SaddleBounds saddle_bounds(const PolytopeState& mu, const PolytopeState& nu, const Vector& v,
                           const TaskSpec& task);

double certified_gap(const PolytopeState& mu, const PolytopeState& nu, const Vector& v,
                     const TaskSpec& task);

/// Entropy maximizers for both players.
SaddlePair uniform_pair(const TaskSpec& task);

/// Step size for simplex tasks from the l1 -> l_inf Lipschitz constant of
/// the game restricted to zero-sum directions (half the largest column span
/// of A). Sharper than 1 / (2 L) and still within the mirror-prox step
/// condition. Expressed on the same scale as SpmpOptions::eta.
double simplex_span_eta(const TaskSpec& task);

/// Saddle-point mirror prox on the max-min oracle game.
OracleResult spmp_solve(const Vector& v, const TaskSpec& task, const SpmpOptions& opts = {},
                        const std::optional<SaddlePair>& init = std::nullopt);

/// Per-example cache of the last SP-MP iterates.
class WarmStartCache {
 public:
  WarmStartCache() = default;
  WarmStartCache(std::size_t size, const TaskSpec& task);

  std::size_t size() const { return slots_.size(); }
  bool contains(std::size_t index) const;
  /// Stored pair (re-floored), or the entropy maximizer on a miss.
  SaddlePair lookup(std::size_t index) const;
  void store(std::size_t index, SaddlePair pair);
  void clear();

 private:
  std::vector<std::optional<SaddlePair>> slots_;
  SaddlePair fallback_;
};

}  // namespace m4n
