#pragma once

#include "m4n/kernel.hpp"
#include "m4n/spmp.hpp"

#include <cstdint>
#include <functional>
#include <optional>

namespace m4n {

/// Inputs are rows of `inputs`. Chain inputs are the concatenated
/// per-position features.
struct Dataset {
  Matrix inputs;
  std::vector<Label> labels;

  std::size_t size() const { return labels.size(); }
};

enum class Method { m4n, m3n };

Method parse_method(const std::string& name);
std::string to_string(Method m);

struct TrainConfig {
  Method method = Method::m4n;
  int passes = 50;
  double lambda = 0.1;
  int spmp_iters = 20;               // K
  std::optional<double> spmp_eta;    // SP-MP step; default 1 / (2 L)
  bool warm_start = true;
  std::uint64_t seed = 0;
  // Error schedule: when positive, SP-MP stops once its certified gap is
  // below n * eps_t = delta * gamma_t * k(x_i, x_i) * diam^2 / (2 lambda n),
  // running at most spmp_max_iters rounds.
  double oracle_error_delta = 0.0;
  int spmp_max_iters = 2000;
  int schedule_check_every = 5;
  bool averaging = false;            // weighted average of the iterates
  KernelSpec kernel;
  int gap_every = 1;                 // passes between dual-gap evaluations, 0 = final only
  int gap_spmp_iters = 200;          // SP-MP budget when bounding Omega* for the gap
};

struct PassRecord {
  int pass = 0;
  double dual_objective = 0.0;
  double primal_objective = 0.0;  // regularized empirical surrogate risk (upper bound)
  double dual_gap = 0.0;          // primal - dual
  double mean_oracle_gap = 0.0;   // mean certified SP-MP gap over the pass (0 for M3N)
  double mean_oracle_iters = 0.0;
  double wall_ms = 0.0;
};

struct TrainReport {
  std::uint64_t seed = 0;
  long iterations = 0;
  std::vector<PassRecord> passes;
};

class DualModel {
 public:
  DualModel(TaskSpec task, const Dataset& data, double lambda, KernelSpec kernel);

  const TaskSpec& task() const { return task_; }
  std::size_t size() const { return static_cast<std::size_t>(mu_.rows()); }
  double lambda() const { return lambda_; }
  const KernelSpec& kernel() const { return kernel_; }
  const Matrix& inputs() const { return inputs_; }

  /// Row i is mu_i.
  const Matrix& dual_mu() const { return mu_; }
  /// Row i is phi(y_i).
  const Matrix& targets() const { return targets_; }
  /// Row i is (phi(y_i) - mu_i) / (lambda n). Prediction uses the averaged
  /// coefficients when they are enabled.
  const Matrix& kernel_coeffs() const { return coeffs_; }
  const Matrix& prediction_coeffs() const { return averaged_ ? avg_coeffs_ : coeffs_; }

  PolytopeState mu_state(std::size_t i) const;
  void set_mu(std::size_t i, const Vector& mu);
  /// Recomputes every coefficient row from mu; returns the largest change.
  double rebuild_coeffs();

  void enable_averaging();
  void update_average(double rho);
  bool averaged() const { return averaged_; }

  /// g_w(x) for each row of xs.
  Matrix scores(const Matrix& xs) const;
  Label predict(const Vector& x) const;
  std::vector<Label> predict(const Matrix& xs) const;

 private:
  TaskSpec task_;
  Matrix inputs_;
  KernelSpec kernel_;
  double lambda_;
  Matrix mu_;
  Matrix targets_;
  Matrix coeffs_;
  bool averaged_ = false;
  Matrix avg_coeffs_;
};

struct TrainResult {
  DualModel model;
  TrainReport report;
};

using PassCallback = std::function<void(const PassRecord&)>;

/// Step size of the block update at global iteration t.
inline double gbcfw_step(long t, std::size_t n) {
  return 2.0 * static_cast<double>(n) / (static_cast<double>(t) + 2.0 * static_cast<double>(n));
}

/// Runs cfg.method (M4N with the SP-MP oracle, or M3N with loss-augmented
/// decoding) by block-coordinate Frank-Wolfe on the kernelized dual.
TrainResult train(const Dataset& data, const TaskSpec& task, const TrainConfig& cfg,
                  const PassCallback& on_pass = {});

TrainResult gbcfw_train(const Dataset& data, const TaskSpec& task, TrainConfig cfg,
                        const PassCallback& on_pass = {});
TrainResult m3n_train(const Dataset& data, const TaskSpec& task, TrainConfig cfg,
                      const PassCallback& on_pass = {});

struct DualityReport {
  double dual_objective;
  double primal_objective;
  double gap;
  std::vector<double> per_example_gap;
};

/// Dual objective, surrogate primal and their gap for the current model.
/// For M4N the surrogate partition function is bounded from above with an
/// SP-MP run of `spmp_iters` rounds, so the gap is an upper bound.
DualityReport evaluate_duality(const DualModel& model, Method method, int spmp_iters = 200);

double dual_gap(const DualModel& model, Method method = Method::m4n, int spmp_iters = 200);

/// Mean task loss of the predictor on (xs, labels).
double mean_loss(const DualModel& model, const Matrix& xs, const std::vector<Label>& labels);

}  // namespace m4n
