#include "m4n/trainer.hpp"

#include <chrono>
#include <random>
#include <sstream>

namespace m4n {

Method parse_method(const std::string& name) {
  if (name == "m4n") return Method::m4n;
  if (name == "m3n") return Method::m3n;
  throw std::invalid_argument("unknown method '" + name + "' (expected m4n or m3n)");
}

std::string to_string(Method m) { return m == Method::m4n ? "m4n" : "m3n"; }

DualModel::DualModel(TaskSpec task, const Dataset& data, double lambda, KernelSpec kernel)
    : task_(std::move(task)), inputs_(data.inputs), kernel_(kernel), lambda_(lambda) {
  const auto n = static_cast<Eigen::Index>(data.size());
  if (n == 0) throw std::invalid_argument("training set is empty");
  if (inputs_.rows() != n) throw LayoutMismatch("dataset: inputs and labels have different lengths");
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  const int k = task_.embed_dim();
  targets_.resize(n, k);
  for (Eigen::Index i = 0; i < n; ++i) targets_.row(i) = embed(task_, data.labels[i]).transpose();
  mu_ = targets_;
  coeffs_ = Matrix::Zero(n, k);
}

PolytopeState DualModel::mu_state(std::size_t i) const {
  return {task_.layout(), mu_.row(static_cast<Eigen::Index>(i)).transpose()};
}

void DualModel::set_mu(std::size_t i, const Vector& mu) {
  const auto r = static_cast<Eigen::Index>(i);
  mu_.row(r) = mu.transpose();
  coeffs_.row(r) = (targets_.row(r) - mu_.row(r)) / (lambda_ * static_cast<double>(size()));
}

double DualModel::rebuild_coeffs() {
  const Matrix fresh = (targets_ - mu_) / (lambda_ * static_cast<double>(size()));
  const double diff = (fresh - coeffs_).cwiseAbs().maxCoeff();
  coeffs_ = fresh;
  return diff;
}

void DualModel::enable_averaging() {
  averaged_ = true;
  avg_coeffs_ = coeffs_;
}

void DualModel::update_average(double rho) { avg_coeffs_ = (1.0 - rho) * avg_coeffs_ + rho * coeffs_; }

Matrix DualModel::scores(const Matrix& xs) const {
  if (xs.cols() != inputs_.cols()) {
    std::ostringstream os;
    os << "predict: inputs have " << xs.cols() << " features, model expects " << inputs_.cols();
    throw LayoutMismatch(os.str());
  }
  return cross_gram(xs, inputs_, kernel_) * prediction_coeffs();
}

Label DualModel::predict(const Vector& x) const {
  const Matrix s = scores(x.transpose());
  return decode(task_, s.row(0).transpose());
}

std::vector<Label> DualModel::predict(const Matrix& xs) const {
  const Matrix s = scores(xs);
  std::vector<Label> out;
  out.reserve(static_cast<std::size_t>(xs.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) out.push_back(decode(task_, s.row(i).transpose()));
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

void validate(const Dataset& data, const TaskSpec& task, const TrainConfig& cfg) {
  if (data.size() == 0) throw std::invalid_argument("training set is empty");
  if (!(cfg.lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (cfg.spmp_iters < 1) throw std::invalid_argument("spmp iterations must be >= 1");
  if (cfg.passes < 0) throw std::invalid_argument("passes must be >= 0");
  if (!data.inputs.allFinite()) throw NonFiniteInput("training inputs contain non-finite values");
  for (std::size_t i = 0; i < data.size(); ++i) {
    try {
      validate_label(task, data.labels[i]);
    } catch (const InvalidLabel& e) {
      throw InvalidLabel("example " + std::to_string(i) + ": " + e.what());
    }
  }
}

// Shared skeleton: `direction(i, g_i, t)` returns the Frank-Wolfe vertex or
// oracle answer for block i and the certified oracle gap.
struct Direction {
  Vector mu;
  double oracle_gap = 0.0;
  int oracle_iters = 0;
};

template <class DirectionFn>
TrainResult run_bcfw(const Dataset& data, const TaskSpec& task, const TrainConfig& cfg,
                     const PassCallback& on_pass, DirectionFn&& direction) {
  validate(data, task, cfg);
  DualModel model(task, data, cfg.lambda, cfg.kernel);
  if (cfg.averaging) model.enable_averaging();
  const KernelRows rows(data.inputs, cfg.kernel);
  for (Eigen::Index i = 0; i < rows.size(); ++i) {
    if (!std::isfinite(rows.diag(i))) throw NonFiniteInput("kernel produced a non-finite value");
  }

  const std::size_t n = data.size();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  TrainReport report;
  report.seed = cfg.seed;
  long t = 0;
  const auto start = Clock::now();
  for (int pass = 1; pass <= cfg.passes; ++pass) {
    double gap_sum = 0.0, iter_sum = 0.0;
    for (std::size_t step = 0; step < n; ++step, ++t) {
      const std::size_t i = pick(rng);
      const Vector k_row = rows.row(static_cast<Eigen::Index>(i));
      const Vector g = model.kernel_coeffs().transpose() * k_row;
      if (!g.allFinite()) throw TrainingFailure("non-finite scores at iteration " + std::to_string(t));
      Direction d;
      try {
        d = direction(i, g, t, rows.diag(static_cast<Eigen::Index>(i)));
      } catch (const std::exception& e) {
        std::ostringstream os;
        os << "oracle failed at pass " << pass << ", iteration " << t << ", example " << i << ": "
           << e.what();
        throw TrainingFailure(os.str());
      }
      const double gamma = gbcfw_step(t, n);
      const Vector mu_i = model.dual_mu().row(static_cast<Eigen::Index>(i)).transpose();
      model.set_mu(i, (1.0 - gamma) * mu_i + gamma * d.mu);
      if (model.averaged()) model.update_average(2.0 / (static_cast<double>(t) + 2.0));
      gap_sum += d.oracle_gap;
      iter_sum += d.oracle_iters;
    }
    PassRecord rec;
    rec.pass = pass;
    rec.mean_oracle_gap = gap_sum / static_cast<double>(n);
    rec.mean_oracle_iters = iter_sum / static_cast<double>(n);
    const bool want_gap =
        (cfg.gap_every > 0 && pass % cfg.gap_every == 0) || pass == cfg.passes;
    if (want_gap) {
      const DualityReport dr = evaluate_duality(model, cfg.method, cfg.gap_spmp_iters);
      rec.dual_objective = dr.dual_objective;
      rec.primal_objective = dr.primal_objective;
      rec.dual_gap = dr.gap;
    } else {
      rec.dual_objective = rec.primal_objective = rec.dual_gap = std::nan("");
    }
    rec.wall_ms = elapsed_ms(start);
    report.passes.push_back(rec);
    if (on_pass) on_pass(rec);
  }
  report.iterations = t;
  model.rebuild_coeffs();
  return {std::move(model), std::move(report)};
}

}  // namespace

TrainResult gbcfw_train(const Dataset& data, const TaskSpec& task, TrainConfig cfg,
                        const PassCallback& on_pass) {
  cfg.method = Method::m4n;
  WarmStartCache cache(data.size(), task);
  const double diam2 = task.diameter() * task.diameter();
  const double n = static_cast<double>(data.size());
  auto direction = [&](std::size_t i, const Vector& g, long t, double k_ii) {
    SpmpOptions opts;
    opts.iterations = cfg.spmp_iters;
    opts.eta = cfg.spmp_eta;
    if (cfg.oracle_error_delta > 0.0) {
      opts.iterations = std::max(cfg.spmp_iters, cfg.spmp_max_iters);
      opts.check_every = std::max(1, cfg.schedule_check_every);
      opts.target_gap = 0.5 * cfg.oracle_error_delta * gbcfw_step(t, data.size()) * k_ii * diam2 /
                        (cfg.lambda * n);
    }
    std::optional<SaddlePair> init;
    if (cfg.warm_start) init = cache.lookup(i);
    OracleResult r = spmp_solve(g, task, opts, init);
    if (cfg.warm_start) cache.store(i, std::move(r.last));
    return Direction{std::move(r.mu_bar.values), r.gap, r.iterations};
  };
  return run_bcfw(data, task, cfg, on_pass, direction);
}

TrainResult m3n_train(const Dataset& data, const TaskSpec& task, TrainConfig cfg,
                      const PassCallback& on_pass) {
  cfg.method = Method::m3n;
  const LossDecomposition& loss = task.loss();
  std::vector<Vector> aug(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) aug[i] = loss.apply_transpose(embed(task, data.labels[i]));
  auto direction = [&](std::size_t i, const Vector& g, long, double) {
    return Direction{embed(task, decode(task, g + aug[i])), 0.0, 0};
  };
  return run_bcfw(data, task, cfg, on_pass, direction);
}

TrainResult train(const Dataset& data, const TaskSpec& task, const TrainConfig& cfg,
                  const PassCallback& on_pass) {
  return cfg.method == Method::m4n ? gbcfw_train(data, task, cfg, on_pass)
                                   : m3n_train(data, task, cfg, on_pass);
}

DualityReport evaluate_duality(const DualModel& model, Method method, int spmp_iters) {
  const TaskSpec& task = model.task();
  const LossDecomposition& loss = task.loss();
  const std::size_t n = model.size();
  const Matrix& c = model.kernel_coeffs();
  const Matrix scores = gram(model.inputs(), model.kernel()) * c;
  const double reg = 0.5 * model.lambda() * (c.transpose() * scores).trace();

  DualityReport out;
  out.per_example_gap.resize(n);
  double bayes_sum = 0.0, surrogate_sum = 0.0;
  SpmpOptions opts;
  opts.iterations = spmp_iters;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const Vector g = scores.row(r).transpose();
    const Vector mu = model.dual_mu().row(r).transpose();
    const Vector phi = model.targets().row(r).transpose();
    double risk, omega;  // centered dual term and upper bound on the conjugate
    if (method == Method::m4n) {
      risk = centered_bayes_risk(task, mu);
      omega = spmp_solve(g, task, opts).upper - loss.offset();
    } else {
      const Vector aug = loss.apply_transpose(phi);
      risk = aug.dot(mu);
      omega = max_score(task, g + aug);
    }
    out.per_example_gap[i] = omega - g.dot(mu) - risk;
    bayes_sum += risk;
    surrogate_sum += omega - g.dot(phi);
  }
  const double nn = static_cast<double>(n);
  out.dual_objective = bayes_sum / nn - reg + loss.offset();
  out.primal_objective = surrogate_sum / nn + reg + loss.offset();
  out.gap = out.primal_objective - out.dual_objective;
  return out;
}

double dual_gap(const DualModel& model, Method method, int spmp_iters) {
  return evaluate_duality(model, method, spmp_iters).gap;
}

double mean_loss(const DualModel& model, const Matrix& xs, const std::vector<Label>& labels) {
  if (static_cast<std::size_t>(xs.rows()) != labels.size()) {
    throw LayoutMismatch("mean_loss: inputs and labels have different lengths");
  }
  if (labels.empty()) return 0.0;
  const std::vector<Label> pred = model.predict(xs);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) total += direct_loss(model.task(), pred[i], labels[i]);
  return total / static_cast<double>(labels.size());
}

}  // namespace m4n
