#include "m4n/spmp.hpp"

#include <sstream>

namespace m4n {
namespace {

enum class Player { max, min };

const char* player_name(Player p) { return p == Player::max ? "max (mu)" : "min (nu)"; }

// One mirror step for either player. The max player ascends along `grad`,
// the min player descends, so the caller passes the already signed direction.
PolytopeState mirror_step(const PolytopeState& prev, const Vector& direction, double eta,
                          Player player, const SinkhornOptions& sinkhorn) {
  switch (prev.layout.kind) {
    case Layout::Kind::simplex:
      return {prev.layout, project_simplex_entropic(prev.values, direction, eta)};
    case Layout::Kind::chain:
      // The loss only couples unaries, so the min player lives on the product
      // of simplices.
      return player == Player::max ? project_chain_entropic(prev, direction, eta)
                                   : project_chain_product(prev, direction, eta);
    case Layout::Kind::birkhoff: {
      const int M = prev.layout.parts;
      const Matrix q = prev.values.reshaped<Eigen::RowMajor>(M, M);
      const Matrix g = direction.reshaped<Eigen::RowMajor>(M, M);
      const SinkhornResult r = project_birkhoff_sinkhorn(q, g, eta, sinkhorn);
      return {prev.layout, r.plan.reshaped<Eigen::RowMajor>()};
    }
  }
  return prev;
}

void require_layout(const TaskSpec& task, const PolytopeState& s, const char* what) {
  if (!(s.layout == task.layout()) || s.values.size() != task.embed_dim()) {
    throw LayoutMismatch(std::string(what) + " has layout " + to_string(s.layout) + ", task " +
                         task.name() + " needs " + to_string(task.layout()));
  }
}

}  // namespace

SaddleBounds saddle_bounds(const PolytopeState& mu, const PolytopeState& nu, const Vector& v,
                           const TaskSpec& task) {
  require_layout(task, mu, "mu");
  require_layout(task, nu, "nu");
  if (v.size() != task.embed_dim()) throw LayoutMismatch("score vector has the wrong dimension");
  const LossDecomposition& loss = task.loss();
  SaddleBounds b;
  b.upper = max_score(task, loss.apply_transpose(nu.values) + v);
  b.lower = centered_bayes_risk(task, mu.values) + v.dot(mu.values);
  return b;
}

double certified_gap(const PolytopeState& mu, const PolytopeState& nu, const Vector& v,
                     const TaskSpec& task) {
  return saddle_bounds(mu, nu, v, task).gap();
}

double simplex_span_eta(const TaskSpec& task) {
  if (task.layout().kind != Layout::Kind::simplex) {
    throw std::invalid_argument("simplex_span_eta: task " + task.name() + " is not a simplex task");
  }
  const Matrix a = task.loss().to_dense();
  double span = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) span = std::max(span, a.col(j).maxCoeff() - a.col(j).minCoeff());
  if (span <= 0.0) throw std::invalid_argument("simplex_span_eta: loss matrix has constant columns");
  return (2.0 / span) / spmp_constants(task).range_max;
}

SaddlePair uniform_pair(const TaskSpec& task) {
  return {uniform_state(task.layout()), uniform_state(task.layout())};
}

OracleResult spmp_solve(const Vector& v, const TaskSpec& task, const SpmpOptions& opts,
                        const std::optional<SaddlePair>& init) {
  if (opts.iterations < 1) throw std::invalid_argument("spmp: iteration budget must be >= 1");
  if (v.size() != task.embed_dim()) throw LayoutMismatch("spmp: score vector has the wrong dimension");
  if (!v.allFinite()) throw NonFiniteInput("spmp: non-finite score vector");
  const MirrorMap mm = spmp_constants(task);
  const double eta = opts.eta ? *opts.eta : mm.default_eta();
  if (!(eta > 0.0)) throw std::invalid_argument("spmp: eta must be positive");
  // The joint mirror map weights each player's entropy by 1 / R^2, so the
  // per-player step on the raw entropy is eta * R^2.
  const double eta_mu = eta * mm.range_max;
  const double eta_nu = eta * mm.range_min;

  SaddlePair cur = init ? *init : uniform_pair(task);
  require_layout(task, cur.mu, "initial mu");
  require_layout(task, cur.nu, "initial nu");
  apply_floor(cur.mu);
  apply_floor(cur.nu);

  const LossDecomposition& loss = task.loss();
  Vector mu_sum = Vector::Zero(task.embed_dim());
  Vector nu_sum = Vector::Zero(task.embed_dim());

  auto step = [&](const PolytopeState& prev, const Vector& dir, Player who, int k) {
    try {
      return mirror_step(prev, dir, who == Player::max ? eta_mu : eta_nu, who, opts.sinkhorn);
    } catch (const ConvergenceFailure& e) {
      std::ostringstream os;
      os << "spmp iteration " << k << ", " << player_name(who) << " player: " << e.what();
      throw ConvergenceFailure(os.str(), e.residual);
    }
  };

  OracleResult res;
  int k = 0;
  while (k < opts.iterations) {
    // Extra-gradient: half steps from the current point, then full steps
    // from the same point using the half-step gradients.
    const PolytopeState mu_half = step(cur.mu, loss.apply_transpose(cur.nu.values) + v, Player::max, k);
    const PolytopeState nu_half = step(cur.nu, -loss.apply(cur.mu.values), Player::min, k);
    cur.mu = step(cur.mu, loss.apply_transpose(nu_half.values) + v, Player::max, k);
    cur.nu = step(cur.nu, -loss.apply(mu_half.values), Player::min, k);
    mu_sum += mu_half.values;
    nu_sum += nu_half.values;
    ++k;
    if (opts.target_gap && k < opts.iterations && k % std::max(1, opts.check_every) == 0) {
      const PolytopeState mb{task.layout(), mu_sum / k};
      const PolytopeState nb{task.layout(), nu_sum / k};
      if (certified_gap(mb, nb, v, task) <= *opts.target_gap) break;
    }
  }

  res.iterations = k;
  res.mu_bar = {task.layout(), mu_sum / k};
  res.nu_bar = {task.layout(), nu_sum / k};
  res.last = std::move(cur);
  const SaddleBounds b = saddle_bounds(res.mu_bar, res.nu_bar, v, task);
  const double a = loss.offset();
  res.upper = b.upper + a;
  res.lower = b.lower + a;
  res.gap = b.gap();
  res.saddle_value = loss.bilinear(res.nu_bar.values, res.mu_bar.values) + v.dot(res.mu_bar.values) + a;
  return res;
}

WarmStartCache::WarmStartCache(std::size_t size, const TaskSpec& task)
    : slots_(size), fallback_(uniform_pair(task)) {}

bool WarmStartCache::contains(std::size_t index) const {
  return index < slots_.size() && slots_[index].has_value();
}

SaddlePair WarmStartCache::lookup(std::size_t index) const {
  if (!contains(index)) return fallback_;
  SaddlePair p = *slots_[index];
  apply_floor(p.mu);
  apply_floor(p.nu);
  return p;
}

void WarmStartCache::store(std::size_t index, SaddlePair pair) {
  if (index >= slots_.size()) throw std::out_of_range("warm-start cache index out of range");
  slots_[index] = std::move(pair);
}

void WarmStartCache::clear() {
  for (auto& s : slots_) s.reset();
}

}  // namespace m4n
