#include "m4n/calibration.hpp"

#include <algorithm>
#include <random>

namespace m4n {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix loss_matrix(const TaskSpec& task, const std::vector<Label>& labels) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  Matrix l(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) l(i, j) = direct_loss(task, labels[i], labels[j]);
  }
  return l;
}

void require_nondegenerate(const Matrix& l) {
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    for (Eigen::Index j = 0; j < l.cols(); ++j) {
      if (i != j && !(l(i, i) < l(i, j))) throw std::invalid_argument("degenerate loss: L(y,y) >= L(y,y') for y != y'");
    }
  }
}

Vector dirichlet(std::mt19937_64& rng, Eigen::Index n, double concentration) {
  std::gamma_distribution<double> g(concentration, 1.0);
  Vector a(n);
  for (Eigen::Index i = 0; i < n; ++i) a(i) = g(rng);
  const double s = a.sum();
  return s > 0.0 ? Vector(a / s) : Vector(Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

// Distributions over labels: vertices, midpoints of edges, uniform over
// every subset (when small enough), then Dirichlet draws at several
// concentrations.
std::vector<Vector> label_distributions(Eigen::Index n, int random, std::mt19937_64& rng) {
  std::vector<Vector> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(Vector::Unit(n, i));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Vector a = Vector::Zero(n);
      a(i) = a(j) = 0.5;
      out.push_back(a);
    }
  }
  if (n <= 12) {
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
      const int bits = __builtin_popcount(mask);
      if (bits < 3) continue;
      Vector a = Vector::Zero(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (mask & (1u << i)) a(i) = 1.0 / bits;
      }
      out.push_back(a);
    }
  } else {
    out.push_back(Vector::Constant(n, 1.0 / static_cast<double>(n)));
  }
  const double conc[] = {0.2, 1.0, 5.0};
  for (int s = 0; s < random; ++s) out.push_back(dirichlet(rng, n, conc[s % 3]));
  return out;
}

double constant_c_enumerated(const TaskSpec& task, int random, std::uint64_t seed) {
  const std::vector<Label> labels = enumerate_labels(task, 24);
  const Matrix l = loss_matrix(task, labels);
  require_nondegenerate(l);
  std::mt19937_64 rng(seed);
  double worst = 1.0;  // min over alpha of the smallest optimal-label mass
  for (const Vector& alpha : label_distributions(l.rows(), random, rng)) {
    const Vector risk = l * alpha;
    const double best = risk.minCoeff();
    for (Eigen::Index y = 0; y < risk.size(); ++y) {
      if (risk(y) <= best + 1e-12) worst = std::min(worst, alpha(y));
    }
  }
  return worst > 0.0 ? 1.0 / worst : kInf;
}

double excess_task_risk(const TaskSpec& task, const Vector& v, const Vector& mu) {
  const Vector pred = embed(task, decode(task, v));
  return task.loss().apply(mu).dot(pred) - centered_bayes_risk(task, mu);
}

SpmpOptions oracle_options(const TaskSpec& task, int iters) {
  SpmpOptions o;
  o.iterations = iters;
  if (task.layout().kind == Layout::Kind::simplex) o.eta = simplex_span_eta(task);
  return o;
}

struct OmegaBound {
  double upper, lower;
};

OmegaBound omega_bounds(const TaskSpec& task, const Vector& v, int iters) {
  const OracleResult r = spmp_solve(v, task, oracle_options(task, iters));
  const double a = task.loss().offset();
  return {r.upper - a, r.lower - a};
}

}  // namespace

ZetaWitness evaluate_pair(const TaskSpec& task, const Vector& v, const Vector& mu, int iters) {
  const OmegaBound om = omega_bounds(task, v, iters);
  const double base = v.dot(mu) + centered_bayes_risk(task, mu);
  ZetaWitness w;
  w.v = v;
  w.mu = mu;
  w.delta_l = excess_task_risk(task, v, mu);
  w.delta_s = om.upper - base;
  w.delta_s_lower = om.lower - base;
  return w;
}

CalibrationEstimate zeta_bruteforce(const TaskSpec& task, const std::vector<double>& epsilons,
                                    const ZetaOptions& opts) {
  const std::vector<Label> labels = enumerate_labels(task, 24);
  if (epsilons.empty()) throw std::invalid_argument("zeta_bruteforce: empty epsilon grid");
  if (task.embed_dim() > 6) {
    throw std::invalid_argument("zeta_bruteforce: embedding dimension " + std::to_string(task.embed_dim()) +
                                " exceeds the search limit of 6");
  }
  for (double e : epsilons) {
    if (!(e > 0.0)) throw std::invalid_argument("zeta_bruteforce: epsilons must be positive");
  }
  const int k = task.embed_dim();
  Matrix verts(k, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) verts.col(static_cast<Eigen::Index>(j)) = embed(task, labels[j]);

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Moment vectors from label distributions.
  std::vector<Vector> mus;
  for (const Vector& alpha : label_distributions(verts.cols(), opts.mu_samples, rng)) mus.push_back(verts * alpha);

  // Score vectors: scaled vertex directions, cell points -A^T phi(y), and
  // Gaussian draws.
  std::vector<Vector> vs;
  const LossDecomposition& loss = task.loss();
  for (Eigen::Index j = 0; j < verts.cols(); ++j) {
    vs.push_back(-loss.apply_transpose(verts.col(j)));
    vs.push_back(verts.col(j) * opts.v_scale);
  }
  vs.push_back(Vector::Zero(k));
  while (static_cast<int>(vs.size()) < opts.v_samples) {
    Vector v(k);
    for (int i = 0; i < k; ++i) v(i) = opts.v_scale * normal(rng);
    vs.push_back(v);
  }

  CalibrationEstimate est;
  est.epsilons = epsilons;
  est.zeta.assign(epsilons.size(), kInf);
  est.witnesses.assign(epsilons.size(), std::nullopt);
  est.constant_c = constant_c(task);

  std::vector<double> bayes(mus.size());
  for (std::size_t m = 0; m < mus.size(); ++m) bayes[m] = centered_bayes_risk(task, mus[m]);

  struct Best {
    double ds = kInf;
    std::size_t v = 0, mu = 0;
  };
  std::vector<Best> best(epsilons.size());
  const double eps_min = *std::min_element(epsilons.begin(), epsilons.end());
  double best_ratio = kInf;
  std::size_t ratio_v = 0, ratio_mu = 0;
  for (std::size_t vi = 0; vi < vs.size(); ++vi) {
    const Vector& v = vs[vi];
    const double omega = omega_bounds(task, v, opts.screen_iters).upper;
    const Vector pred = embed(task, decode(task, v));
    const Vector a_pred = loss.apply_transpose(pred);
    for (std::size_t m = 0; m < mus.size(); ++m) {
      ++est.pairs_evaluated;
      const double dl = a_pred.dot(mus[m]) - bayes[m];
      const double ds = omega - v.dot(mus[m]) - bayes[m];
      for (std::size_t e = 0; e < epsilons.size(); ++e) {
        if (dl >= epsilons[e] && ds < best[e].ds) best[e] = {ds, vi, m};
      }
      if (dl >= eps_min && ds / dl < best_ratio) {
        best_ratio = ds / dl;
        ratio_v = vi;
        ratio_mu = m;
      }
    }
  }

  if (std::isfinite(best_ratio)) est.ratio_witness = evaluate_pair(task, vs[ratio_v], mus[ratio_mu], opts.certify_iters);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t e = 0; e < epsilons.size(); ++e) {
    if (!std::isfinite(best[e].ds)) continue;
    ZetaWitness w = evaluate_pair(task, vs[best[e].v], mus[best[e].mu], opts.screen_iters);
    // Local refinement: shrink the perturbation when it stops helping.
    double radius = 0.25 * opts.v_scale;
    for (int r = 0; r < opts.refine_rounds; ++r, radius *= 0.985) {
      Vector v = w.v;
      for (int i = 0; i < k; ++i) v(i) += radius * normal(rng);
      const double t = 0.2 * unit(rng);
      const Vector mu = (1.0 - t) * w.mu + t * (verts * dirichlet(rng, verts.cols(), 1.0));
      const ZetaWitness cand = evaluate_pair(task, v, mu, opts.screen_iters);
      if (cand.delta_l >= epsilons[e] && cand.delta_s < w.delta_s) w = cand;
    }
    // Certify with the larger budget; both runs give valid upper bounds.
    const ZetaWitness tight = evaluate_pair(task, w.v, w.mu, opts.certify_iters);
    w.delta_s = std::min(w.delta_s, tight.delta_s);
    w.delta_s_lower = std::max(w.delta_s_lower, tight.delta_s_lower);
    est.zeta[e] = w.delta_s;
    est.witnesses[e] = w;
  }

  // A witness for a larger epsilon is feasible for every smaller one.
  std::vector<std::size_t> order(epsilons.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return epsilons[a] > epsilons[b]; });
  for (std::size_t idx = 1; idx < order.size(); ++idx) {
    const std::size_t cur = order[idx], prev = order[idx - 1];
    if (est.zeta[prev] < est.zeta[cur]) {
      est.zeta[cur] = est.zeta[prev];
      est.witnesses[cur] = est.witnesses[prev];
    }
  }
  return est;
}

double constant_c(const TaskSpec& task, int random_samples, std::uint64_t seed) {
  if (task.kind() == TaskKind::chain) {
    // Hamming loss decomposes over positions and every position is the same
    // R-class 0-1 problem.
    return constant_c_enumerated(TaskSpec::multiclass(task.states()), random_samples, seed);
  }
  return constant_c_enumerated(task, random_samples, seed);
}

PermutationDecomposition ranking_d_bound(int M) {
  if (M < 1 || M > 8) throw std::invalid_argument("ranking_d_bound: M must be in [1, 8]");
  PermutationDecomposition out;
  Matrix sum = Matrix::Zero(M, M);
  for (int s = 0; s < M; ++s) {
    Label perm(M);
    for (int m = 0; m < M; ++m) perm[m] = (m + s) % M + 1;
    const double w = 1.0 / M;
    for (int m = 0; m < M; ++m) sum(m, perm[m] - 1) += w;
    out.permutations.push_back(perm);
    out.weights.push_back(w);
  }
  out.max_error = (sum.array() - 1.0 / M).abs().maxCoeff();
  out.d_bound = static_cast<double>(out.permutations.size());
  return out;
}

}  // namespace m4n
