#include "m4n/projections.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace m4n {
namespace {

double log_sum_exp(const Vector& x) {
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((x.array() - m).exp().sum());
}

double row_residual(const Matrix& log_k) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < log_k.rows(); ++i) r += std::abs(log_k.row(i).array().exp().sum() - 1.0);
  return r;
}

void normalize_columns(Matrix& log_k) {
  for (Eigen::Index j = 0; j < log_k.cols(); ++j) log_k.col(j).array() -= log_sum_exp(log_k.col(j));
}

// Damped Newton on phi(f, g) = sum_ij exp(log_k_ij + f_i + g_j) - sum f - sum g,
// whose minimizer gives the same scaling as Sinkhorn. The last column
// potential is pinned to remove the (1, -1) null direction.
void newton_scaling(Matrix& log_k, double tol, int max_steps, SinkhornResult& res, bool keep_trace) {
  const Eigen::Index M = log_k.rows();
  auto phi = [&](const Matrix& lk) { return lk.array().exp().sum(); };
  for (int step = 0; step < max_steps && res.residual > tol; ++step) {
    const Matrix q = log_k.array().exp().matrix();
    const Vector r = q.rowwise().sum(), c = q.colwise().sum().transpose();
    const Eigen::Index n = 2 * M - 1;
    Matrix h = Matrix::Zero(n, n);
    Vector grad(n);
    h.topLeftCorner(M, M).diagonal() = r;
    h.bottomRightCorner(M - 1, M - 1).diagonal() = c.head(M - 1);
    h.topRightCorner(M, M - 1) = q.leftCols(M - 1);
    h.bottomLeftCorner(M - 1, M) = q.leftCols(M - 1).transpose();
    grad << r.array() - 1.0, c.head(M - 1).array() - 1.0;
    const Vector d = -h.ldlt().solve(grad);
    if (!d.allFinite()) break;
    // Backtracking on phi, falling back to the gradient norm once the decrease
    // in phi drops below rounding.
    const double phi0 = phi(log_k), gnorm0 = grad.norm();
    double t = 1.0;
    Matrix trial;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      trial = log_k;
      trial.colwise() += t * d.head(M);
      for (Eigen::Index j = 0; j + 1 < M; ++j) trial.col(j).array() += t * d(M + j);
      if (phi(trial) - t * d.sum() <= phi0 + 1e-4 * t * grad.dot(d)) break;
      const Matrix tq = trial.array().exp().matrix();
      Vector tg(n);
      tg << tq.rowwise().sum().array() - 1.0, tq.colwise().sum().transpose().head(M - 1).array() - 1.0;
      if (tg.norm() <= (1.0 - 1e-4 * t) * gnorm0) break;
    }
    log_k = trial;
    normalize_columns(log_k);
    res.residual = row_residual(log_k);
    ++res.iterations;
    if (keep_trace) res.residual_trace.push_back(res.residual);
  }
}

void require_chain(const PolytopeState& s, const Vector& grad) {
  if (s.layout.kind != Layout::Kind::chain) {
    throw LayoutMismatch("chain projection called on " + to_string(s.layout));
  }
  if (s.values.size() != s.layout.dim() || grad.size() != s.layout.dim()) {
    throw LayoutMismatch("chain projection: vector size does not match " + to_string(s.layout));
  }
  if (!grad.allFinite()) throw NonFiniteInput("chain projection: non-finite gradient");
}

}  // namespace

double chain_entropy(const PolytopeState& mu) {
  const Layout& l = mu.layout;
  const int R = l.states;
  if (l.parts == 1) return shannon_entropy(mu.values.head(R));
  double h = 0.0;
  for (int p = 0; p + 1 < l.parts; ++p) h += shannon_entropy(mu.values.segment(l.pairwise_offset(p), R * R));
  for (int m = 1; m + 1 < l.parts; ++m) h -= shannon_entropy(mu.values.segment(l.unary_offset(m), R));
  return h;
}

double marginal_entropy(const Matrix& q) { return shannon_entropy(q.reshaped()); }

double layout_entropy(const PolytopeState& mu) {
  switch (mu.layout.kind) {
    case Layout::Kind::simplex:
      return shannon_entropy(mu.values);
    case Layout::Kind::chain:
      return chain_entropy(mu);
    case Layout::Kind::birkhoff:
      return shannon_entropy(mu.values);
  }
  return 0.0;
}

PolytopeState chain_marginals(const Matrix& unary, const std::vector<Matrix>& pairwise) {
  const int M = static_cast<int>(unary.rows());
  const int R = static_cast<int>(unary.cols());
  if (!unary.allFinite()) throw NonFiniteInput("sum-product: non-finite unary potentials");
  for (const Matrix& p : pairwise) {
    if (!p.allFinite()) throw NonFiniteInput("sum-product: non-finite pairwise potentials");
  }

  std::vector<Vector> alpha(M), beta(M);
  alpha[0] = unary.row(0).transpose();
  Vector tmp(R);
  for (int m = 1; m < M; ++m) {
    alpha[m].resize(R);
    for (int s = 0; s < R; ++s) {
      tmp = alpha[m - 1] + pairwise[m - 1].col(s);
      alpha[m](s) = unary(m, s) + log_sum_exp(tmp);
    }
  }
  beta[M - 1] = Vector::Zero(R);
  for (int m = M - 2; m >= 0; --m) {
    beta[m].resize(R);
    const Vector next = unary.row(m + 1).transpose() + beta[m + 1];
    for (int r = 0; r < R; ++r) {
      tmp = pairwise[m].row(r).transpose() + next;
      beta[m](r) = log_sum_exp(tmp);
    }
  }
  const double log_z = log_sum_exp(alpha[M - 1]);

  const Layout layout = Layout::chain(M, R);
  PolytopeState out{layout, Vector(layout.dim())};
  for (int m = 0; m < M; ++m) {
    Vector u = (alpha[m] + beta[m]).array() - log_z;
    out.values.segment(layout.unary_offset(m), R) = u.array().exp().matrix();
  }
  for (int p = 0; p + 1 < M; ++p) {
    const Vector next = unary.row(p + 1).transpose() + beta[p + 1];
    auto block = out.values.segment(layout.pairwise_offset(p), R * R);
    for (int r = 0; r < R; ++r) {
      for (int s = 0; s < R; ++s) {
        block(r * R + s) = std::exp(alpha[p](r) + pairwise[p](r, s) + next(s) - log_z);
      }
    }
  }
  return out;
}

PolytopeState project_chain_entropic(const PolytopeState& prev, const Vector& grad, double eta) {
  require_chain(prev, grad);
  if (!(eta > 0.0)) throw std::invalid_argument("chain projection: eta must be positive");
  const Layout& l = prev.layout;
  const int M = l.parts;
  const int R = l.states;
  const Vector logp = prev.values.cwiseMax(kProbabilityFloor).array().log().matrix();

  // Canonical parameters of the maximum-entropy chain with marginals `prev`:
  // p(y) = prod_p mu_p(y_p, y_{p+1}) / prod_{interior m} mu_m(y_m).
  Matrix unary(M, R);
  std::vector<Matrix> pairwise(M - 1);
  for (int m = 0; m < M; ++m) {
    Vector theta = Vector::Zero(R);
    if (M == 1) {
      theta = logp.segment(l.unary_offset(0), R);
    } else if (m > 0 && m + 1 < M) {
      theta = -logp.segment(l.unary_offset(m), R);
    }
    unary.row(m) = (theta + eta * grad.segment(l.unary_offset(m), R)).transpose();
  }
  for (int p = 0; p + 1 < M; ++p) {
    const Vector theta = logp.segment(l.pairwise_offset(p), R * R) + eta * grad.segment(l.pairwise_offset(p), R * R);
    pairwise[p] = theta.reshaped<Eigen::RowMajor>(R, R);
  }
  PolytopeState out = chain_marginals(unary, pairwise);
  apply_floor(out);
  return out;
}

PolytopeState project_chain_product(const PolytopeState& prev, const Vector& grad, double eta) {
  require_chain(prev, grad);
  const Layout& l = prev.layout;
  const int R = l.states;
  PolytopeState out{l, Vector(l.dim())};
  for (int m = 0; m < l.parts; ++m) {
    out.values.segment(l.unary_offset(m), R) = project_simplex_entropic(
        prev.values.segment(l.unary_offset(m), R), grad.segment(l.unary_offset(m), R), eta);
  }
  for (int p = 0; p + 1 < l.parts; ++p) {
    const Vector a = out.values.segment(l.unary_offset(p), R);
    const Vector b = out.values.segment(l.unary_offset(p + 1), R);
    const Matrix outer = a * b.transpose();
    out.values.segment(l.pairwise_offset(p), R * R) = outer.reshaped<Eigen::RowMajor>();
  }
  return out;
}

SinkhornResult project_birkhoff_sinkhorn(const Matrix& prev, const Matrix& grad, double eta,
                                         const SinkhornOptions& opts, bool keep_trace) {
  const Eigen::Index M = prev.rows();
  if (prev.cols() != M || grad.rows() != M || grad.cols() != M || M == 0) {
    throw LayoutMismatch("sinkhorn: expected matching square matrices");
  }
  if (!grad.allFinite()) throw NonFiniteInput("sinkhorn: non-finite gradient");
  if (!(eta > 0.0)) throw std::invalid_argument("sinkhorn: eta must be positive");

  Matrix log_k = prev.cwiseMax(kProbabilityFloor).array().log().matrix() + eta * grad;
  SinkhornResult res;
  const int scaling_rounds = opts.newton_after >= 0 ? std::min(opts.max_iter, opts.newton_after) : opts.max_iter;
  for (int it = 0; it < scaling_rounds; ++it) {
    for (Eigen::Index i = 0; i < M; ++i) log_k.row(i).array() -= log_sum_exp(log_k.row(i).transpose());
    normalize_columns(log_k);
    // Columns are exact after the column pass; the residual lives in the rows.
    res.residual = row_residual(log_k);
    res.iterations = it + 1;
    if (keep_trace) res.residual_trace.push_back(res.residual);
    if (res.residual <= opts.tol) break;
  }
  if (res.residual > opts.tol && scaling_rounds < opts.max_iter && M > 1) {
    newton_scaling(log_k, opts.tol, opts.max_iter - scaling_rounds, res, keep_trace);
  }
  if (res.residual > 10.0 * opts.tol) {
    std::ostringstream os;
    os << "sinkhorn did not converge in " << opts.max_iter << " iterations (residual " << res.residual
       << ", tol " << opts.tol << ")";
    throw ConvergenceFailure(os.str(), res.residual);
  }
  res.plan = log_k.array().exp().matrix().cwiseMax(kProbabilityFloor);
  return res;
}

MirrorMap spmp_constants(const TaskSpec& task) {
  MirrorMap mm;
  mm.kind = task.kind();
  const Layout& l = task.layout();
  if (task.kind() == TaskKind::ranking) {
    // Marginal entropy, l1 geometry on both players.
    const double M = l.parts;
    mm.sigma = 1.0;
    mm.range_min = mm.range_max = M;
    mm.beta11 = mm.beta12 = 0.0;
    mm.beta21 = mm.beta22 = 1.0;
  } else {
    // Multiclass and ordinal are chains of length one.
    const int M = task.kind() == TaskKind::chain ? l.parts : 1;
    const int R = l.states;
    const double diam = task.diameter();
    mm.sigma = 1.0 / (diam * diam);
    mm.range_min = mm.range_max = M * std::log(static_cast<double>(R));
    mm.beta11 = 0.0;
    mm.beta21 = 0.0;
    mm.beta12 = task.loss().part_inf_norm();
    mm.beta22 = task.loss().part_spectral_norm() / mm.sigma;
  }
  const double rq = std::sqrt(mm.range_min);
  const double rm = std::sqrt(mm.range_max);
  mm.lipschitz = std::max({mm.beta11 * mm.range_min, mm.beta22 * mm.range_max, mm.beta12 * rq * rm,
                           mm.beta21 * rq * rm});
  return mm;
}

}  // namespace m4n
