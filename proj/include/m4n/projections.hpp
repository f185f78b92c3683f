#pragma once

#include "m4n/task.hpp"

#include <cmath>

namespace m4n {

/// Shannon entropy -sum q log q (0 log 0 = 0).
template <class Derived>
double shannon_entropy(const Eigen::MatrixBase<Derived>& q) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const double x = q.derived().coeff(i);
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

/// Exponentiated-gradient step on the simplex: the minimizer of
/// -eta <mu, grad> + KL(mu, prev), i.e. prev * exp(eta * grad) normalized.
/// Callers pass the signed gradient of their own objective (negate it for a
/// descent step).
template <class D1, class D2>
Vector project_simplex_entropic(const Eigen::MatrixBase<D1>& prev, const Eigen::MatrixBase<D2>& grad,
                                double eta) {
  if (prev.size() != grad.size()) throw LayoutMismatch("simplex step: size mismatch");
  if (!grad.allFinite()) throw NonFiniteInput("simplex step: non-finite gradient");
  if (!(eta > 0.0)) throw std::invalid_argument("simplex step: eta must be positive");
  Vector logits = prev.derived().cwiseMax(kProbabilityFloor).array().log().matrix() + eta * grad;
  logits.array() -= logits.maxCoeff();
  Vector out = logits.array().exp().matrix();
  out /= out.sum();
  out = out.cwiseMax(kProbabilityFloor);
  return out / out.sum();
}

/// Junction-tree entropy of chain marginals: pairwise entropies minus the
/// entropies of interior unaries. For M = 1 it is the unary entropy.
double chain_entropy(const PolytopeState& mu);

/// Entropy of the marginals -sum Q_ij log Q_ij.
double marginal_entropy(const Matrix& q);

/// Entropy matching the layout (simplex Shannon, chain junction tree,
/// Birkhoff marginal entropy).
double layout_entropy(const PolytopeState& mu);

/// Bregman projection on the chain marginal polytope: marginals of the chain
/// distribution whose log-potentials are the canonical parameters of `prev`
/// shifted by eta * grad. Runs log-domain sum-product.
PolytopeState project_chain_entropic(const PolytopeState& prev, const Vector& grad, double eta);

/// Log-domain sum-product on a chain with unary (M x R) and pairwise
/// log-potentials. Returns chain marginals in the standard layout.
PolytopeState chain_marginals(const Matrix& unary, const std::vector<Matrix>& pairwise);

/// Per-position exponentiated-gradient step on a chain-layout state whose
/// pairwise blocks are the outer products of adjacent unaries (a product of
/// simplices embedded in the chain polytope). Pairwise gradient entries are
/// ignored.
PolytopeState project_chain_product(const PolytopeState& prev, const Vector& grad, double eta);

struct SinkhornOptions {
  double tol = 1e-9;
  int max_iter = 10000;
  // Near the boundary of the polytope plain scaling converges sublinearly.
  // After this many scaling rounds without reaching tol, damped Newton steps
  // on the same dual problem finish the job. Negative disables the switch.
  int newton_after = 20;
};

struct SinkhornResult {
  Matrix plan;
  int iterations = 0;
  double residual = 0.0;  // max L1 row/column deviation at exit
  std::vector<double> residual_trace;  // residual after every iteration
};

/// Bregman projection on the Birkhoff polytope under the marginal entropy:
/// Sinkhorn-Knopp scaling of prev * exp(eta * grad), polished by Newton on
/// the scaling potentials when it stalls. Throws ConvergenceFailure when the
/// iteration budget is spent with residual above 10 * tol.
SinkhornResult project_birkhoff_sinkhorn(const Matrix& prev, const Matrix& grad, double eta,
                                         const SinkhornOptions& opts = {}, bool keep_trace = false);

/// Mirror map and smoothness constants used to pick the SP-MP step size.
struct MirrorMap {
  TaskKind kind;
  double sigma = 1.0;         // strong concavity of the max-player entropy
  double range_min = 0.0;     // R_Q^2, entropy range of the min player
  double range_max = 0.0;     // R_M^2, entropy range of the max player
  double beta11 = 0.0, beta12 = 0.0, beta21 = 0.0, beta22 = 0.0;
  double lipschitz = 0.0;     // L = max(b11 R_Q^2, b22 R_M^2, b12 R_Q R_M, b21 R_Q R_M)

  double default_eta() const { return 1.0 / (2.0 * lipschitz); }
};

MirrorMap spmp_constants(const TaskSpec& task);

}  // namespace m4n
