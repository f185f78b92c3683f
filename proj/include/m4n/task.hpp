#pragma once

#include "m4n/core.hpp"

#include <string>

namespace m4n {

enum class TaskKind { multiclass, ordinal, chain, ranking };

/// Shape of a point in a task's marginal polytope.
///
/// simplex(k): probability vector of length k.
/// chain(M, R): M unary blocks of size R, followed by M-1 pairwise blocks of
///   size R*R stored row-major, entry (r, s) meaning y_m = r, y_{m+1} = s.
/// birkhoff(M): doubly stochastic M x M matrix flattened row-major.
struct Layout {
  enum class Kind { simplex, chain, birkhoff };

  Kind kind = Kind::simplex;
  int parts = 1;   // k for simplex, M for chain and birkhoff
  int states = 1;  // k for simplex, R for chain, M for birkhoff

  static Layout simplex(int k) { return {Kind::simplex, k, k}; }
  static Layout chain(int length, int num_states) { return {Kind::chain, length, num_states}; }
  static Layout birkhoff(int size) { return {Kind::birkhoff, size, size}; }

  int dim() const;
  int unary_offset(int m) const { return m * states; }
  int pairwise_offset(int p) const { return parts * states + p * states * states; }

  friend bool operator==(const Layout&, const Layout&) = default;
};

std::string to_string(const Layout& layout);

struct PolytopeState {
  Layout layout;
  Vector values;
};

/// Throws LayoutMismatch unless `state` satisfies the marginal-polytope
/// invariants of its layout within `tol` (local consistency uses `tol` too).
void check_polytope(const PolytopeState& state, double tol = 1e-8);

/// Maximum violation of the layout constraints: sums, local consistency and
/// negativity.
double polytope_violation(const PolytopeState& state);

/// Entropy maximizer of the layout (uniform marginals).
PolytopeState uniform_state(const Layout& layout);

/// Raises entries to kProbabilityFloor. Does not renormalize.
void apply_floor(PolytopeState& state);

/// Affine loss decomposition L(y, y') = phi(y)^T A phi(y') + a, with A kept
/// in a structured form so products cost O(k).
class LossDecomposition {
 public:
  enum class Form { dense, scaled_identity, chain_unary };

  static LossDecomposition dense(Matrix a, double offset);
  static LossDecomposition scaled_identity(int dim, double scale, double offset);
  /// Block-diagonal -I_R/M on the unary part, zero on the pairwise part.
  static LossDecomposition chain_hamming(int length, int num_states);

  int embed_dim() const { return dim_; }
  double offset() const { return offset_; }
  Form form() const { return form_; }

  Vector apply(const Vector& mu) const;
  Vector apply_transpose(const Vector& nu) const;
  double bilinear(const Vector& nu, const Vector& mu) const { return nu.dot(apply(mu)); }
  Matrix to_dense() const;

  /// Spectral norm of the per-part loss matrix L_m (the dense matrix itself
  /// for multiclass and ordinal, the position loss for chains).
  double part_spectral_norm() const;
  /// Max-row-sum norm of the per-part loss matrix.
  double part_inf_norm() const;

 private:
  Form form_ = Form::dense;
  int dim_ = 0;
  double offset_ = 0.0;
  double scale_ = 0.0;
  int length_ = 0;
  int states_ = 0;
  Matrix dense_;
};

class TaskSpec {
 public:
  static TaskSpec multiclass(int k);
  static TaskSpec ordinal(int k);
  static TaskSpec chain(int length, int num_states);
  static TaskSpec ranking(int size);

  TaskKind kind() const { return kind_; }
  const Layout& layout() const { return layout_; }
  const LossDecomposition& loss() const { return loss_; }
  int embed_dim() const { return layout_.dim(); }
  /// Number of classes (multiclass/ordinal), states per position (chain) or
  /// items (ranking).
  int states() const { return layout_.states; }
  /// 1 for multiclass/ordinal, M for chain and ranking.
  int label_size() const;
  /// Diameter of the marginal polytope in the Euclidean norm.
  double diameter() const;
  std::string name() const;

 private:
  TaskSpec(TaskKind kind, Layout layout, LossDecomposition loss)
      : kind_(kind), layout_(layout), loss_(std::move(loss)) {}

  TaskKind kind_;
  Layout layout_;
  LossDecomposition loss_;
};

TaskKind parse_task_kind(const std::string& name);
std::string to_string(TaskKind kind);

void validate_label(const TaskSpec& task, const Label& label);

Vector embed(const TaskSpec& task, const Label& label);
PolytopeState embed_state(const TaskSpec& task, const Label& label);

/// Inverse of embed on polytope vertices. Rejects vectors that are not a
/// vertex embedding (within 1e-9).
Label decode_embedding(const TaskSpec& task, const Vector& e);

/// phi(y)^T A phi(y2) + a.
double loss_eval(const TaskSpec& task, const Label& y, const Label& y2);

/// The task loss computed directly on labels (0-1, absolute difference,
/// normalized Hamming).
double direct_loss(const TaskSpec& task, const Label& y, const Label& y2);

/// argmax_y phi(y)^T v with the lowest lexicographic label on ties.
Label decode(const TaskSpec& task, const Vector& v);

/// max_y phi(y)^T v without tie resolution.
double max_score(const TaskSpec& task, const Vector& v);

struct BayesRisk {
  double value;  // min_y phi(y)^T A mu + a
  Label label;
};

BayesRisk bayes_risk(const TaskSpec& task, const PolytopeState& mu);

/// min_y phi(y)^T A mu, i.e. the Bayes risk of the centered loss.
double centered_bayes_risk(const TaskSpec& task, const Vector& mu);

/// Enumerates every output label in lexicographic order. Intended for small
/// tasks only; throws when the output space exceeds `limit` labels.
std::vector<Label> enumerate_labels(const TaskSpec& task, std::size_t limit = 1u << 20);

}  // namespace m4n
