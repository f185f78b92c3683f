#include "m4n/task.hpp"

#include "m4n/combinatorial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace m4n {

int Layout::dim() const {
  switch (kind) {
    case Kind::simplex:
      return parts;
    case Kind::chain:
      return parts * states + (parts - 1) * states * states;
    case Kind::birkhoff:
      return parts * parts;
  }
  return 0;
}

std::string to_string(const Layout& layout) {
  std::ostringstream os;
  switch (layout.kind) {
    case Layout::Kind::simplex:
      os << "simplex(" << layout.parts << ")";
      break;
    case Layout::Kind::chain:
      os << "chain(" << layout.parts << "," << layout.states << ")";
      break;
    case Layout::Kind::birkhoff:
      os << "birkhoff(" << layout.parts << ")";
      break;
  }
  return os.str();
}

double polytope_violation(const PolytopeState& state) {
  const Layout& l = state.layout;
  const Vector& x = state.values;
  if (x.size() != l.dim()) {
    throw LayoutMismatch("state has " + std::to_string(x.size()) + " entries, layout " +
                         to_string(l) + " needs " + std::to_string(l.dim()));
  }
  double worst = std::max(0.0, -x.minCoeff());
  switch (l.kind) {
    case Layout::Kind::simplex:
      worst = std::max(worst, std::abs(x.sum() - 1.0));
      break;
    case Layout::Kind::chain: {
      const int R = l.states;
      for (int m = 0; m < l.parts; ++m) {
        worst = std::max(worst, std::abs(x.segment(l.unary_offset(m), R).sum() - 1.0));
      }
      for (int p = 0; p + 1 < l.parts; ++p) {
        const auto pw = x.segment(l.pairwise_offset(p), R * R).reshaped<Eigen::RowMajor>(R, R);
        worst = std::max(worst, std::abs(pw.sum() - 1.0));
        const Vector rows = pw.rowwise().sum();
        const Vector cols = pw.colwise().sum().transpose();
        worst = std::max(worst, (rows - x.segment(l.unary_offset(p), R)).cwiseAbs().maxCoeff());
        worst = std::max(worst, (cols - x.segment(l.unary_offset(p + 1), R)).cwiseAbs().maxCoeff());
      }
      break;
    }
    case Layout::Kind::birkhoff: {
      const int M = l.parts;
      const auto q = x.reshaped<Eigen::RowMajor>(M, M);
      worst = std::max(worst, (q.rowwise().sum().array() - 1.0).abs().maxCoeff());
      worst = std::max(worst, (q.colwise().sum().array() - 1.0).abs().maxCoeff());
      worst = std::max(worst, x.maxCoeff() - 1.0);
      break;
    }
  }
  return worst;
}

void check_polytope(const PolytopeState& state, double tol) {
  const double v = polytope_violation(state);
  if (!(v <= tol)) {
    std::ostringstream os;
    os << "point violates " << to_string(state.layout) << " constraints by " << v;
    throw LayoutMismatch(os.str());
  }
}

PolytopeState uniform_state(const Layout& layout) {
  PolytopeState s{layout, Vector(layout.dim())};
  switch (layout.kind) {
    case Layout::Kind::simplex:
      s.values.setConstant(1.0 / layout.parts);
      break;
    case Layout::Kind::chain: {
      const int R = layout.states;
      s.values.head(layout.parts * R).setConstant(1.0 / R);
      s.values.tail(s.values.size() - layout.parts * R).setConstant(1.0 / (R * R));
      break;
    }
    case Layout::Kind::birkhoff:
      s.values.setConstant(1.0 / layout.parts);
      break;
  }
  return s;
}

void apply_floor(PolytopeState& state) {
  state.values = state.values.cwiseMax(kProbabilityFloor);
}

// ---------------------------------------------------------------------------
// LossDecomposition

LossDecomposition LossDecomposition::dense(Matrix a, double offset) {
  if (a.rows() != a.cols()) throw std::invalid_argument("loss matrix must be square");
  LossDecomposition d;
  d.form_ = Form::dense;
  d.dim_ = static_cast<int>(a.rows());
  d.offset_ = offset;
  d.dense_ = std::move(a);
  return d;
}

LossDecomposition LossDecomposition::scaled_identity(int dim, double scale, double offset) {
  LossDecomposition d;
  d.form_ = Form::scaled_identity;
  d.dim_ = dim;
  d.scale_ = scale;
  d.offset_ = offset;
  return d;
}

LossDecomposition LossDecomposition::chain_hamming(int length, int num_states) {
  LossDecomposition d;
  d.form_ = Form::chain_unary;
  d.dim_ = Layout::chain(length, num_states).dim();
  d.length_ = length;
  d.states_ = num_states;
  d.scale_ = -1.0 / length;
  d.offset_ = 1.0;
  return d;
}

Vector LossDecomposition::apply(const Vector& mu) const {
  if (mu.size() != dim_) throw LayoutMismatch("loss matrix / vector size mismatch");
  switch (form_) {
    case Form::dense:
      return dense_ * mu;
    case Form::scaled_identity:
      return scale_ * mu;
    case Form::chain_unary: {
      Vector out = Vector::Zero(dim_);
      const int unary = length_ * states_;
      out.head(unary) = scale_ * mu.head(unary);
      return out;
    }
  }
  return {};
}

Vector LossDecomposition::apply_transpose(const Vector& nu) const {
  if (form_ == Form::dense) {
    if (nu.size() != dim_) throw LayoutMismatch("loss matrix / vector size mismatch");
    return dense_.transpose() * nu;
  }
  return apply(nu);  // the structured forms are symmetric
}

Matrix LossDecomposition::to_dense() const {
  switch (form_) {
    case Form::dense:
      return dense_;
    case Form::scaled_identity:
      return scale_ * Matrix::Identity(dim_, dim_);
    case Form::chain_unary: {
      Matrix a = Matrix::Zero(dim_, dim_);
      const int unary = length_ * states_;
      a.topLeftCorner(unary, unary) = scale_ * Matrix::Identity(unary, unary);
      return a;
    }
  }
  return {};
}

double LossDecomposition::part_spectral_norm() const {
  switch (form_) {
    case Form::dense:
      return Eigen::JacobiSVD<Matrix>(dense_).singularValues()(0);
    case Form::scaled_identity:
      return std::abs(scale_);
    case Form::chain_unary:
      return 1.0;  // centered per-position 0-1 loss, -I_R
  }
  return 0.0;
}

double LossDecomposition::part_inf_norm() const {
  switch (form_) {
    case Form::dense:
      return dense_.cwiseAbs().rowwise().sum().maxCoeff();
    case Form::scaled_identity:
      return std::abs(scale_);
    case Form::chain_unary:
      return 1.0;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// TaskSpec

TaskSpec TaskSpec::multiclass(int k) {
  if (k < 2) throw std::invalid_argument("multiclass task needs k >= 2");
  return TaskSpec(TaskKind::multiclass, Layout::simplex(k),
                  LossDecomposition::dense(-Matrix::Identity(k, k), 1.0));
}

TaskSpec TaskSpec::ordinal(int k) {
  if (k < 2) throw std::invalid_argument("ordinal task needs k >= 2");
  Matrix a(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) a(i, j) = std::abs(i - j);
  return TaskSpec(TaskKind::ordinal, Layout::simplex(k), LossDecomposition::dense(std::move(a), 0.0));
}

TaskSpec TaskSpec::chain(int length, int num_states) {
  if (length < 1 || num_states < 2) throw std::invalid_argument("chain task needs M >= 1, R >= 2");
  return TaskSpec(TaskKind::chain, Layout::chain(length, num_states),
                  LossDecomposition::chain_hamming(length, num_states));
}

TaskSpec TaskSpec::ranking(int size) {
  if (size < 2) throw std::invalid_argument("ranking task needs M >= 2");
  return TaskSpec(TaskKind::ranking, Layout::birkhoff(size),
                  LossDecomposition::scaled_identity(size * size, -1.0 / size, 1.0));
}

int TaskSpec::label_size() const {
  switch (kind_) {
    case TaskKind::multiclass:
    case TaskKind::ordinal:
      return 1;
    case TaskKind::chain:
    case TaskKind::ranking:
      return layout_.parts;
  }
  return 1;
}

double TaskSpec::diameter() const {
  switch (layout_.kind) {
    case Layout::Kind::simplex:
      return std::sqrt(2.0);
    case Layout::Kind::chain:
      // Two sequences differing everywhere: 2M unary + 2(M-1) pairwise flips.
      return std::sqrt(2.0 * (2 * layout_.parts - 1));
    case Layout::Kind::birkhoff:
      return std::sqrt(2.0 * layout_.parts);
  }
  return 0.0;
}

std::string TaskSpec::name() const {
  std::ostringstream os;
  switch (kind_) {
    case TaskKind::multiclass:
      os << "multiclass(" << layout_.parts << ")";
      break;
    case TaskKind::ordinal:
      os << "ordinal(" << layout_.parts << ")";
      break;
    case TaskKind::chain:
      os << "chain(" << layout_.parts << "," << layout_.states << ")";
      break;
    case TaskKind::ranking:
      os << "ranking(" << layout_.parts << ")";
      break;
  }
  return os.str();
}

TaskKind parse_task_kind(const std::string& name) {
  if (name == "multiclass") return TaskKind::multiclass;
  if (name == "ordinal") return TaskKind::ordinal;
  if (name == "chain" || name == "sequence") return TaskKind::chain;
  if (name == "ranking") return TaskKind::ranking;
  throw std::invalid_argument("unknown task kind '" + name +
                              "' (expected multiclass, ordinal, chain or ranking)");
}

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::multiclass:
      return "multiclass";
    case TaskKind::ordinal:
      return "ordinal";
    case TaskKind::chain:
      return "chain";
    case TaskKind::ranking:
      return "ranking";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Labels and embeddings

void validate_label(const TaskSpec& task, const Label& label) {
  const int want = task.label_size();
  if (static_cast<int>(label.size()) != want) {
    throw InvalidLabel(task.name() + ": label has " + std::to_string(label.size()) +
                       " parts, expected " + std::to_string(want));
  }
  const int hi = task.states();
  for (int v : label) {
    if (v < 1 || v > hi) {
      throw InvalidLabel(task.name() + ": label value " + std::to_string(v) + " outside [1, " +
                         std::to_string(hi) + "]");
    }
  }
  if (task.kind() == TaskKind::ranking) {
    std::vector<char> seen(hi + 1, 0);
    for (int v : label) {
      if (seen[v]) throw InvalidLabel(task.name() + ": label is not a permutation");
      seen[v] = 1;
    }
  }
}

Vector embed(const TaskSpec& task, const Label& label) {
  validate_label(task, label);
  const Layout& l = task.layout();
  Vector e = Vector::Zero(l.dim());
  switch (task.kind()) {
    case TaskKind::multiclass:
    case TaskKind::ordinal:
      e(label[0] - 1) = 1.0;
      break;
    case TaskKind::chain: {
      const int R = l.states;
      for (int m = 0; m < l.parts; ++m) e(l.unary_offset(m) + label[m] - 1) = 1.0;
      for (int p = 0; p + 1 < l.parts; ++p) {
        e(l.pairwise_offset(p) + (label[p] - 1) * R + (label[p + 1] - 1)) = 1.0;
      }
      break;
    }
    case TaskKind::ranking: {
      const int M = l.parts;
      for (int m = 0; m < M; ++m) e(m * M + label[m] - 1) = 1.0;
      break;
    }
  }
  return e;
}

PolytopeState embed_state(const TaskSpec& task, const Label& label) {
  return {task.layout(), embed(task, label)};
}

Label decode_embedding(const TaskSpec& task, const Vector& e) {
  const Layout& l = task.layout();
  if (e.size() != l.dim()) throw LayoutMismatch("embedding has the wrong dimension for " + task.name());
  auto one_hot = [&](Eigen::Index offset, int size) {
    int hot = -1;
    for (int j = 0; j < size; ++j) {
      const double x = e(offset + j);
      if (std::abs(x - 1.0) <= 1e-9) {
        if (hot >= 0) throw InvalidLabel("not a vertex embedding: block has two ones");
        hot = j;
      } else if (std::abs(x) > 1e-9) {
        throw InvalidLabel("not a vertex embedding: fractional entry");
      }
    }
    if (hot < 0) throw InvalidLabel("not a vertex embedding: empty block");
    return hot + 1;
  };
  Label y;
  switch (task.kind()) {
    case TaskKind::multiclass:
    case TaskKind::ordinal:
      y = {one_hot(0, l.parts)};
      break;
    case TaskKind::chain:
      for (int m = 0; m < l.parts; ++m) y.push_back(one_hot(l.unary_offset(m), l.states));
      break;
    case TaskKind::ranking:
      for (int m = 0; m < l.parts; ++m) y.push_back(one_hot(m * l.parts, l.parts));
      break;
  }
  // Rejects inconsistent pairwise blocks and non-permutations.
  if ((embed(task, y) - e).cwiseAbs().maxCoeff() > 1e-9) {
    throw InvalidLabel("not a vertex embedding of " + task.name());
  }
  return y;
}

double loss_eval(const TaskSpec& task, const Label& y, const Label& y2) {
  const Vector a = embed(task, y);
  const Vector b = embed(task, y2);
  return a.dot(task.loss().apply(b)) + task.loss().offset();
}

double direct_loss(const TaskSpec& task, const Label& y, const Label& y2) {
  validate_label(task, y);
  validate_label(task, y2);
  switch (task.kind()) {
    case TaskKind::multiclass:
      return y[0] == y2[0] ? 0.0 : 1.0;
    case TaskKind::ordinal:
      return std::abs(y[0] - y2[0]);
    case TaskKind::chain:
    case TaskKind::ranking: {
      int diff = 0;
      for (std::size_t m = 0; m < y.size(); ++m) diff += (y[m] != y2[m]);
      return static_cast<double>(diff) / static_cast<double>(y.size());
    }
  }
  return 0.0;
}

namespace {

void split_chain(const Layout& l, const Vector& v, Matrix& unary, std::vector<Matrix>& pairwise) {
  const int R = l.states;
  unary.resize(l.parts, R);
  for (int m = 0; m < l.parts; ++m) unary.row(m) = v.segment(l.unary_offset(m), R).transpose();
  pairwise.resize(l.parts - 1);
  for (int p = 0; p + 1 < l.parts; ++p) {
    pairwise[p] = v.segment(l.pairwise_offset(p), R * R).reshaped<Eigen::RowMajor>(R, R);
  }
}

void require_finite(const TaskSpec& task, const Vector& v) {
  if (v.size() != task.embed_dim()) {
    throw LayoutMismatch("score vector has dimension " + std::to_string(v.size()) + ", " +
                         task.name() + " needs " + std::to_string(task.embed_dim()));
  }
  if (!v.allFinite()) throw NonFiniteInput("decode: score vector has non-finite entries");
}

}  // namespace

Label decode(const TaskSpec& task, const Vector& v) {
  require_finite(task, v);
  const Layout& l = task.layout();
  switch (task.kind()) {
    case TaskKind::multiclass:
    case TaskKind::ordinal: {
      Eigen::Index arg = 0;
      v.maxCoeff(&arg);
      return {static_cast<int>(arg) + 1};
    }
    case TaskKind::chain: {
      Matrix unary;
      std::vector<Matrix> pairwise;
      split_chain(l, v, unary, pairwise);
      const ChainDecode d = viterbi(unary, pairwise);
      Label y(d.states.size());
      for (std::size_t m = 0; m < y.size(); ++m) y[m] = d.states[m] + 1;
      return y;
    }
    case TaskKind::ranking: {
      const int M = l.parts;
      const Matrix w = v.reshaped<Eigen::RowMajor>(M, M);
      const Assignment a = hungarian_max_lex(w);
      Label y(M);
      for (int m = 0; m < M; ++m) y[m] = a.column_of_row[m] + 1;
      return y;
    }
  }
  return {};
}

double max_score(const TaskSpec& task, const Vector& v) {
  require_finite(task, v);
  const Layout& l = task.layout();
  switch (task.kind()) {
    case TaskKind::multiclass:
    case TaskKind::ordinal:
      return v.maxCoeff();
    case TaskKind::chain: {
      Matrix unary;
      std::vector<Matrix> pairwise;
      split_chain(l, v, unary, pairwise);
      return viterbi_value(unary, pairwise);
    }
    case TaskKind::ranking: {
      const int M = l.parts;
      return hungarian_max(v.reshaped<Eigen::RowMajor>(M, M)).score;
    }
  }
  return 0.0;
}

double centered_bayes_risk(const TaskSpec& task, const Vector& mu) {
  return -max_score(task, -task.loss().apply(mu));
}

BayesRisk bayes_risk(const TaskSpec& task, const PolytopeState& mu) {
  if (!(mu.layout == task.layout())) {
    throw LayoutMismatch("bayes_risk: state layout " + to_string(mu.layout) + " does not match " +
                         task.name());
  }
  const Vector amu = task.loss().apply(mu.values);
  BayesRisk out;
  out.label = decode(task, -amu);
  out.value = embed(task, out.label).dot(amu) + task.loss().offset();
  return out;
}

std::vector<Label> enumerate_labels(const TaskSpec& task, std::size_t limit) {
  std::vector<Label> out;
  const int n = task.label_size();
  const int hi = task.states();
  if (task.kind() == TaskKind::ranking) {
    Label p(n);
    std::iota(p.begin(), p.end(), 1);
    do {
      out.push_back(p);
      if (out.size() > limit) throw std::length_error("enumerate_labels: output space too large");
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
  }
  Label y(n, 1);
  while (true) {
    out.push_back(y);
    if (out.size() > limit) throw std::length_error("enumerate_labels: output space too large");
    int m = n - 1;
    while (m >= 0 && y[m] == hi) y[m--] = 1;
    if (m < 0) break;
    ++y[m];
  }
  return out;
}

}  // namespace m4n
