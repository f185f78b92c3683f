#pragma once

#include "m4n/core.hpp"

#include <cstdint>

namespace m4n {

struct KernelSpec {
  enum class Kind { gaussian, linear };
  Kind kind = Kind::gaussian;
  double gamma = 1.0;  // k(x, x') = exp(-gamma |x - x'|^2)

  static KernelSpec gaussian(double gamma) { return {Kind::gaussian, gamma}; }
  static KernelSpec linear() { return {Kind::linear, 0.0}; }
};

/// Rows of `xs` are points.
double kernel_value(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                    const Eigen::Ref<const Vector>& y);

Matrix gram(const Matrix& xs, const KernelSpec& spec);

/// Entry (i, j) is k(a_i, b_j).
Matrix cross_gram(const Matrix& a, const Matrix& b, const KernelSpec& spec);

/// 1 / median of pairwise squared distances over at most `max_points`
/// points drawn with the given seed.
double median_heuristic(const Matrix& xs, std::uint64_t seed = 0, int max_points = 1000);

/// Kernel rows over a training set. Precomputes the Gram matrix up to
/// `precompute_limit` points and evaluates rows on demand beyond that.
class KernelRows {
 public:
  KernelRows(const Matrix& xs, const KernelSpec& spec, int precompute_limit = 8000);

  Eigen::Index size() const { return xs_.rows(); }
  bool precomputed() const { return full_.size() > 0; }
  Vector row(Eigen::Index i) const;
  double diag(Eigen::Index i) const;
  const Matrix& inputs() const { return xs_; }
  const KernelSpec& spec() const { return spec_; }

 private:
  Matrix xs_;
  KernelSpec spec_;
  Matrix full_;
};

}  // namespace m4n
