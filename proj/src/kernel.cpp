#include "m4n/kernel.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace m4n {
namespace {

void check_inputs(const Matrix& xs, const char* what) {
  if (!xs.allFinite()) throw NonFiniteInput(std::string(what) + ": non-finite input");
}

void check_spec(const KernelSpec& spec) {
  if (spec.kind == KernelSpec::Kind::gaussian && !(spec.gamma > 0.0 && std::isfinite(spec.gamma))) {
    throw std::invalid_argument("gaussian kernel width must be positive and finite");
  }
}

}  // namespace

double kernel_value(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                    const Eigen::Ref<const Vector>& y) {
  if (x.size() != y.size()) throw LayoutMismatch("kernel: input dimension mismatch");
  if (spec.kind == KernelSpec::Kind::linear) return x.dot(y);
  return std::exp(-spec.gamma * (x - y).squaredNorm());
}

Matrix cross_gram(const Matrix& a, const Matrix& b, const KernelSpec& spec) {
  if (a.cols() != b.cols()) throw LayoutMismatch("kernel: input dimension mismatch");
  check_inputs(a, "kernel");
  check_inputs(b, "kernel");
  check_spec(spec);
  Matrix k = a * b.transpose();
  if (spec.kind == KernelSpec::Kind::linear) return k;
  const Vector na = a.rowwise().squaredNorm();
  const Vector nb = b.rowwise().squaredNorm();
  for (Eigen::Index j = 0; j < k.cols(); ++j) {
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
      const double d = std::max(0.0, na(i) + nb(j) - 2.0 * k(i, j));
      k(i, j) = std::exp(-spec.gamma * d);
    }
  }
  return k;
}

Matrix gram(const Matrix& xs, const KernelSpec& spec) {
  check_inputs(xs, "gram");
  check_spec(spec);
  const Eigen::Index n = xs.rows();
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = (i == j && spec.kind == KernelSpec::Kind::gaussian)
                           ? 1.0
                           : kernel_value(spec, xs.row(i).transpose(), xs.row(j).transpose());
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

double median_heuristic(const Matrix& xs, std::uint64_t seed, int max_points) {
  const Eigen::Index n = xs.rows();
  if (n < 2) throw std::invalid_argument("median heuristic needs at least 2 points");
  check_inputs(xs, "median heuristic");
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n > max_points) {
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(max_points);
  }
  std::vector<double> d;
  d.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) d.push_back((xs.row(idx[i]) - xs.row(idx[j])).squaredNorm());
  }
  auto median = [](std::vector<double>& v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
    return m;
  };
  double med = median(d);
  if (med <= 0.0) {
    std::vector<double> pos;
    std::copy_if(d.begin(), d.end(), std::back_inserter(pos), [](double x) { return x > 0.0; });
    if (pos.empty()) {
      throw std::invalid_argument("median heuristic: all points are identical; pass an explicit kernel width");
    }
    med = median(pos);
  }
  return 1.0 / med;
}

KernelRows::KernelRows(const Matrix& xs, const KernelSpec& spec, int precompute_limit)
    : xs_(xs), spec_(spec) {
  check_inputs(xs_, "kernel rows");
  check_spec(spec_);
  if (xs_.rows() <= precompute_limit) full_ = gram(xs_, spec_);
}

Vector KernelRows::row(Eigen::Index i) const {
  if (precomputed()) return full_.col(i);
  return cross_gram(xs_, xs_.row(i), spec_);
}

double KernelRows::diag(Eigen::Index i) const {
  if (precomputed()) return full_(i, i);
  return kernel_value(spec_, xs_.row(i).transpose(), xs_.row(i).transpose());
}

}  // namespace m4n
