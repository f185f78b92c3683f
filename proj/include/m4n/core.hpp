#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace m4n {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// One-based output label. Multiclass and ordinal labels have a single part,
// chain labels one entry per position in [1, R], ranking labels are
// permutations of [1, M] where entry m is the rank assigned to item m.
using Label = std::vector<int>;

// Entries below this value are raised to it after every Bregman step.
inline constexpr double kProbabilityFloor = 1e-12;

struct InvalidLabel : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct LayoutMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NonFiniteInput : std::domain_error {
  using std::domain_error::domain_error;
};

struct ConvergenceFailure : std::runtime_error {
  ConvergenceFailure(const std::string& what, double residual_)
      : std::runtime_error(what), residual(residual_) {}
  double residual;
};

struct TrainingFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

}  // namespace m4n
