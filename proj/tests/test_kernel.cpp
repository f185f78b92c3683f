#include "doctest.h"
#include "oracles.hpp"

#include "m4n/kernel.hpp"
#include "m4n/synth.hpp"

#include <Eigen/Eigenvalues>

using namespace m4n;

TEST_CASE("gram examples") {
  const KernelSpec g = KernelSpec::gaussian(0.7);
  CHECK(gram(Matrix::Constant(1, 3, 2.0), g) == Matrix::Ones(1, 1));
  CHECK(gram(Matrix::Constant(2, 3, 2.0), g) == Matrix::Ones(2, 2));
  Matrix two(2, 2);
  two << 0, 0, 1, 2;  // squared distance 5
  CHECK(gram(two, g)(0, 1) == doctest::Approx(std::exp(-0.7 * 5.0)));
  CHECK(gram(two, KernelSpec::linear())(1, 1) == doctest::Approx(5.0));
  CHECK_THROWS_AS(cross_gram(two, Matrix::Zero(1, 3), g), LayoutMismatch);
}

TEST_CASE("gram is symmetric and PSD") {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 50; ++rep) {
    Matrix xs(20, 3);
    for (int i = 0; i < xs.size(); ++i) xs.data()[i] = std::normal_distribution<double>()(rng);
    const Matrix k = gram(xs, KernelSpec::gaussian(0.5));
    REQUIRE(k == k.transpose());
    REQUIRE((k.diagonal().array() == 1.0).all());
    REQUIRE(Eigen::SelfAdjointEigenSolver<Matrix>(k).eigenvalues().minCoeff() >= -1e-8);
    REQUIRE((cross_gram(xs, xs, KernelSpec::gaussian(0.5)) - k).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("median heuristic") {
  Matrix two(2, 2);
  two << 0, 0, 2, 0;
  CHECK(median_heuristic(two) == doctest::Approx(0.25));
  Matrix grid(9, 2);
  for (int i = 0; i < 9; ++i) grid.row(i) << i / 3, i % 3;
  const double g = median_heuristic(grid);
  CHECK(g > 0.0);
  CHECK(std::isfinite(g));
  CHECK_THROWS_AS(median_heuristic(Matrix::Ones(5, 2)), std::invalid_argument);
  CHECK_THROWS_AS(median_heuristic(Matrix::Ones(1, 2)), std::invalid_argument);

  SynthParams p;
  p.n = 3000;
  const SynthResult blobs = synth_generate(p);
  const double full = median_heuristic(blobs.data.inputs, 0, 3000);
  const double sub = median_heuristic(blobs.data.inputs, 7, 1000);
  CHECK(sub / full < 2.0);
  CHECK(full / sub < 2.0);
  CHECK(median_heuristic(blobs.data.inputs, 7) == median_heuristic(blobs.data.inputs, 7));
}

TEST_CASE("kernel rows agree with the Gram matrix either way") {
  std::mt19937_64 rng(42);
  Matrix xs(30, 2);
  for (int i = 0; i < xs.size(); ++i) xs.data()[i] = std::normal_distribution<double>()(rng);
  const KernelSpec spec = KernelSpec::gaussian(0.3);
  const Matrix k = gram(xs, spec);
  const KernelRows cached(xs, spec), lazy(xs, spec, 10);
  CHECK(cached.precomputed());
  CHECK_FALSE(lazy.precomputed());
  for (Eigen::Index i = 0; i < 30; ++i) {
    CHECK((cached.row(i) - k.col(i)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((lazy.row(i) - k.col(i)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(lazy.diag(i) == 1.0);
  }
}
