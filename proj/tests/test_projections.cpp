#include "doctest.h"
#include "oracles.hpp"

#include "m4n/projections.hpp"

using namespace m4n;

namespace {

// Gradient of the junction-tree entropy.
Vector chain_entropy_grad(const Layout& l, const Vector& mu) {
  const int M = l.parts, R = l.states;
  Vector g = Vector::Zero(mu.size());
  for (int m = 0; m < M; ++m) {
    for (int r = 0; r < R; ++r) {
      const int at = l.unary_offset(m) + r;
      if (M == 1) g(at) = -std::log(mu(at)) - 1.0;
      else if (m > 0 && m < M - 1) g(at) = std::log(mu(at)) + 1.0;
    }
  }
  for (int at = l.pairwise_offset(0); M > 1 && at < mu.size(); ++at) g(at) = -std::log(mu(at)) - 1.0;
  return g;
}

double chain_objective(const Layout& l, const Vector& mu, const Vector& prev, const Vector& u, double eta) {
  const double h = chain_entropy({l, mu}), hp = chain_entropy({l, prev});
  return -eta * mu.dot(u) - h + hp + chain_entropy_grad(l, prev).dot(mu - prev);
}

// Projected gradient over label distributions q, mapping to moments.
double chain_objective_numeric(const TaskSpec& task, const Vector& prev, const Vector& u, double eta) {
  const auto ys = oracle::labels(task);
  Matrix phi(task.embed_dim(), static_cast<Eigen::Index>(ys.size()));
  for (std::size_t j = 0; j < ys.size(); ++j) phi.col(static_cast<Eigen::Index>(j)) = oracle::embed(task, ys[j]);
  const Layout& l = task.layout();
  auto f = [&](const Vector& q) { return chain_objective(l, phi * q, prev, u, eta); };
  Vector q = Vector::Constant(phi.cols(), 1.0 / static_cast<double>(phi.cols()));
  double fq = f(q), step = 0.1;
  for (int it = 0; it < 20000; ++it) {
    const Vector mu = (phi * q).cwiseMax(1e-300);
    const Vector g = phi.transpose() * (-eta * u - chain_entropy_grad(l, mu) + chain_entropy_grad(l, prev));
    Vector next = oracle::project_simplex_euclid(q - step * g);
    double fn = f(next);
    while (!(fn <= fq) && step > 1e-16) {
      step *= 0.5;
      next = oracle::project_simplex_euclid(q - step * g);
      fn = f(next);
    }
    if (fq - fn < 1e-15) break;
    q = next;
    fq = fn;
    step *= 1.5;
  }
  return fq;
}

}  // namespace

TEST_CASE("simplex projection examples") {
  const Vector u3 = Vector::Constant(3, 1.0 / 3);
  CHECK((project_simplex_entropic(u3, Vector::Zero(3), 1.0) - u3).norm() < 1e-15);
  const Vector out = project_simplex_entropic(Vector::Constant(2, 0.5), Vector((Vector(2) << std::log(3.0), 0).finished()), 1.0);
  CHECK(out(0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(out(1) == doctest::Approx(0.25).epsilon(1e-12));
  Vector bad = Vector::Zero(3);
  bad(0) = INFINITY;
  CHECK_THROWS_AS(project_simplex_entropic(u3, bad, 1.0), NonFiniteInput);
}

TEST_CASE("simplex projection minimizes the Bregman objective") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 500; ++rep) {
    const int k = 2 + rep % 5;
    const Vector prev = oracle::random_simplex(rng, k);
    const Vector u = oracle::random_normal(rng, k);
    const double eta = std::exp(std::uniform_real_distribution<double>(-2, 1)(rng));
    const Vector ours = project_simplex_entropic(prev, u, eta);
    const Vector ref = oracle::simplex_bregman_numeric(prev, u, eta);
    REQUIRE(std::abs(ours.sum() - 1.0) < 1e-12);
    const double fo = oracle::simplex_bregman_objective(ours, prev, u, eta);
    const double fr = oracle::simplex_bregman_objective(ref, prev, u, eta);
    REQUIRE(fo <= fr + 1e-6);
    REQUIRE(fr <= fo + 1e-6);
    REQUIRE((ours - ref).lpNorm<Eigen::Infinity>() < 1e-6);
  }
}

TEST_CASE("simplex step moves mass toward the ascent direction") {
  std::mt19937_64 rng(22);
  for (int rep = 0; rep < 100; ++rep) {
    const Vector prev = oracle::random_simplex(rng, 4);
    const Vector u = oracle::random_normal(rng, 4);
    double last = -INFINITY;
    for (double eta : {0.1, 1.0, 10.0}) {
      const double s = project_simplex_entropic(prev, u, eta).dot(u);
      REQUIRE(s >= last - 1e-12);
      last = s;
    }
  }
}

TEST_CASE("chain projection fixed point and Gibbs agreement") {
  std::mt19937_64 rng(23);
  const TaskSpec t22 = TaskSpec::chain(2, 2);
  const Vector prev = oracle::random_moments(rng, t22);
  const PolytopeState same = project_chain_entropic({t22.layout(), prev}, Vector::Zero(t22.embed_dim()), 1.0);
  CHECK((same.values - prev).lpNorm<Eigen::Infinity>() < 1e-10);

  for (int rep = 0; rep < 500; ++rep) {
    const int M = 1 + rep % 3, R = 2 + (rep / 3) % 2;
    const TaskSpec task = TaskSpec::chain(M, R);
    const Vector p = oracle::random_moments(rng, task);
    const Vector g = oracle::random_normal(rng, task.embed_dim());
    const double eta = std::uniform_real_distribution<double>(0.1, 3.0)(rng);
    const PolytopeState out = project_chain_entropic({task.layout(), p}, g, eta);
    REQUIRE((out.values - oracle::chain_projection(task, p, g, eta)).lpNorm<Eigen::Infinity>() < 1e-9);
    REQUIRE(polytope_violation(out) < 1e-8);
  }
}

TEST_CASE("chain projection attains the Bregman minimum") {
  std::mt19937_64 rng(24);
  for (int rep = 0; rep < 12; ++rep) {
    const int M = 1 + rep % 3, R = 2 + (rep / 3) % 2;
    const TaskSpec task = TaskSpec::chain(M, R);
    const Vector p = oracle::random_moments(rng, task);
    const Vector g = oracle::random_normal(rng, task.embed_dim());
    const double eta = 0.7;
    const PolytopeState out = project_chain_entropic({task.layout(), p}, g, eta);
    const double ours = chain_objective(task.layout(), out.values, p, g, eta);
    REQUIRE(ours <= chain_objective_numeric(task, p, g, eta) + 1e-6);
    for (int k = 0; k < 50; ++k) {
      const Vector other = oracle::random_moments(rng, task);
      REQUIRE(ours <= chain_objective(task.layout(), other, p, g, eta) + 1e-12);
    }
  }
}

TEST_CASE("chain marginals are locally consistent at large potentials") {
  std::mt19937_64 rng(25);
  Matrix unary(3, 3);
  for (int i = 0; i < 9; ++i) unary.data()[i] = 200.0 * std::normal_distribution<double>()(rng);
  std::vector<Matrix> pw(2, Matrix(3, 3));
  for (auto& b : pw) {
    for (int i = 0; i < 9; ++i) b.data()[i] = 200.0 * std::normal_distribution<double>()(rng);
  }
  const PolytopeState s = chain_marginals(unary, pw);
  CHECK(s.values.allFinite());
  CHECK(polytope_violation(s) < 1e-8);
}

TEST_CASE("product-of-simplices step keeps outer-product pairwise blocks") {
  std::mt19937_64 rng(26);
  const TaskSpec task = TaskSpec::chain(3, 3);
  const PolytopeState u = uniform_state(task.layout());
  const PolytopeState out = project_chain_product(u, oracle::random_normal(rng, task.embed_dim()), 1.0);
  const Layout& l = task.layout();
  CHECK(polytope_violation(out) < 1e-10);
  for (int p = 0; p < 2; ++p) {
    for (int r = 0; r < 3; ++r) {
      for (int s = 0; s < 3; ++s) {
        CHECK(out.values(l.pairwise_offset(p) + 3 * r + s) ==
              doctest::Approx(out.values(l.unary_offset(p) + r) * out.values(l.unary_offset(p + 1) + s)));
      }
    }
  }
}

TEST_CASE("sinkhorn") {
  const Matrix uni = Matrix::Constant(3, 3, 1.0 / 3);
  CHECK((project_birkhoff_sinkhorn(uni, Matrix::Zero(3, 3), 1.0).plan - uni).norm() < 1e-12);

  const SinkhornResult diag = project_birkhoff_sinkhorn(uni, 10.0 * Matrix::Identity(3, 3), 1.0);
  CHECK(diag.plan.sum() - diag.plan.trace() < 0.05);

  std::mt19937_64 rng(27);
  for (int rep = 0; rep < 200; ++rep) {
    Matrix prev(4, 4);
    for (int i = 0; i < 16; ++i) prev.data()[i] = std::exponential_distribution<double>()(rng) + 1e-3;
    Matrix g(4, 4);
    for (int i = 0; i < 16; ++i) g.data()[i] = std::normal_distribution<double>()(rng);
    const SinkhornResult r = project_birkhoff_sinkhorn(prev, g, 2.0, {}, true);
    REQUIRE((r.plan.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
    REQUIRE((r.plan.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
    REQUIRE(r.plan.minCoeff() >= 0.0);
    for (std::size_t i = 10; i < r.residual_trace.size(); i += 10) {
      REQUIRE(r.residual_trace[i] <= r.residual_trace[i - 10] + 1e-15);
    }
  }

  // Nearly degenerate support: plain scaling needs tens of thousands of rounds.
  Matrix stiff(4, 4);
  stiff << 0.479014, 1e-12, 3.44912e-10, 0.520986, 1e-12, 0.000342983, 0.999657, 1e-12, 0.0411254, 0.958532,
      0.000342979, 1e-12, 0.47986, 0.0411254, 1e-12, 0.479014;
  Matrix sg(4, 4);
  for (int i = 0; i < 16; ++i) sg.data()[i] = std::normal_distribution<double>()(rng);
  SinkhornOptions plain;
  plain.newton_after = -1;
  plain.max_iter = 2000000;
  plain.tol = 1e-13;
  const SinkhornResult fast = project_birkhoff_sinkhorn(stiff, sg, 0.5);
  const SinkhornResult slow = project_birkhoff_sinkhorn(stiff, sg, 0.5, plain);
  CHECK(fast.iterations < 100);
  CHECK((fast.plan - slow.plan).cwiseAbs().maxCoeff() < 1e-10);

  Matrix hard = Matrix::Constant(4, 4, 0.25);
  Matrix big(4, 4);
  for (int i = 0; i < 16; ++i) big.data()[i] = 30.0 * std::normal_distribution<double>()(rng);
  CHECK_THROWS_AS(project_birkhoff_sinkhorn(hard, big, 1.0, {1e-14, 2, -1}), ConvergenceFailure);
}

TEST_CASE("entropies") {
  const TaskSpec task = TaskSpec::chain(3, 2);
  CHECK(chain_entropy(embed_state(task, {1, 2, 1})) == doctest::Approx(0.0));
  CHECK(chain_entropy(uniform_state(task.layout())) == doctest::Approx(3.0 * std::log(2.0)));
  CHECK(shannon_entropy(Vector::Constant(4, 0.25)) == doctest::Approx(std::log(4.0)));
  CHECK(shannon_entropy(Vector::Unit(4, 2)) == 0.0);
  CHECK(marginal_entropy(Matrix::Identity(3, 3)) == 0.0);
}

TEST_CASE("mirror map constants") {
  CHECK(spmp_constants(TaskSpec::ranking(5)).lipschitz == doctest::Approx(5.0));
  CHECK(spmp_constants(TaskSpec::chain(1, 2)).lipschitz == doctest::Approx(2.0 * std::log(2.0)));
  const MirrorMap mc = spmp_constants(TaskSpec::multiclass(3));
  CHECK(mc.lipschitz > 0.0);
  CHECK(std::isfinite(mc.lipschitz));
  CHECK(mc.default_eta() == doctest::Approx(1.0 / (2.0 * mc.lipschitz)));
  for (const TaskSpec& t : {TaskSpec::multiclass(4), TaskSpec::ordinal(3), TaskSpec::chain(3, 3), TaskSpec::ranking(3)}) {
    const MirrorMap m = spmp_constants(t);
    const double want = std::max({m.beta11 * m.range_min, m.beta22 * m.range_max,
                                  m.beta12 * std::sqrt(m.range_min * m.range_max),
                                  m.beta21 * std::sqrt(m.range_min * m.range_max)});
    CHECK(m.lipschitz == doctest::Approx(want));
  }
}
