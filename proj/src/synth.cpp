#include "m4n/synth.hpp"

#include "m4n/combinatorial.hpp"
#include "m4n/dataset_io.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

namespace m4n {
namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("synth: " + msg);
}

void validate(const SynthParams& p) {
  check(p.n >= 1, "n must be positive");
  check(p.dim >= 1, "dim must be positive");
  check(p.noise >= 0.0, "noise must be nonnegative");
  if (p.kind == "blobs" || p.kind == "ordinal") check(p.k >= 2, "k must be >= 2");
  if (p.kind == "blobs") check(p.separation >= 0.0, "separation must be nonnegative");
  if (p.kind == "flat-noise") {
    check(p.rho.size() >= 2, "flat-noise needs at least 2 class probabilities");
    double s = 0.0;
    for (double r : p.rho) {
      check(r >= 0.0, "probabilities must be nonnegative");
      s += r;
    }
    check(std::abs(s - 1.0) < 1e-9, "probabilities must sum to 1");
  }
  if (p.kind == "hmm") {
    check(p.length >= 1 && p.states >= 2 && p.states <= 26, "hmm needs length >= 1 and 2..26 states");
    check(p.stay > 0.0 && p.stay < 1.0, "stay probability must be in (0, 1)");
  }
  if (p.kind == "ranking") check(p.items >= 2 && p.items <= 10, "ranking needs 2..10 items");
}

Vector ordinal_direction(int dim) { return Vector::Constant(dim, 1.0 / std::sqrt(static_cast<double>(dim))); }

std::vector<double> ordinal_thresholds(int k) {
  std::vector<double> t(k - 1);
  for (int j = 0; j < k - 1; ++j) t[j] = -1.5 + 3.0 * (j + 1) / k;
  return t;
}

int bin_of(double z, const std::vector<double>& t) {
  return 1 + static_cast<int>(std::upper_bound(t.begin(), t.end(), z) - t.begin());
}

// Deterministic weights of the ranking model: item m scores W_m . x.
Matrix ranking_weights(int items, int dim) {
  Matrix w(items, dim);
  for (int m = 0; m < items; ++m) {
    for (int j = 0; j < dim; ++j) w(m, j) = std::cos(1.3 * (m + 1) * (j + 1)) + 0.3 * (m - (items - 1) / 2.0);
  }
  return w;
}

Label ranks_from_scores(const Vector& s) {
  const int M = static_cast<int>(s.size());
  std::vector<int> order(M);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return s(a) > s(b); });
  Label rank(M);
  for (int r = 0; r < M; ++r) rank[order[r]] = r + 1;
  return rank;
}

Matrix hmm_transition(const SynthParams& p) {
  const int R = p.states;
  Matrix t = Matrix::Constant(R, R, (1.0 - p.stay) / (R - 1));
  t.diagonal().setConstant(p.stay);
  return t;
}

// Emission mean of state r: separation along coordinate r mod dim, with a
// second coordinate breaking ties when states exceed dimensions.
Vector hmm_mean(const SynthParams& p, int r) {
  Vector mu = Vector::Zero(p.dim);
  mu(r % p.dim) += p.separation;
  if (r >= p.dim) mu((r + 1) % p.dim) -= p.separation * (r / p.dim);
  return mu;
}

Label hmm_bayes(const SynthParams& p, const Eigen::Ref<const Vector>& x) {
  const int M = p.length, R = p.states;
  const Matrix t = hmm_transition(p);
  const double var = std::max(p.noise * p.noise, 1e-12);
  Matrix unary(M, R);
  for (int m = 0; m < M; ++m) {
    for (int r = 0; r < R; ++r) unary(m, r) = -(x.segment(m * p.dim, p.dim) - hmm_mean(p, r)).squaredNorm() / (2.0 * var);
  }
  unary.row(0).array() += std::log(1.0 / R);
  std::vector<Matrix> pairwise(M > 0 ? M - 1 : 0, t.array().log().matrix());
  const PolytopeState marg = chain_marginals(unary, pairwise);
  Label y(M);
  for (int m = 0; m < M; ++m) {
    Eigen::Index arg;
    marg.values.segment(marg.layout.unary_offset(m), R).maxCoeff(&arg);
    y[m] = static_cast<int>(arg) + 1;
  }
  return y;
}

Label ranking_bayes(const SynthParams& p, const Eigen::Ref<const Vector>& x, std::uint64_t stream) {
  const int M = p.items;
  const Vector mean = ranking_weights(M, p.dim) * x;
  std::mt19937_64 rng(stream);
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix marg = Matrix::Zero(M, M);
  for (int s = 0; s < p.mc_samples; ++s) {
    Vector sc = mean;
    for (int m = 0; m < M; ++m) sc(m) += p.noise * nd(rng);
    const Label r = ranks_from_scores(sc);
    for (int m = 0; m < M; ++m) marg(m, r[m] - 1) += 1.0;
  }
  const Assignment a = hungarian_max_lex(marg);
  Label y(M);
  for (int m = 0; m < M; ++m) y[m] = a.column_of_row[m] + 1;
  return y;
}

}  // namespace

std::vector<Label> synth_bayes(const SynthParams& p, const Matrix& inputs) {
  validate(p);
  std::vector<Label> out;
  out.reserve(static_cast<std::size_t>(inputs.rows()));
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const Vector x = inputs.row(i).transpose();
    if (p.kind == "blobs") {
      // Nearest center along axis 0, lowest class on ties.
      int best = 1;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < p.k; ++c) {
        const double d = std::abs(x(0) - (c - (p.k - 1) / 2.0) * p.separation);
        if (d < bd) {
          bd = d;
          best = c + 1;
        }
      }
      out.push_back({best});
    } else if (p.kind == "flat-noise") {
      const auto it = std::max_element(p.rho.begin(), p.rho.end());
      out.push_back({static_cast<int>(it - p.rho.begin()) + 1});
    } else if (p.kind == "ordinal") {
      out.push_back({std::min(p.k, bin_of(ordinal_direction(p.dim).dot(x), ordinal_thresholds(p.k)))});
    } else if (p.kind == "hmm") {
      out.push_back(hmm_bayes(p, x));
    } else if (p.kind == "ranking") {
      out.push_back(ranking_bayes(p, x, p.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1))));
    } else {
      throw std::invalid_argument("synth: unknown kind '" + p.kind + "'");
    }
  }
  return out;
}

SynthResult synth_generate(const SynthParams& p) {
  validate(p);
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Dataset d;
  std::optional<TaskSpec> task;
  std::optional<double> bayes_error;

  if (p.kind == "blobs") {
    task = TaskSpec::multiclass(p.k);
    d.inputs.resize(p.n, p.dim);
    std::uniform_int_distribution<int> cls(0, p.k - 1);
    for (int i = 0; i < p.n; ++i) {
      const int c = cls(rng);
      for (int j = 0; j < p.dim; ++j) d.inputs(i, j) = nd(rng);
      d.inputs(i, 0) += (c - (p.k - 1) / 2.0) * p.separation;
      d.labels.push_back({c + 1});
    }
    bayes_error = 2.0 * (p.k - 1) / p.k * normal_cdf(-p.separation / 2.0);
  } else if (p.kind == "flat-noise") {
    const int k = static_cast<int>(p.rho.size());
    task = TaskSpec::multiclass(k);
    d.inputs.resize(p.n, p.dim);
    std::discrete_distribution<int> cls(p.rho.begin(), p.rho.end());
    for (int i = 0; i < p.n; ++i) {
      for (int j = 0; j < p.dim; ++j) d.inputs(i, j) = unif(rng);
      d.labels.push_back({cls(rng) + 1});
    }
    bayes_error = 1.0 - *std::max_element(p.rho.begin(), p.rho.end());
  } else if (p.kind == "ordinal") {
    task = TaskSpec::ordinal(p.k);
    d.inputs.resize(p.n, p.dim);
    const Vector w = ordinal_direction(p.dim);
    const auto t = ordinal_thresholds(p.k);
    for (int i = 0; i < p.n; ++i) {
      for (int j = 0; j < p.dim; ++j) d.inputs(i, j) = nd(rng);
      const double z = w.dot(d.inputs.row(i).transpose()) + p.noise * nd(rng);
      d.labels.push_back({bin_of(z, t)});
    }
  } else if (p.kind == "hmm") {
    task = TaskSpec::chain(p.length, p.states);
    d.inputs.resize(p.n, p.length * p.dim);
    const Matrix t = hmm_transition(p);
    std::uniform_int_distribution<int> first(0, p.states - 1);
    for (int i = 0; i < p.n; ++i) {
      Label y(p.length);
      int s = first(rng);
      for (int m = 0; m < p.length; ++m) {
        if (m > 0) {
          // t is column-major, so copy the row before taking its data.
          const Vector row = t.row(s).transpose();
          std::discrete_distribution<int> step(row.data(), row.data() + p.states);
          s = step(rng);
        }
        y[m] = s + 1;
        const Vector mu = hmm_mean(p, s);
        for (int j = 0; j < p.dim; ++j) d.inputs(i, m * p.dim + j) = mu(j) + p.noise * nd(rng);
      }
      d.labels.push_back(std::move(y));
    }
  } else if (p.kind == "ranking") {
    task = TaskSpec::ranking(p.items);
    d.inputs.resize(p.n, p.dim);
    const Matrix w = ranking_weights(p.items, p.dim);
    for (int i = 0; i < p.n; ++i) {
      for (int j = 0; j < p.dim; ++j) d.inputs(i, j) = nd(rng);
      Vector s = w * d.inputs.row(i).transpose();
      for (int m = 0; m < p.items; ++m) s(m) += p.noise * nd(rng);
      d.labels.push_back(ranks_from_scores(s));
    }
  } else {
    throw std::invalid_argument("synth: unknown kind '" + p.kind + "'");
  }
  SynthResult out{std::move(d), *task, {}, bayes_error};
  out.bayes = synth_bayes(p, out.data.inputs);
  return out;
}

void write_synth(const std::string& path, const SynthResult& result) {
  write_dataset(path, result.data, result.task);
  std::ofstream out(path + ".bayes", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + ".bayes'");
  out << "bayes_label\n";
  for (const Label& y : result.bayes) out << format_label(result.task, y) << '\n';
}

}  // namespace m4n
