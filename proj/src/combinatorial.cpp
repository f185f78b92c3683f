#include "m4n/combinatorial.hpp"

#include <algorithm>
#include <limits>

namespace m4n {
namespace {

// Suffix values best[m](r): best score of positions m..M-1 given y_m = r.
std::vector<Vector> backward_values(const Matrix& unary, const std::vector<Matrix>& pairwise) {
  const int length = static_cast<int>(unary.rows());
  std::vector<Vector> best(length);
  best[length - 1] = unary.row(length - 1).transpose();
  for (int m = length - 2; m >= 0; --m) {
    const Matrix& pw = pairwise[m];
    Vector b(unary.cols());
    for (int r = 0; r < unary.cols(); ++r) {
      b(r) = unary(m, r) + (pw.row(r).transpose() + best[m + 1]).maxCoeff();
    }
    best[m] = std::move(b);
  }
  return best;
}

void check_chain_shapes(const Matrix& unary, const std::vector<Matrix>& pairwise) {
  if (unary.rows() < 1 || unary.cols() < 1) {
    throw std::invalid_argument("viterbi: empty unary score matrix");
  }
  if (static_cast<Eigen::Index>(pairwise.size()) != unary.rows() - 1) {
    throw std::invalid_argument("viterbi: need length-1 pairwise blocks");
  }
  for (const Matrix& pw : pairwise) {
    if (pw.rows() != unary.cols() || pw.cols() != unary.cols()) {
      throw std::invalid_argument("viterbi: pairwise block must be R x R");
    }
  }
}

// e-maxx formulation, minimizes cost over a square matrix.
double hungarian_min(const Matrix& cost, std::vector<int>& column_of_row) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  column_of_row.assign(n, -1);
  double total = 0.0;
  for (int j = 1; j <= n; ++j) {
    column_of_row[p[j] - 1] = j - 1;
  }
  for (int i = 0; i < n; ++i) total += cost(i, column_of_row[i]);
  return total;
}

}  // namespace

ChainDecode viterbi(const Matrix& unary, const std::vector<Matrix>& pairwise) {
  check_chain_shapes(unary, pairwise);
  const int length = static_cast<int>(unary.rows());
  const auto best = backward_values(unary, pairwise);

  ChainDecode out;
  out.states.resize(length);
  Eigen::Index arg = 0;
  out.score = best[0].maxCoeff(&arg);  // first maximizer == smallest state
  out.states[0] = static_cast<int>(arg);
  for (int m = 1; m < length; ++m) {
    const Vector cand = pairwise[m - 1].row(out.states[m - 1]).transpose() + best[m];
    cand.maxCoeff(&arg);
    out.states[m] = static_cast<int>(arg);
  }
  return out;
}

double viterbi_value(const Matrix& unary, const std::vector<Matrix>& pairwise) {
  check_chain_shapes(unary, pairwise);
  return backward_values(unary, pairwise)[0].maxCoeff();
}

Assignment hungarian_max(const Matrix& weights) {
  if (weights.rows() != weights.cols() || weights.rows() == 0) {
    throw std::invalid_argument("hungarian: weights must be a nonempty square matrix");
  }
  Assignment out;
  out.score = -hungarian_min(-weights, out.column_of_row);
  return out;
}

Assignment hungarian_max_lex(const Matrix& weights) {
  const Assignment opt = hungarian_max(weights);
  const int n = static_cast<int>(weights.rows());
  const double tol = 1e-9 * (1.0 + std::abs(opt.score) + weights.cwiseAbs().maxCoeff());

  std::vector<int> rows_left(n), cols_left(n);
  for (int i = 0; i < n; ++i) rows_left[i] = cols_left[i] = i;

  Assignment out;
  out.column_of_row.assign(n, -1);
  double fixed = 0.0;
  for (int m = 0; m < n; ++m) {
    rows_left.erase(rows_left.begin());
    bool placed = false;
    for (std::size_t ci = 0; ci < cols_left.size() && !placed; ++ci) {
      const int c = cols_left[ci];
      double rest = 0.0;
      if (!rows_left.empty()) {
        Matrix sub(rows_left.size(), rows_left.size());
        int jj = 0;
        for (std::size_t cj = 0; cj < cols_left.size(); ++cj) {
          if (cj == ci) continue;
          for (std::size_t ii = 0; ii < rows_left.size(); ++ii) {
            sub(ii, jj) = weights(rows_left[ii], cols_left[cj]);
          }
          ++jj;
        }
        rest = hungarian_max(sub).score;
      }
      if (fixed + weights(m, c) + rest >= opt.score - tol) {
        out.column_of_row[m] = c;
        fixed += weights(m, c);
        cols_left.erase(cols_left.begin() + static_cast<std::ptrdiff_t>(ci));
        placed = true;
      }
    }
    if (!placed) {
      // Unreachable in exact arithmetic; fall back to the plain optimum.
      return opt;
    }
  }
  out.score = fixed;
  return out;
}

}  // namespace m4n
