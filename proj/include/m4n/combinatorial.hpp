#pragma once

#include "m4n/core.hpp"

namespace m4n {

struct ChainDecode {
  std::vector<int> states;  // zero-based
  double score;
};

/// Max-sum over a chain with unary scores (M x R) and pairwise scores, where
/// pairwise[p](r, s) scores (y_p = r, y_{p+1} = s). Returns the
/// lexicographically smallest maximizer.
ChainDecode viterbi(const Matrix& unary, const std::vector<Matrix>& pairwise);

/// Value of the max-sum problem only.
double viterbi_value(const Matrix& unary, const std::vector<Matrix>& pairwise);

struct Assignment {
  std::vector<int> column_of_row;  // zero-based
  double score;
};

/// Maximum-weight perfect matching on a square matrix (Hungarian algorithm).
Assignment hungarian_max(const Matrix& weights);

/// Same optimum value, but the lexicographically smallest optimal
/// assignment (rows fixed in order, smallest feasible column first).
Assignment hungarian_max_lex(const Matrix& weights);

}  // namespace m4n
