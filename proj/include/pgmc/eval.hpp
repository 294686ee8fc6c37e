#pragma once

// Scoring utilities: clustering accuracy against ground truth, stereotype
// words per class, and the 2-D principal-component view of the latent space.
// Everything here is pure; this is the only layer that touches labels.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "pgmc/errors.hpp"

namespace pgmc {

using SyllableSeq = std::vector<std::string>;

inline SyllableSeq split_syllables(const std::string& word) {
  SyllableSeq out;
  std::istringstream in(word);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline std::string join_syllables(const SyllableSeq& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += seq[i];
  }
  return out;
}

// Levenshtein distance over syllable tokens, unit costs.
inline std::size_t edit_distance(const SyllableSeq& a, const SyllableSeq& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  return edit_distance(split_syllables(a), split_syllables(b));
}

// The class member minimizing mean edit distance to all members; ties break
// toward the earliest index.
inline std::string stereotype(const std::vector<std::string>& words) {
  if (words.empty()) throw InputError("stereotype: empty class");
  std::vector<SyllableSeq> seqs;
  seqs.reserve(words.size());
  for (const auto& w : words) seqs.push_back(split_syllables(w));
  std::size_t best = 0;
  double best_mean = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < seqs.size(); ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      total += static_cast<double>(edit_distance(seqs[j], seqs[i]));
    }
    const double mean = total / static_cast<double>(seqs.size());
    if (mean < best_mean) {
      best_mean = mean;
      best = j;
    }
  }
  return words[best];
}

namespace detail {

// Hungarian algorithm (potentials + augmenting paths) on a square cost matrix;
// returns the column matched to each row.
inline std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0);  // match[col] = row (1-based)
  std::vector<int> way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (match[j] >= 1) row_to_col[match[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace detail

// Fraction of data matched under the best one-to-one cluster-to-label map,
// as a percentage.
inline double best_map_accuracy(const std::vector<int>& assignments,
                                const std::vector<int>& labels) {
  if (assignments.size() != labels.size()) {
    throw InputError("best_map_accuracy: length mismatch");
  }
  if (assignments.empty()) throw InputError("best_map_accuracy: empty input");
  int max_id = 0;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] < 0 || labels[i] < 0) throw InputError("best_map_accuracy: negative index");
    max_id = std::max({max_id, assignments[i], labels[i]});
  }
  const int n = max_id + 1;
  std::vector<std::vector<double>> confusion(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    confusion[assignments[i]][labels[i]] += 1.0;
  }
  // Maximize matches == minimize negated counts.
  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) cost[r][c] = -confusion[r][c];
  }
  const auto map = detail::min_cost_assignment(cost);
  double matched = 0.0;
  for (int r = 0; r < n; ++r) matched += confusion[r][map[r]];
  return 100.0 * matched / static_cast<double>(assignments.size());
}

struct Pca2Result {
  std::vector<std::array<double, 2>> coords;
  std::array<double, 2> variance_proportions{0.0, 0.0};
};

// Mean-centered projection onto the top two principal axes; proportions are
// the top-2 covariance eigenvalues over the trace.
inline Pca2Result pca2(const std::vector<std::vector<double>>& latents) {
  if (latents.size() < 3) throw InputError("pca2: need at least 3 rows");
  const std::size_t n = latents.size();
  const std::size_t d = latents[0].size();
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (latents[i].size() != d) throw DimensionError("pca2: ragged rows");
    for (std::size_t j = 0; j < d; ++j) x(i, j) = latents[i][j];
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  const double trace = cov.trace();

  Pca2Result result;
  result.coords.assign(n, {0.0, 0.0});
  if (!(trace > 0.0)) return result;  // zero-variance data

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  // Eigenvalues ascend; take the last two.
  const auto& values = solver.eigenvalues();
  const auto& vectors = solver.eigenvectors();
  const Eigen::Index top = values.size() - 1;
  Eigen::MatrixXd axes = Eigen::MatrixXd::Zero(d, 2);
  axes.col(0) = vectors.col(top);
  if (values.size() > 1) axes.col(1) = vectors.col(top - 1);
  const Eigen::MatrixXd proj = x * axes;
  for (std::size_t i = 0; i < n; ++i) {
    result.coords[i] = {proj(i, 0), proj(i, 1)};
  }
  result.variance_proportions[0] = std::max(0.0, values(top)) / trace;
  result.variance_proportions[1] =
      values.size() > 1 ? std::max(0.0, values(top - 1)) / trace : 0.0;
  return result;
}

}  // namespace pgmc
