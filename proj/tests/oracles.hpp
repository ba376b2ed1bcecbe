#pragma once

// Reference implementations used only by the tests. They are deliberately
// naive (plain nested vectors, explicit dense matrices) and share no code
// with the library beyond its input types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "giam/hin_graph.hpp"
#include "giam/sparse_matrix.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense zeros(std::size_t r, std::size_t c) { return Dense(r, std::vector<double>(c, 0.0)); }

inline Dense identity(std::size_t n) {
  Dense d = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 1.0;
  return d;
}

inline Dense multiply(const Dense& a, const Dense& b) {
  const std::size_t n = a.size(), m = b.empty() ? 0 : b[0].size(), inner = b.size();
  Dense out = zeros(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < inner; ++k)
      for (std::size_t j = 0; j < m; ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

inline Dense from(const giam::SparseRowMatrix& s) {
  Dense d = zeros(s.rows(), s.cols());
  for (std::size_t r = 0; r < s.rows(); ++r)
    for (std::size_t c = 0; c < s.cols(); ++c) d[r][c] = s.at(r, c);
  return d;
}

inline Dense from(const giam::Matrix& m) {
  Dense d = zeros(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) d[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = m(r, c);
  return d;
}

/// Infinite on a shape mismatch, so an empty result never passes.
inline double max_abs_diff(const Dense& a, const Dense& b) {
  if (a.size() != b.size()) return INFINITY;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].size() != b[i].size()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) worst = std::max(worst, std::abs(a[i][j] - b[i][j]));
  return worst;
}

/// Symmetric 0/1 adjacency of an Erdos-Renyi graph.
inline Dense random_graph(std::size_t n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  Dense a = zeros(n, n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (coin(rng)) a[u][v] = a[v][u] = 1.0;
  return a;
}

inline giam::SparseRowMatrix to_sparse(const Dense& d) {
  std::vector<giam::Triplet> t;
  for (std::size_t r = 0; r < d.size(); ++r)
    for (std::size_t c = 0; c < d[r].size(); ++c)
      if (d[r][c] != 0.0) t.push_back({r, c, d[r][c]});
  return giam::SparseRowMatrix::from_triplets(d.size(), d.empty() ? 0 : d[0].size(), t);
}

/// A + I and the walk matrix D^-1 (A + I).
inline Dense augmented(const Dense& a) {
  Dense t = a;
  for (std::size_t i = 0; i < t.size(); ++i) t[i][i] = 1.0;
  return t;
}

inline std::vector<double> degrees(const Dense& aug) {
  std::vector<double> d;
  for (const auto& row : aug) {
    double s = 0.0;
    for (double x : row) s += x;
    d.push_back(s);
  }
  return d;
}

inline Dense walk_matrix(const Dense& a) {
  Dense t = augmented(a);
  const auto d = degrees(t);
  for (std::size_t i = 0; i < t.size(); ++i)
    for (double& x : t[i]) x /= d[i];
  return t;
}

/// Q with every entry written out: q_uv = d_v / sum(d).
inline Dense null_matrix(const Dense& a) {
  const auto d = degrees(augmented(a));
  double total = 0.0;
  for (double x : d) total += x;
  Dense q = zeros(a.size(), a.size());
  for (auto& row : q)
    for (std::size_t v = 0; v < row.size(); ++v) row[v] = d[v] / total;
  return q;
}

/// Constrained walk using the explicit dense S*Q product.
inline Dense constrained(const Dense& a, std::size_t steps) {
  const Dense p = walk_matrix(a), q = null_matrix(a);
  Dense s = identity(a.size());
  for (std::size_t k = 0; k < steps; ++k) {
    const Dense sp = multiply(s, p), sq = multiply(s, q);
    for (std::size_t u = 0; u < s.size(); ++u) {
      double sum = 0.0;
      for (std::size_t v = 0; v < s.size(); ++v) {
        s[u][v] = std::max(sp[u][v] - sq[u][v], 0.0);
        sum += s[u][v];
      }
      if (sum == 0.0) {
        std::fill(s[u].begin(), s[u].end(), 0.0);
        s[u][u] = 1.0;
      } else {
        for (double& x : s[u]) x /= sum;
      }
    }
  }
  return s;
}

inline Dense power(const Dense& p, std::size_t k) {
  Dense out = identity(p.size());
  for (std::size_t i = 0; i < k; ++i) out = multiply(out, p);
  return out;
}

/// ARI by explicit pair enumeration.
inline double ari_pairs(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  double both = 0, in_a = 0, in_b = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      in_a += sa;
      in_b += sb;
      pairs += 1;
    }
  if (pairs == 0) return 1.0;
  const double expected = in_a * in_b / pairs;
  const double max_index = 0.5 * (in_a + in_b);
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

/// Every set partition of n points as restricted-growth label strings.
inline std::vector<std::vector<int>> partitions(std::size_t n) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(n, 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int max_label) {
    if (i == n) {
      out.push_back(cur);
      return;
    }
    for (int l = 0; l <= max_label + 1; ++l) {
      cur[i] = l;
      rec(i + 1, std::max(max_label, l));
    }
  };
  if (n == 0) return {{}};
  cur[0] = 0;
  rec(1, 0);
  return out;
}

/// Mean softmax cross-entropy over the listed rows.
inline double cross_entropy(const Dense& logits, const std::vector<int>& labels,
                            const std::vector<std::size_t>& rows) {
  double total = 0.0;
  for (std::size_t r : rows) {
    double mx = -INFINITY;
    for (double x : logits[r]) mx = std::max(mx, x);
    double z = 0.0;
    for (double x : logits[r]) z += std::exp(x - mx);
    total += -(logits[r][static_cast<std::size_t>(labels[r])] - mx - std::log(z));
  }
  return total / static_cast<double>(rows.size());
}

}  // namespace oracle
