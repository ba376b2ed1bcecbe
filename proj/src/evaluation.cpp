#include "giam/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

namespace giam {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::vector<int> compact(const std::vector<int>& labels) {
  std::map<int, int> ids;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = ids.emplace(labels[i], static_cast<int>(ids.size()));
    out[i] = it->second;
  }
  return out;
}

/// Contingency table of two compacted labelings.
std::vector<std::vector<double>> contingency(const std::vector<int>& a, const std::vector<int>& b) {
  const int ka = a.empty() ? 0 : *std::max_element(a.begin(), a.end()) + 1;
  const int kb = b.empty() ? 0 : *std::max_element(b.begin(), b.end()) + 1;
  std::vector<std::vector<double>> table(static_cast<std::size_t>(ka),
                                         std::vector<double>(static_cast<std::size_t>(kb), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) table[static_cast<std::size_t>(a[i])][static_cast<std::size_t>(b[i])] += 1.0;
  return table;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

F1Scores f1_scores(const std::vector<int>& predicted, const std::vector<int>& truth,
                   std::size_t classes) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("f1: length mismatch");
  std::vector<double> tp(classes, 0.0), fp(classes, 0.0), fn(classes, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto p = static_cast<std::size_t>(predicted[i]);
    const auto t = static_cast<std::size_t>(truth[i]);
    if (p >= classes || t >= classes) throw std::invalid_argument("f1: label outside class set");
    if (p == t) {
      tp[t] += 1.0;
    } else {
      fp[p] += 1.0;
      fn[t] += 1.0;
    }
  }
  F1Scores out;
  double tp_all = 0.0, fp_all = 0.0, fn_all = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    out.macro += denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;
    tp_all += tp[c];
    fp_all += fp[c];
    fn_all += fn[c];
  }
  out.macro /= static_cast<double>(classes);
  const double denom = 2.0 * tp_all + fp_all + fn_all;
  out.micro = denom > 0.0 ? 2.0 * tp_all / denom : 0.0;
  return out;
}

double nmi(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("nmi: length mismatch");
  if (predicted.empty()) return 0.0;
  const auto table = contingency(compact(predicted), compact(truth));
  const double n = static_cast<double>(predicted.size());
  std::vector<double> rows(table.size(), 0.0), cols(table.front().size(), 0.0);
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (std::size_t j = 0; j < table[i].size(); ++j) {
      rows[i] += table[i][j];
      cols[j] += table[i][j];
    }
  }
  auto entropy = [n](const std::vector<double>& counts) {
    double h = 0.0;
    for (double c : counts) {
      if (c > 0.0) h -= (c / n) * std::log(c / n);
    }
    return h;
  };
  const double h_pred = entropy(rows);
  const double h_true = entropy(cols);
  if (rows.size() < 2 || cols.size() < 2) return 0.0;
  double mi = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (std::size_t j = 0; j < table[i].size(); ++j) {
      const double c = table[i][j];
      if (c > 0.0) mi += (c / n) * std::log(c * n / (rows[i] * cols[j]));
    }
  }
  const double norm = 0.5 * (h_pred + h_true);
  return norm > 0.0 ? std::clamp(mi / norm, 0.0, 1.0) : 0.0;
}

double ari(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("ari: length mismatch");
  if (predicted.size() < 2) return 1.0;
  const auto table = contingency(compact(predicted), compact(truth));
  auto pairs = [](double c) { return c * (c - 1.0) / 2.0; };
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  std::vector<double> cols(table.front().size(), 0.0);
  for (const auto& row : table) {
    double r = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      index += pairs(row[j]);
      r += row[j];
      cols[j] += row[j];
    }
    sum_rows += pairs(r);
  }
  for (double c : cols) sum_cols += pairs(c);
  const double total = pairs(static_cast<double>(predicted.size()));
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

KMeansResult kmeans(const Matrix& points, std::size_t k, const KMeansOptions& options) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k < 1) throw std::invalid_argument("kmeans: K must be positive");
  if (k > n) {
    throw std::invalid_argument("kmeans: K = " + std::to_string(k) + " exceeds point count " +
                                std::to_string(n));
  }
  std::mt19937_64 rng(options.seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();

  std::vector<double> dist(n);
  std::vector<int> labels(n);
  for (std::size_t restart = 0; restart < std::max<std::size_t>(1, options.restarts); ++restart) {
    // k-means++ seeding
    Matrix centers(idx(k), points.cols());
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    centers.row(0) = points.row(idx(pick(rng)));
    for (std::size_t i = 0; i < n; ++i) dist[i] = (points.row(idx(i)) - centers.row(0)).squaredNorm();
    for (std::size_t c = 1; c < k; ++c) {
      double total = 0.0;
      for (double d : dist) total += d;
      std::size_t chosen = 0;
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng);
        for (chosen = 0; chosen + 1 < n; ++chosen) {
          target -= dist[chosen];
          if (target <= 0.0 && dist[chosen] > 0.0) break;
        }
      } else {
        chosen = pick(rng);
      }
      centers.row(idx(c)) = points.row(idx(chosen));
      for (std::size_t i = 0; i < n; ++i) {
        dist[i] = std::min(dist[i], (points.row(idx(i)) - centers.row(idx(c))).squaredNorm());
      }
    }

    double inertia = 0.0;
    for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
      inertia = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double bd = std::numeric_limits<double>::infinity();
        int bc = 0;
        for (std::size_t c = 0; c < k; ++c) {
          const double d = (points.row(idx(i)) - centers.row(idx(c))).squaredNorm();
          if (d < bd) {
            bd = d;
            bc = static_cast<int>(c);
          }
        }
        labels[i] = bc;
        dist[i] = bd;
        inertia += bd;
      }
      Matrix next = Matrix::Zero(idx(k), points.cols());
      std::vector<std::size_t> counts(k, 0);
      for (std::size_t i = 0; i < n; ++i) {
        next.row(labels[i]) += points.row(idx(i));
        ++counts[static_cast<std::size_t>(labels[i])];
      }
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] > 0) {
          next.row(idx(c)) /= static_cast<double>(counts[c]);
          continue;
        }
        // Empty cluster: re-seed at the point farthest from its center.
        const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        next.row(idx(c)) = points.row(idx(far));
        dist[far] = 0.0;
      }
      const double shift = (next - centers).rowwise().norm().maxCoeff();
      centers = next;
      if (shift <= options.tolerance) break;
    }
    // Final assignment against the settled centers.
    inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = (points.row(idx(i)) - centers.row(idx(c))).squaredNorm();
        if (d < bd) {
          bd = d;
          labels[i] = static_cast<int>(c);
        }
      }
      inertia += bd;
    }
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.labels = labels;
      best.centers = centers;
    }
  }
  return best;
}

namespace {

/// Objective and gradient of the penalized multinomial loss at w.
double probe_objective(const Matrix& xb, const std::vector<int>& y, const Matrix& w, double lambda,
                       Matrix& grad) {
  const Matrix logits = xb * w;
  Matrix p(logits.rows(), logits.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - top).exp();
    const double z = p.row(i).sum();
    p.row(i) /= z;
    loss += top + std::log(z) - logits(i, y[static_cast<std::size_t>(i)]);
    p(i, y[static_cast<std::size_t>(i)]) -= 1.0;
  }
  grad = xb.transpose() * p;
  const Eigen::Index dim = w.rows() - 1;
  grad.topRows(dim) += lambda * w.topRows(dim);
  loss += 0.5 * lambda * w.topRows(dim).squaredNorm();
  return loss;
}

Matrix with_bias(const Matrix& x) {
  Matrix xb(x.rows(), x.cols() + 1);
  xb.leftCols(x.cols()) = x;
  xb.col(x.cols()).setOnes();
  return xb;
}

}  // namespace

void LinearProbe::fit(const Matrix& x, const std::vector<int>& y, std::size_t classes,
                      const ProbeOptions& options) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw std::invalid_argument("probe: row/label mismatch");
  const Matrix xb = with_bias(x);
  const double lambda = 1.0 / options.regularization;
  Matrix w = Matrix::Zero(xb.cols(), idx(classes));
  Matrix g;
  double f = probe_objective(xb, y, w, lambda, g);

  // Limited-memory BFGS with Armijo backtracking.
  constexpr std::size_t kMemory = 10;
  std::deque<Matrix> s_hist, y_hist;
  std::deque<double> rho_hist;
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    if (g.cwiseAbs().maxCoeff() <= options.tolerance * std::max(1.0, std::abs(f))) break;
    Matrix q = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t j = s_hist.size(); j-- > 0;) {
      alpha[j] = rho_hist[j] * s_hist[j].cwiseProduct(q).sum();
      q -= alpha[j] * y_hist[j];
    }
    if (!s_hist.empty()) {
      q *= s_hist.back().cwiseProduct(y_hist.back()).sum() / y_hist.back().squaredNorm();
    }
    for (std::size_t j = 0; j < s_hist.size(); ++j) {
      const double beta = rho_hist[j] * y_hist[j].cwiseProduct(q).sum();
      q += (alpha[j] - beta) * s_hist[j];
    }
    Matrix dir = -q;
    double slope = g.cwiseProduct(dir).sum();
    if (slope >= 0.0) {
      dir = -g;
      slope = -g.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }
    double step = s_hist.empty() ? std::min(1.0, 1.0 / std::max(1e-12, g.cwiseAbs().maxCoeff())) : 1.0;
    Matrix w_next, g_next;
    double f_next = f;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      w_next = w + step * dir;
      f_next = probe_objective(xb, y, w_next, lambda, g_next);
      if (f_next <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    Matrix s = w_next - w;
    Matrix yy = g_next - g;
    const double sy = s.cwiseProduct(yy).sum();
    const double rel_change = std::abs(f - f_next) / std::max({std::abs(f), std::abs(f_next), 1.0});
    w = std::move(w_next);
    g = std::move(g_next);
    f = f_next;
    if (sy > 1e-12) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yy));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > kMemory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    if (rel_change < 1e-12) break;
  }
  weights_ = std::move(w);
}

std::vector<int> LinearProbe::predict(const Matrix& x) const {
  const Matrix logits = with_bias(x) * weights_;
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    logits.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

ProbeScore linear_probe(const Matrix& embeddings, const std::vector<int>& labels, double ratio,
                        std::size_t repeats, std::uint64_t seed, const ProbeOptions& options) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("probe ratio must lie in (0, 1)");
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size()) {
    throw std::invalid_argument("probe: embeddings/labels length mismatch");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) by_class[labels[i]].push_back(i);
  }
  if (by_class.size() < 2) throw std::invalid_argument("probe needs at least two classes");
  const auto classes = static_cast<std::size_t>(by_class.rbegin()->first + 1);

  std::mt19937_64 rng(seed);
  std::vector<double> macros, micros;
  for (std::size_t rep = 0; rep < repeats; ++rep) {
    std::vector<std::size_t> train, test;
    bool ok = false;
    for (std::size_t attempt = 0; attempt <= options.max_split_retries && !ok; ++attempt) {
      train.clear();
      test.clear();
      for (auto [cls, members] : by_class) {
        std::shuffle(members.begin(), members.end(), rng);
        auto take = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(members.size())));
        take = std::min(take, members.size() > 1 ? members.size() - 1 : members.size());
        train.insert(train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
        test.insert(test.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
      }
      std::set<int> present;
      for (std::size_t i : train) present.insert(labels[i]);
      ok = present.size() == by_class.size() && !test.empty();
    }
    if (!ok) {
      throw std::runtime_error("probe: could not draw a split with every class on the train side at ratio " +
                               std::to_string(ratio));
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    Matrix xtr(idx(train.size()), embeddings.cols()), xte(idx(test.size()), embeddings.cols());
    std::vector<int> ytr(train.size()), yte(test.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      xtr.row(idx(i)) = embeddings.row(idx(train[i]));
      ytr[i] = labels[train[i]];
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
      xte.row(idx(i)) = embeddings.row(idx(test[i]));
      yte[i] = labels[test[i]];
    }
    LinearProbe probe;
    probe.fit(xtr, ytr, classes, options);
    const F1Scores f1 = f1_scores(probe.predict(xte), yte, classes);
    macros.push_back(f1.macro);
    micros.push_back(f1.micro);
  }
  return {mean(macros), mean(micros), stddev(macros), stddev(micros)};
}

ClusterScore cluster_scores(const Matrix& embeddings, const std::vector<int>& labels,
                            std::size_t repeats, std::uint64_t seed) {
  std::vector<std::size_t> rows;
  std::set<int> classes;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) {
      rows.push_back(i);
      classes.insert(labels[i]);
    }
  }
  Matrix x(idx(rows.size()), embeddings.cols());
  std::vector<int> truth(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(idx(i)) = embeddings.row(idx(rows[i]));
    truth[i] = labels[rows[i]];
  }
  std::vector<double> nmis, aris;
  for (std::size_t rep = 0; rep < repeats; ++rep) {
    KMeansOptions opt;
    opt.seed = seed + 1000003ULL * rep;
    const auto result = kmeans(x, classes.size(), opt);
    nmis.push_back(nmi(result.labels, truth));
    aris.push_back(ari(result.labels, truth));
  }
  return {mean(nmis), stddev(nmis), mean(aris), stddev(aris)};
}

EvalReport evaluate_embeddings(const Matrix& embeddings, const std::vector<int>& labels,
                               const std::vector<double>& ratios, std::size_t repeats,
                               std::uint64_t seed) {
  EvalReport report;
  report.ratios = ratios;
  report.repeats = repeats;
  report.seed = seed;
  for (double r : ratios) report.probe.push_back(linear_probe(embeddings, labels, r, repeats, seed));
  report.clustering = cluster_scores(embeddings, labels, repeats, seed);
  return report;
}

}  // namespace giam
