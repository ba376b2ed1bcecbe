#include "giam/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace giam {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

void check_mask(const LabeledSplit& split, const std::vector<std::size_t>& mask) {
  if (mask.empty()) throw std::invalid_argument("loss over an empty mask");
  for (std::size_t i : mask) {
    if (i >= split.labels.size() || split.labels[i] < 0) {
      throw std::invalid_argument("mask index " + std::to_string(i) + " has no label");
    }
  }
}

/// Accumulates S^T G split back from a grouped concatenation.
Matrix scatter_groups(const Grouping& grouping, const Matrix& dconcat, Eigen::Index width) {
  Matrix out = Matrix::Zero(dconcat.rows(), width);
  for (std::size_t g = 0; g < grouping.operators.size(); ++g) {
    out += multiply_transposed(grouping.operators[g], dconcat.middleCols(idx(g) * width, width));
  }
  return out;
}

}  // namespace

void LabeledSplit::validate() const {
  std::set<std::size_t> seen;
  for (const auto* mask : {&train, &validation, &test}) {
    for (std::size_t i : *mask) {
      if (i >= labels.size() || labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
        throw std::invalid_argument("split index " + std::to_string(i) + " carries no valid label");
      }
      if (!seen.insert(i).second) {
        throw std::invalid_argument("split masks overlap at index " + std::to_string(i));
      }
    }
  }
}

LabeledSplit make_split(const std::vector<int>& labels, std::size_t train_count,
                        std::size_t validation_count, std::uint64_t seed) {
  LabeledSplit split;
  split.labels = labels;
  std::vector<std::size_t> labeled;
  int max_label = -1;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) {
      labeled.push_back(i);
      max_label = std::max(max_label, labels[i]);
    }
  }
  split.classes = static_cast<std::size_t>(max_label + 1);
  if (train_count + validation_count > labeled.size()) {
    throw std::invalid_argument("split asks for " + std::to_string(train_count + validation_count) +
                                " nodes but only " + std::to_string(labeled.size()) +
                                " are labeled");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(labeled.begin(), labeled.end(), rng);
  // Stratify: order by rank within the node's class over the class size, so
  // every prefix draws from each class in proportion.
  {
    std::vector<std::size_t> seen(split.classes, 0), size(split.classes, 0);
    for (std::size_t i : labeled) ++size[static_cast<std::size_t>(labels[i])];
    std::vector<std::pair<double, std::size_t>> keyed;
    for (std::size_t i : labeled) {
      const auto c = static_cast<std::size_t>(labels[i]);
      keyed.emplace_back((static_cast<double>(seen[c]++) + 0.5) / static_cast<double>(size[c]), i);
    }
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t j = 0; j < keyed.size(); ++j) labeled[j] = keyed[j].second;
  }
  split.train.assign(labeled.begin(), labeled.begin() + static_cast<std::ptrdiff_t>(train_count));
  split.validation.assign(labeled.begin() + static_cast<std::ptrdiff_t>(train_count),
                          labeled.begin() + static_cast<std::ptrdiff_t>(train_count + validation_count));
  split.test.assign(labeled.begin() + static_cast<std::ptrdiff_t>(train_count + validation_count),
                    labeled.end());
  for (auto* m : {&split.train, &split.validation, &split.test}) std::sort(m->begin(), m->end());
  return split;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (patience < 1) throw std::invalid_argument("patience must be at least 1");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be at least 1");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw std::invalid_argument("moment decay coefficients must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be non-negative");
}

double cross_entropy(const Matrix& logits, const LabeledSplit& split,
                     const std::vector<std::size_t>& mask) {
  check_mask(split, mask);
  double total = 0.0;
  for (std::size_t i : mask) {
    const auto row = logits.row(idx(i));
    const double top = row.maxCoeff();
    const double lse = top + std::log((row.array() - top).exp().sum());
    total += lse - row(split.labels[i]);
  }
  return total / static_cast<double>(mask.size());
}

double cross_entropy(const Matrix& classifier, const Matrix& embeddings, const LabeledSplit& split,
                     const std::vector<std::size_t>& mask) {
  return cross_entropy(embeddings * classifier, split, mask);
}

Matrix cross_entropy_gradient(const Matrix& logits, const LabeledSplit& split,
                              const std::vector<std::size_t>& mask) {
  check_mask(split, mask);
  Matrix grad = Matrix::Zero(logits.rows(), logits.cols());
  const double scale = 1.0 / static_cast<double>(mask.size());
  for (std::size_t i : mask) {
    const auto row = logits.row(idx(i));
    const double top = row.maxCoeff();
    Eigen::RowVectorXd p = (row.array() - top).exp();
    p /= p.sum();
    p(split.labels[i]) -= 1.0;
    grad.row(idx(i)) = scale * p;
  }
  return grad;
}

double accuracy(const Matrix& logits, const LabeledSplit& split, const std::vector<std::size_t>& mask) {
  if (mask.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i : mask) {
    Eigen::Index best = 0;
    logits.row(idx(i)).maxCoeff(&best);
    if (best == split.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(mask.size());
}

ModelParams backward(const ModelContext& ctx, const ModelConfig& cfg, const ModelParams& params,
                     const ForwardResult& fwd, const Matrix& dlogits) {
  ModelParams grad = params.zeros_like();
  const ForwardCache& c = fwd.cache;
  Matrix dinput;  // gradient w.r.t. the (dropped-out) projected features

  switch (ctx.variant) {
    case Variant::gcn: {
      grad.weights[1] = c.gcn_propagated_hidden.transpose() * dlogits;
      const Matrix dhidden = multiply_transposed(ctx.normalized, dlogits * params.weights[1].transpose());
      const Matrix dz = dhidden.cwiseProduct(activation_derivative(Activation::relu, c.preactivations[0]));
      grad.weights[0] = c.layer_inputs[0].transpose() * dz;
      dinput = multiply_transposed(ctx.normalized, dz * params.weights[0].transpose());
      break;
    }
    case Variant::giam1: {
      grad.classifier = fwd.embeddings.transpose() * dlogits;
      Matrix dh = dlogits * params.classifier.transpose();
      for (std::size_t l = params.weights.size(); l-- > 0;) {
        const Matrix dz = dh.cwiseProduct(activation_derivative(cfg.activation, c.preactivations[l]));
        grad.weights[l] = c.concatenated[l].transpose() * dz;
        dh = scatter_groups(ctx.grouping, dz * params.weights[l].transpose(), c.layer_inputs[l].cols());
      }
      dinput = dh;
      break;
    }
    case Variant::giam2: {
      grad.classifier = fwd.embeddings.transpose() * dlogits;
      const Matrix dh = dlogits * params.classifier.transpose();
      const Matrix dz = dh.cwiseProduct(activation_derivative(cfg.activation, c.preactivations[0]));
      grad.weights[0] = c.concatenated[0].transpose() * dz;
      dinput = scatter_groups(ctx.grouping, dz * params.weights[0].transpose(), c.input.cols());
      break;
    }
    case Variant::giam: {
      grad.classifier = fwd.embeddings.transpose() * dlogits;
      const Matrix dh = dlogits * params.classifier.transpose();
      const std::size_t heads = params.head_projections.size();
      const Eigen::Index hw = params.head_projections.front().cols();
      dinput = Matrix::Zero(c.input.rows(), c.input.cols());
      for (std::size_t g = 0; g < ctx.grouping.operators.size(); ++g) {
        const SparseRowMatrix& op = ctx.grouping.operators[g];
        for (std::size_t k = 0; k < heads; ++k) {
          const std::size_t slot = g * heads + k;
          const AttentionCache& ac = c.attention[slot];
          const Matrix& y = ac.projected;
          const Vector mu = params.attention.row(idx(slot)).transpose();
          const Vector mu_self = mu.head(hw);
          const Vector mu_nbr = mu.tail(hw);
          const Matrix dpre = dh.middleCols(idx(slot) * hw, hw)
                                  .cwiseProduct(activation_derivative(cfg.activation, ac.pre_output));
          Matrix dy = Matrix::Zero(y.rows(), y.cols());
          Vector dmu_self = Vector::Zero(hw);
          Vector dmu_nbr = Vector::Zero(hw);
          std::size_t flat = 0;
          std::vector<double> dalpha;
          for (std::size_t u = 0; u < op.rows(); ++u) {
            const auto cs = op.row_cols(u);
            if (cs.empty()) continue;
            dalpha.assign(cs.size(), 0.0);
            double weighted = 0.0;
            for (std::size_t j = 0; j < cs.size(); ++j) {
              const double a = ac.alpha[flat + j];
              const double m = ac.alpha_mask[flat + j];
              dy.row(idx(cs[j])) += a * m * dpre.row(idx(u));
              dalpha[j] = m * dpre.row(idx(u)).dot(y.row(idx(cs[j])));
              weighted += a * dalpha[j];
            }
            for (std::size_t j = 0; j < cs.size(); ++j) {
              const double a = ac.alpha[flat + j];
              const double de = a * (dalpha[j] - weighted);
              const double pre = ac.preact[flat + j];
              const double dpreact = de * (pre > 0.0 ? 1.0 : cfg.leaky_slope);
              dmu_self += dpreact * y.row(idx(u)).transpose();
              dmu_nbr += dpreact * y.row(idx(cs[j])).transpose();
              dy.row(idx(u)) += dpreact * mu_self.transpose();
              dy.row(idx(cs[j])) += dpreact * mu_nbr.transpose();
            }
            flat += cs.size();
          }
          grad.attention.row(idx(slot)).head(hw) = dmu_self.transpose();
          grad.attention.row(idx(slot)).tail(hw) = dmu_nbr.transpose();
          grad.head_projections[k] += c.input.transpose() * dy;
          dinput += dy * params.head_projections[k].transpose();
        }
      }
      break;
    }
    case Variant::giam3: {
      grad.classifier = fwd.embeddings.transpose() * dlogits;
      const Matrix dh = dlogits * params.classifier.transpose();
      const Matrix w = row_softmax(params.metapath_logits);
      const std::size_t paths = c.path_outputs.size();
      Vector dw(idx(paths));
      for (std::size_t m = 0; m < paths; ++m) dw(idx(m)) = dh.cwiseProduct(c.path_outputs[m]).sum();
      const double mean = (w.row(0).transpose().array() * dw.array()).sum();
      dinput = Matrix::Zero(c.input.rows(), c.input.cols());
      for (std::size_t m = 0; m < paths; ++m) {
        grad.metapath_logits(0, idx(m)) = w(0, idx(m)) * (dw(idx(m)) - mean);
        const Matrix dz = (w(0, idx(m)) * dh).cwiseProduct(
            activation_derivative(cfg.activation, c.preactivations[m]));
        grad.weights[0] += c.path_inputs[m].transpose() * dz;
        dinput += multiply_transposed(ctx.metapath_states[m], dz * params.weights[0].transpose());
      }
      break;
    }
  }

  if (c.feature_mask.size() > 0) dinput = dinput.cwiseProduct(c.feature_mask);
  for (std::size_t t = 0; t < ctx.type_ranges.size(); ++t) {
    const auto& r = ctx.type_ranges[t];
    grad.projections[t] =
        ctx.features.blocks[t].transpose() * dinput.middleRows(idx(r.begin), idx(r.size()));
  }
  return grad;
}

LossAndGradient loss_and_gradient(const ModelContext& ctx, const ModelConfig& cfg,
                                  const ModelParams& params, const LabeledSplit& split,
                                  const std::vector<std::size_t>& mask, DropoutSource drop) {
  const ForwardResult fwd = forward(ctx, cfg, params, drop);
  LossAndGradient out;
  out.loss = cross_entropy(fwd.logits, split, mask);
  out.gradient = backward(ctx, cfg, params, fwd, cross_entropy_gradient(fwd.logits, split, mask));
  return out;
}

AdamState AdamState::for_params(const ModelParams& p) {
  return {p.zeros_like(), p.zeros_like(), 0};
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& cfg) {
  auto theta = params.blocks();
  const auto g = grads.blocks();
  auto m = state.first.blocks();
  auto v = state.second.blocks();
  if (theta.size() != g.size() || theta.size() != m.size()) {
    throw std::invalid_argument("adam: parameter/gradient block mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t b = 0; b < theta.size(); ++b) {
    if (theta[b]->size() != g[b]->size() || theta[b]->size() != m[b]->size()) {
      throw std::invalid_argument("adam: shape mismatch in block " + std::to_string(b));
    }
    for (Eigen::Index i = 0; i < theta[b]->size(); ++i) {
      const double gi = g[b]->data()[i] + cfg.weight_decay * theta[b]->data()[i];
      double& mi = m[b]->data()[i];
      double& vi = v[b]->data()[i];
      mi = cfg.beta1 * mi + (1.0 - cfg.beta1) * gi;
      vi = cfg.beta2 * vi + (1.0 - cfg.beta2) * gi * gi;
      theta[b]->data()[i] -= cfg.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + cfg.epsilon);
    }
  }
}

TrainHistory train(const ModelContext& ctx, const ModelConfig& cfg, const LabeledSplit& split,
                   const TrainConfig& tcfg, std::optional<ModelParams> initial) {
  tcfg.validate();
  split.validate();
  std::mt19937_64 rng(tcfg.seed);
  ModelParams params = initial ? std::move(*initial) : init_params(ctx, cfg, rng);
  AdamState state = AdamState::for_params(params);

  TrainHistory history;
  history.best_params = params;
  history.best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  const auto& val_mask = split.validation.empty() ? split.train : split.validation;

  for (std::size_t epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    const auto step = loss_and_gradient(ctx, cfg, params, split, split.train,
                                        DropoutSource{tcfg.dropout_rate, &rng});
    if (!std::isfinite(step.loss)) {
      std::ostringstream msg;
      msg << "non-finite training loss at epoch " << epoch << " (last finite validation loss "
          << history.best_val_loss << " at epoch " << history.best_epoch << ")";
      throw TrainingError(msg.str());
    }
    adam_step(params, step.gradient, state, tcfg);

    const ForwardResult eval = forward(ctx, cfg, params);
    EpochRecord rec{epoch, step.loss, cross_entropy(eval.logits, split, val_mask),
                    accuracy(eval.logits, split, val_mask)};
    if (!std::isfinite(rec.val_loss)) {
      throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    history.epochs.push_back(rec);
    if (rec.val_loss < history.best_val_loss) {
      history.best_val_loss = rec.val_loss;
      history.best_epoch = epoch;
      history.best_params = params;
      stale = 0;
    } else if (++stale >= tcfg.patience) {
      break;
    }
  }
  return history;
}

GradientCheck finite_difference_check(const ModelContext& ctx, const ModelConfig& cfg,
                                      const ModelParams& params, const LabeledSplit& split,
                                      const std::vector<std::size_t>& mask, double epsilon,
                                      std::size_t sample_limit, std::uint64_t seed) {
  if (epsilon < 1e-7 || epsilon > 1e-4) {
    throw std::invalid_argument("finite-difference epsilon must lie in [1e-7, 1e-4]");
  }
  const ModelParams analytic = loss_and_gradient(ctx, cfg, params, split, mask).gradient;
  ModelParams probe = params;
  auto probe_blocks = probe.blocks();
  const auto grad_blocks = analytic.blocks();
  std::mt19937_64 rng(seed);

  GradientCheck out;
  // Round-off of the difference quotient is about a few ulps of the loss over
  // epsilon; gradients smaller than 1e4 times that cannot be resolved to a
  // 1e-4 ratio, so they are compared against that floor instead.
  const double base_loss = cross_entropy(forward(ctx, cfg, params).logits, split, mask);
  const double floor = 1e4 * 4.0 * std::numeric_limits<double>::epsilon() *
                       std::max(1.0, std::abs(base_loss)) / epsilon;
  auto loss_at = [&] { return cross_entropy(forward(ctx, cfg, probe).logits, split, mask); };
  for (std::size_t b = 0; b < probe_blocks.size(); ++b) {
    Matrix& block = *probe_blocks[b];
    const auto size = static_cast<std::size_t>(block.size());
    std::vector<std::size_t> coords(size);
    std::iota(coords.begin(), coords.end(), 0);
    if (size > sample_limit) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(sample_limit);
    }
    for (std::size_t i : coords) {
      double& x = block.data()[i];
      const double saved = x;
      x = saved + epsilon;
      const double up = loss_at();
      x = saved - epsilon;
      const double down = loss_at();
      x = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double exact = grad_blocks[b]->data()[i];
      const double denom = std::max({std::abs(numeric), std::abs(exact), floor});
      out.max_relative_error = std::max(out.max_relative_error, std::abs(numeric - exact) / denom);
      ++out.coordinates_checked;
    }
  }
  return out;
}

}  // namespace giam
