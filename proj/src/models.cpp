#include "giam/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace giam {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

Matrix glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(idx(rows), idx(cols));
  // Column-major fill order is part of the determinism contract.
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace

FeatureSet FeatureSet::one_hot(const std::vector<TypeRange>& ranges) {
  FeatureSet f;
  for (const auto& r : ranges) {
    FeatureBlock block(idx(r.size()), idx(r.size()));
    block.setIdentity();
    f.blocks.push_back(std::move(block));
  }
  return f;
}

std::size_t FeatureSet::node_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += static_cast<std::size_t>(b.rows());
  return n;
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::gcn: return "gcn";
    case Variant::giam1: return "giam1";
    case Variant::giam2: return "giam2";
    case Variant::giam: return "giam";
    case Variant::giam3: return "giam3";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (auto v : {Variant::gcn, Variant::giam1, Variant::giam2, Variant::giam, Variant::giam3}) {
    if (to_string(v) == name) return v;
  }
  throw std::invalid_argument("unknown model variant '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::elu: return "elu";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  for (auto a : {Activation::identity, Activation::relu, Activation::elu}) {
    if (to_string(a) == name) return a;
  }
  throw std::invalid_argument("unknown activation '" + name + "'");
}

std::size_t ModelConfig::head_width() const {
  if (heads == 0 || hidden % heads != 0) {
    throw std::invalid_argument("hidden width " + std::to_string(hidden) +
                                " is not divisible by head count " + std::to_string(heads));
  }
  return hidden / heads;
}

std::vector<Matrix*> ModelParams::blocks() {
  std::vector<Matrix*> out;
  for (auto& m : projections) out.push_back(&m);
  for (auto& m : weights) out.push_back(&m);
  out.push_back(&classifier);
  for (auto& m : head_projections) out.push_back(&m);
  out.push_back(&attention);
  out.push_back(&metapath_logits);
  return out;
}

std::vector<const Matrix*> ModelParams::blocks() const {
  auto mut = const_cast<ModelParams*>(this)->blocks();
  return {mut.begin(), mut.end()};
}

std::vector<std::string> ModelParams::block_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < projections.size(); ++i) out.push_back("projection_" + std::to_string(i));
  for (std::size_t i = 0; i < weights.size(); ++i) out.push_back("weight_" + std::to_string(i));
  out.push_back("classifier");
  for (std::size_t i = 0; i < head_projections.size(); ++i) out.push_back("head_" + std::to_string(i));
  out.push_back("attention");
  out.push_back("metapath_logits");
  return out;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for (Matrix* m : z.blocks()) m->setZero();
  return z;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix* m : blocks()) n += static_cast<std::size_t>(m->size());
  return n;
}

Matrix GroupedEmbedding::concatenated() const {
  if (blocks.empty()) return {};
  Eigen::Index width = 0;
  for (const auto& b : blocks) width += b.cols();
  Matrix out(blocks.front().rows(), width);
  Eigen::Index col = 0;
  for (const auto& b : blocks) {
    if (b.rows() != out.rows()) throw std::invalid_argument("grouped blocks differ in row count");
    out.middleCols(col, b.cols()) = b;
    col += b.cols();
  }
  return out;
}

std::size_t ModelContext::node_count() const {
  return type_ranges.empty() ? 0 : type_ranges.back().end;
}

ModelContext make_gcn_context(const AugmentedAdjacency& aug, FeatureSet features,
                              std::vector<TypeRange> ranges) {
  ModelContext ctx;
  ctx.variant = Variant::gcn;
  ctx.type_ranges = std::move(ranges);
  ctx.features = std::move(features);
  ctx.normalized = normalized_adjacency(aug);
  return ctx;
}

ModelContext make_naive_context(const HinGraph& graph, const AugmentedAdjacency& aug,
                                FeatureSet features) {
  ModelContext ctx;
  ctx.variant = Variant::giam1;
  ctx.type_ranges = graph.type_ranges();
  ctx.features = std::move(features);
  ctx.grouping = naive_grouping(graph, aug);
  return ctx;
}

ModelContext make_improved_context(Variant variant, const PropagationState& s,
                                   FeatureSet features, std::vector<TypeRange> ranges,
                                   const std::vector<std::string>& type_names) {
  if (variant != Variant::giam2 && variant != Variant::giam) {
    throw std::invalid_argument("improved context is for giam2/giam only");
  }
  ModelContext ctx;
  ctx.variant = variant;
  ctx.grouping = split_by_type(s.matrix, ranges, type_names);
  ctx.type_ranges = std::move(ranges);
  ctx.features = std::move(features);
  return ctx;
}

ModelContext make_metapath_context(std::vector<PropagationState> states,
                                   std::vector<std::string> labels, FeatureSet features) {
  if (states.empty()) throw std::invalid_argument("giam3 needs at least one meta-path state");
  if (features.blocks.size() != 1) {
    throw std::invalid_argument("giam3 runs on the target node type only (one feature block)");
  }
  ModelContext ctx;
  ctx.variant = Variant::giam3;
  ctx.type_ranges = {TypeRange{0, static_cast<std::size_t>(features.blocks[0].rows())}};
  ctx.features = std::move(features);
  for (auto& s : states) {
    if (s.matrix.rows() != ctx.node_count()) {
      throw std::invalid_argument("meta-path state size does not match target features");
    }
    ctx.metapath_states.push_back(std::move(s.matrix));
  }
  ctx.metapath_labels = std::move(labels);
  return ctx;
}

ModelParams init_params(const ModelContext& ctx, const ModelConfig& cfg, std::mt19937_64& rng) {
  ModelParams p;
  const std::size_t h = cfg.hidden;
  for (const auto& block : ctx.features.blocks) {
    p.projections.push_back(glorot(static_cast<std::size_t>(block.cols()), h, rng));
  }
  const std::size_t groups = ctx.grouping.operators.size();
  switch (ctx.variant) {
    case Variant::gcn:
      p.weights.push_back(glorot(h, h, rng));
      p.weights.push_back(glorot(h, cfg.classes, rng));
      break;
    case Variant::giam1:
      for (std::size_t l = 0; l < cfg.layers; ++l) p.weights.push_back(glorot(groups * h, h, rng));
      p.classifier = glorot(h, cfg.classes, rng);
      break;
    case Variant::giam2:
      p.weights.push_back(glorot(groups * h, h, rng));
      p.classifier = glorot(h, cfg.classes, rng);
      break;
    case Variant::giam: {
      const std::size_t hw = cfg.head_width();
      for (std::size_t k = 0; k < cfg.heads; ++k) p.head_projections.push_back(glorot(h, hw, rng));
      p.attention = glorot(groups * cfg.heads, 2 * hw, rng);
      p.classifier = glorot(groups * cfg.heads * hw, cfg.classes, rng);
      break;
    }
    case Variant::giam3:
      p.weights.push_back(glorot(h, h, rng));
      p.metapath_logits = Matrix::Zero(1, idx(ctx.metapath_states.size()));
      p.classifier = glorot(h, cfg.classes, rng);
      break;
  }
  return p;
}

Matrix apply_activation(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::elu:
      return z.unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
  }
  return z;
}

Matrix activation_derivative(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::identity: return Matrix::Ones(z.rows(), z.cols());
    case Activation::relu:
      return z.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; });
    case Activation::elu:
      return z.unaryExpr([](double x) { return x > 0.0 ? 1.0 : std::exp(x); });
  }
  return z;
}

Matrix row_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double top = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - top).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Matrix project_features(const FeatureSet& features, const ModelParams& params,
                        const std::vector<TypeRange>& ranges) {
  if (features.blocks.size() != ranges.size() || params.projections.size() != ranges.size()) {
    throw std::invalid_argument("feature/projection/type counts disagree");
  }
  const Eigen::Index width = params.projections.front().cols();
  Matrix out(idx(ranges.back().end), width);
  for (std::size_t t = 0; t < ranges.size(); ++t) {
    const auto& block = features.blocks[t];
    const auto& proj = params.projections[t];
    if (static_cast<std::size_t>(block.rows()) != ranges[t].size() || block.cols() != proj.rows() ||
        proj.cols() != width) {
      throw std::invalid_argument("projection shape mismatch for node type " + std::to_string(t));
    }
    out.middleRows(idx(ranges[t].begin), idx(ranges[t].size())) = block * proj;
  }
  return out;
}

Matrix gcn_forward(const AugmentedAdjacency& aug, const Matrix& h0, const ModelParams& params) {
  const SparseRowMatrix a_hat = normalized_adjacency(aug);
  const Matrix hidden = (multiply(a_hat, h0) * params.weights.at(0)).cwiseMax(0.0);
  return row_softmax(multiply(a_hat, hidden) * params.weights.at(1));
}

Grouping naive_grouping(const HinGraph& graph, const AugmentedAdjacency& aug) {
  const SparseRowMatrix a_hat = normalized_adjacency(aug);
  std::map<std::pair<std::size_t, std::size_t>, std::vector<Triplet>> buckets;
  for (std::size_t t = 0; t < graph.type_count(); ++t) buckets[{t, t}];
  const std::size_t n = a_hat.rows();
  for (std::size_t u = 0; u < n; ++u) {
    const auto cs = a_hat.row_cols(u);
    const auto vs = a_hat.row_values(u);
    for (std::size_t k = 0; k < cs.size(); ++k) {
      buckets[{graph.node_type(u), graph.node_type(cs[k])}].push_back({u, cs[k], vs[k]});
    }
  }
  Grouping g;
  const auto& names = graph.type_names();
  for (auto& [key, triplets] : buckets) {
    g.labels.push_back(names[key.first] + "-" + names[key.second]);
    g.operators.push_back(SparseRowMatrix::from_triplets(n, n, std::move(triplets)));
  }
  return g;
}

GroupedEmbedding intra_aggregate(const Grouping& grouping, const Matrix& h) {
  GroupedEmbedding out;
  out.labels = grouping.labels;
  for (const auto& op : grouping.operators) out.blocks.push_back(multiply(op, h));
  return out;
}

Matrix inter_concatenate(const GroupedEmbedding& grouped) { return grouped.concatenated(); }

Matrix naive_forward(const Grouping& grouping, const Matrix& h0, const ModelParams& params,
                     Activation activation) {
  if (params.weights.empty()) throw std::invalid_argument("naive model needs at least one layer");
  Matrix h = h0;
  for (const auto& w : params.weights) {
    h = apply_activation(activation, inter_concatenate(intra_aggregate(grouping, h)) * w);
  }
  return h;
}

Grouping split_by_type(const SparseRowMatrix& s, const std::vector<TypeRange>& ranges,
                       const std::vector<std::string>& type_names) {
  Grouping g;
  for (std::size_t t = 0; t < ranges.size(); ++t) {
    g.labels.push_back(t < type_names.size() ? type_names[t] : std::to_string(t));
    g.operators.push_back(s.column_range(ranges[t].begin, ranges[t].end));
  }
  return g;
}

GroupedEmbedding grouped_propagate(const PropagationState& s, const Matrix& h0,
                                   const std::vector<TypeRange>& ranges) {
  return intra_aggregate(split_by_type(s.matrix, ranges, {}), h0);
}

Matrix improved_forward(const Grouping& grouping, const Matrix& h0, const Matrix& weight,
                        Activation activation) {
  return apply_activation(activation, inter_concatenate(intra_aggregate(grouping, h0)) * weight);
}

double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }

double attention_score(const Vector& h_u, const Vector& h_v, const Vector& mu, const Matrix& w,
                       double slope) {
  const Vector wu = w.transpose() * h_u;
  const Vector wv = w.transpose() * h_v;
  if (mu.size() != wu.size() + wv.size()) throw std::invalid_argument("attention vector shape");
  return leaky_relu(mu.head(wu.size()).dot(wu) + mu.tail(wv.size()).dot(wv), slope);
}

Vector attention_weights(const Vector& scores) {
  if (scores.size() == 0) throw std::invalid_argument("attention over an empty neighborhood");
  const double top = scores.maxCoeff();
  Vector e = (scores.array() - top).exp();
  return e / e.sum();
}

Vector attention_aggregate(const Vector& alpha, const Matrix& projected_neighbors,
                           Activation activation) {
  const Matrix pre = alpha.transpose() * projected_neighbors;
  return apply_activation(activation, pre).transpose();
}

Vector multi_head(const std::vector<Vector>& heads) {
  if (heads.empty()) throw std::invalid_argument("multi-head attention needs K >= 1");
  Eigen::Index width = 0;
  for (const auto& h : heads) width += h.size();
  Vector out(width);
  Eigen::Index pos = 0;
  for (const auto& h : heads) {
    out.segment(pos, h.size()) = h;
    pos += h.size();
  }
  return out;
}

namespace {

/// One head of node-level attention for one group, cache filled in place.
Matrix attend(const SparseRowMatrix& op, const Matrix& x, const Matrix& w, const Vector& mu,
              const ModelConfig& cfg, DropoutSource drop, AttentionCache& cache) {
  const Eigen::Index hw = w.cols();
  cache.projected = x * w;
  const Matrix& y = cache.projected;
  const Vector mu_self = mu.head(hw);
  const Vector mu_nbr = mu.tail(hw);
  const Vector self_part = y * mu_self;
  const Vector nbr_part = y * mu_nbr;

  const std::size_t n = op.rows();
  cache.preact.assign(op.nonzeros(), 0.0);
  cache.alpha.assign(op.nonzeros(), 0.0);
  cache.alpha_mask.assign(op.nonzeros(), 1.0);
  cache.pre_output = Matrix::Zero(idx(n), hw);

  std::bernoulli_distribution keep(1.0 - drop.rate);
  std::size_t flat = 0;
  for (std::size_t u = 0; u < n; ++u) {
    const auto cs = op.row_cols(u);
    if (cs.empty()) continue;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cs.size(); ++k) {
      const double pre = self_part(idx(u)) + nbr_part(idx(cs[k]));
      cache.preact[flat + k] = pre;
      top = std::max(top, leaky_relu(pre, cfg.leaky_slope));
    }
    double total = 0.0;
    for (std::size_t k = 0; k < cs.size(); ++k) {
      const double e = std::exp(leaky_relu(cache.preact[flat + k], cfg.leaky_slope) - top);
      cache.alpha[flat + k] = e;
      total += e;
    }
    for (std::size_t k = 0; k < cs.size(); ++k) {
      cache.alpha[flat + k] /= total;
      if (drop.active()) cache.alpha_mask[flat + k] = keep(*drop.rng) ? 1.0 / (1.0 - drop.rate) : 0.0;
      cache.pre_output.row(idx(u)) +=
          cache.alpha[flat + k] * cache.alpha_mask[flat + k] * y.row(idx(cs[k]));
    }
    flat += cs.size();
  }
  return apply_activation(cfg.activation, cache.pre_output);
}

Matrix giam_pass(const Grouping& grouping, const Matrix& x, const ModelParams& params,
                 const ModelConfig& cfg, DropoutSource drop, std::vector<AttentionCache>& caches) {
  const std::size_t groups = grouping.operators.size();
  const std::size_t heads = params.head_projections.size();
  if (heads == 0) throw std::invalid_argument("giam needs K >= 1 attention heads");
  if (static_cast<std::size_t>(params.attention.rows()) != groups * heads) {
    throw std::invalid_argument("attention parameter rows != groups * heads");
  }
  const Eigen::Index hw = params.head_projections.front().cols();
  caches.assign(groups * heads, AttentionCache{});
  Matrix out(x.rows(), idx(groups * heads) * hw);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t k = 0; k < heads; ++k) {
      const std::size_t slot = g * heads + k;
      const Vector mu = params.attention.row(idx(slot)).transpose();
      out.middleCols(idx(slot) * hw, hw) =
          attend(grouping.operators[g], x, params.head_projections[k], mu, cfg, drop, caches[slot]);
    }
  }
  return out;
}

}  // namespace

Matrix giam_forward(const Grouping& grouping, const Matrix& h0, const ModelParams& params,
                    const ModelConfig& cfg) {
  std::vector<AttentionCache> caches;
  return giam_pass(grouping, h0, params, cfg, {}, caches);
}

SparseRowMatrix candidate_adjacency(const HinGraph& graph, const std::vector<MetaPath>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("empty candidate meta-path set");
  const std::string& target = candidates.front().types().front();
  std::vector<Triplet> t;
  std::size_t n = 0;
  for (const auto& path : candidates) {
    if (path.types().front() != target || path.types().back() != target) {
      throw SchemaError("candidate meta-path " + path.label() + " must start and end at " + target);
    }
    const SparseRowMatrix adj = meta_path_adjacency(graph, path);
    n = adj.rows();
    for (std::size_t r = 0; r < adj.rows(); ++r) {
      for (std::size_t c : adj.row_cols(r)) {
        if (c != r) t.push_back({r, c, 1.0});
      }
    }
  }
  SparseRowMatrix summed = SparseRowMatrix::from_triplets(n, n, std::move(t));
  if (summed.nonzeros() == 0) {
    throw std::runtime_error("candidate meta-paths induce no links between " + target + " nodes");
  }
  std::vector<std::vector<std::size_t>> cols(n);
  std::vector<std::vector<double>> vals(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto cs = summed.row_cols(r);
    cols[r].assign(cs.begin(), cs.end());
    vals[r].assign(cs.size(), 1.0);
  }
  return SparseRowMatrix::from_rows(n, std::move(cols), std::move(vals));
}

PropagationState candidate_metapath_state(const HinGraph& graph,
                                          const std::vector<MetaPath>& candidates,
                                          std::size_t steps) {
  const AugmentedAdjacency aug = augment(candidate_adjacency(graph, candidates));
  return constrained_walk(transition(aug), null_transition(aug), steps);
}

Matrix giam3_forward(const std::vector<Matrix>& per_path, const Matrix& logits) {
  if (per_path.empty() || logits.size() != static_cast<Eigen::Index>(per_path.size())) {
    throw std::invalid_argument("giam3: one logit per meta-path embedding required");
  }
  const Matrix w = row_softmax(Eigen::Map<const Matrix>(logits.data(), 1, logits.size()));
  Matrix out = Matrix::Zero(per_path.front().rows(), per_path.front().cols());
  for (std::size_t m = 0; m < per_path.size(); ++m) out += w(0, idx(m)) * per_path[m];
  return out;
}

Matrix dropout(const Matrix& m, double rate, std::mt19937_64& rng, Matrix* mask_out) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  Matrix mask(m.rows(), m.cols());
  if (rate == 0.0) {
    mask.setOnes();
  } else {
    std::bernoulli_distribution keep(1.0 - rate);
    const double scale = 1.0 / (1.0 - rate);
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : 0.0;
  }
  if (mask_out) *mask_out = mask;
  return m.cwiseProduct(mask);
}

ForwardResult forward(const ModelContext& ctx, const ModelConfig& cfg, const ModelParams& params,
                      DropoutSource drop) {
  ForwardResult res;
  ForwardCache& c = res.cache;
  c.projected = project_features(ctx.features, params, ctx.type_ranges);
  if (drop.active()) {
    c.input = dropout(c.projected, drop.rate, *drop.rng, &c.feature_mask);
  } else {
    c.input = c.projected;
  }

  switch (ctx.variant) {
    case Variant::gcn: {
      const Matrix ax = multiply(ctx.normalized, c.input);
      c.layer_inputs = {ax};
      c.preactivations = {ax * params.weights.at(0)};
      c.gcn_hidden = c.preactivations[0].cwiseMax(0.0);
      c.gcn_propagated_hidden = multiply(ctx.normalized, c.gcn_hidden);
      res.logits = c.gcn_propagated_hidden * params.weights.at(1);
      res.embeddings = c.gcn_hidden;
      break;
    }
    case Variant::giam1: {
      Matrix h = c.input;
      for (const auto& w : params.weights) {
        c.layer_inputs.push_back(h);
        c.concatenated.push_back(inter_concatenate(intra_aggregate(ctx.grouping, h)));
        c.preactivations.push_back(c.concatenated.back() * w);
        h = apply_activation(cfg.activation, c.preactivations.back());
      }
      res.embeddings = h;
      res.logits = h * params.classifier;
      break;
    }
    case Variant::giam2: {
      c.concatenated = {inter_concatenate(intra_aggregate(ctx.grouping, c.input))};
      c.preactivations = {c.concatenated[0] * params.weights.at(0)};
      res.embeddings = apply_activation(cfg.activation, c.preactivations[0]);
      res.logits = res.embeddings * params.classifier;
      break;
    }
    case Variant::giam: {
      res.embeddings = giam_pass(ctx.grouping, c.input, params, cfg, drop, c.attention);
      res.logits = res.embeddings * params.classifier;
      break;
    }
    case Variant::giam3: {
      for (const auto& s : ctx.metapath_states) {
        c.path_inputs.push_back(multiply(s, c.input));
        c.preactivations.push_back(c.path_inputs.back() * params.weights.at(0));
        c.path_outputs.push_back(apply_activation(cfg.activation, c.preactivations.back()));
      }
      res.embeddings = giam3_forward(c.path_outputs, params.metapath_logits);
      res.logits = res.embeddings * params.classifier;
      break;
    }
  }
  return res;
}

}  // namespace giam
