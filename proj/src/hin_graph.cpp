#include "giam/hin_graph.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

namespace giam {

std::size_t HinGraph::type_of(const std::string& name) const {
  const auto it = std::find(type_names_.begin(), type_names_.end(), name);
  if (it == type_names_.end()) throw SchemaError("unknown node type '" + name + "'");
  return static_cast<std::size_t>(it - type_names_.begin());
}

std::size_t HinGraph::index_of(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw IngestError("unknown node id '" + id + "'");
  return it->second;
}

SparseRowMatrix HinGraph::adjacency() const {
  std::vector<Triplet> t;
  t.reserve(edges_.size() * 2);
  for (const auto& e : edges_) {
    t.push_back({e.u, e.v, 1.0});
    t.push_back({e.v, e.u, 1.0});
  }
  return SparseRowMatrix::from_triplets(node_count(), node_count(), std::move(t));
}

bool HinGraph::types_adjacent(std::size_t a, std::size_t b) const {
  return std::any_of(edges_.begin(), edges_.end(), [&](const Edge& e) {
    const auto tu = node_type_[e.u];
    const auto tv = node_type_[e.v];
    return (tu == a && tv == b) || (tu == b && tv == a);
  });
}

HinGraph build_graph(const std::vector<NodeRecord>& nodes, const std::vector<EdgeRecord>& edges) {
  HinGraph g;

  std::set<std::string> type_set;
  {
    std::set<std::string> seen;
    for (const auto& n : nodes) {
      if (!seen.insert(n.id).second) throw IngestError("duplicate node id '" + n.id + "'");
      type_set.insert(n.type);
    }
  }
  g.type_names_.assign(type_set.begin(), type_set.end());

  // Canonical order: by type name, then input order.
  std::vector<std::size_t> order(nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::size_t> input_type(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    input_type[i] = static_cast<std::size_t>(
        std::lower_bound(g.type_names_.begin(), g.type_names_.end(), nodes[i].type) -
        g.type_names_.begin());
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return input_type[a] < input_type[b]; });

  g.type_ranges_.assign(g.type_names_.size(), TypeRange{});
  g.node_type_.resize(nodes.size());
  g.ids_.resize(nodes.size());
  g.labels_.resize(nodes.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& rec = nodes[order[pos]];
    const std::size_t t = input_type[order[pos]];
    g.node_type_[pos] = t;
    g.ids_[pos] = rec.id;
    g.labels_[pos] = rec.label;
    g.index_.emplace(rec.id, pos);
  }
  for (std::size_t t = 0, pos = 0; t < g.type_names_.size(); ++t) {
    g.type_ranges_[t].begin = pos;
    while (pos < g.node_type_.size() && g.node_type_[pos] == t) ++pos;
    g.type_ranges_[t].end = pos;
  }

  std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_seen;
  std::map<std::string, std::size_t> edge_type_index;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& rec = edges[i];
    const auto su = g.index_.find(rec.src);
    const auto sv = g.index_.find(rec.dst);
    if (su == g.index_.end() || sv == g.index_.end()) {
      std::ostringstream msg;
      msg << "edge " << i + 1 << " (" << rec.src << ", " << rec.dst << ") refers to unknown node '"
          << (su == g.index_.end() ? rec.src : rec.dst) << "'";
      throw IngestError(msg.str());
    }
    std::size_t u = su->second;
    std::size_t v = sv->second;
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (edge_seen.contains({u, v})) continue;

    std::string type_label = rec.type;
    if (type_label.empty()) {
      type_label = g.type_names_[g.node_type_[u]] + "-" + g.type_names_[g.node_type_[v]];
    }
    auto [it, inserted] = edge_type_index.emplace(type_label, g.edge_type_names_.size());
    if (inserted) g.edge_type_names_.push_back(type_label);
    edge_seen.emplace(std::make_pair(u, v), g.edges_.size());
    g.edges_.push_back({u, v, it->second});
  }
  std::sort(g.edges_.begin(), g.edges_.end(), [](const Edge& a, const Edge& b) {
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });
  return g;
}

AugmentedAdjacency augment(const SparseRowMatrix& adjacency) {
  const std::size_t n = adjacency.rows();
  std::vector<Triplet> t;
  t.reserve(adjacency.nonzeros() + n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c : adjacency.row_cols(r)) {
      if (c != r) t.push_back({r, c, 1.0});
    }
    t.push_back({r, r, 1.0});
  }
  // Collapse any duplicate coordinates back to 1.
  SparseRowMatrix summed = SparseRowMatrix::from_triplets(n, n, std::move(t));
  std::vector<std::vector<std::size_t>> cols(n);
  std::vector<std::vector<double>> vals(n);
  AugmentedAdjacency aug;
  aug.degrees = Vector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const auto cs = summed.row_cols(r);
    cols[r].assign(cs.begin(), cs.end());
    vals[r].assign(cs.size(), 1.0);
    aug.degrees(static_cast<Eigen::Index>(r)) = static_cast<double>(cs.size());
  }
  aug.matrix = SparseRowMatrix::from_rows(n, std::move(cols), std::move(vals));
  aug.total_degree = aug.degrees.sum();
  return aug;
}

AugmentedAdjacency augment(const HinGraph& graph) { return augment(graph.adjacency()); }

SparseRowMatrix normalized_adjacency(const AugmentedAdjacency& aug) {
  const std::size_t n = aug.matrix.rows();
  std::vector<std::vector<std::size_t>> cols(n);
  std::vector<std::vector<double>> vals(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto cs = aug.matrix.row_cols(r);
    const auto vs = aug.matrix.row_values(r);
    const double dr = aug.degrees(static_cast<Eigen::Index>(r));
    cols[r].assign(cs.begin(), cs.end());
    vals[r].resize(cs.size());
    for (std::size_t k = 0; k < cs.size(); ++k) {
      vals[r][k] = vs[k] / std::sqrt(dr * aug.degrees(static_cast<Eigen::Index>(cs[k])));
    }
  }
  return SparseRowMatrix::from_rows(n, std::move(cols), std::move(vals));
}

MetaPath::MetaPath(std::vector<std::string> type_sequence, std::string label)
    : types_(std::move(type_sequence)), label_(std::move(label)) {
  if (types_.size() < 2) throw SchemaError("meta-path needs at least two node types");
  if (label_.empty()) {
    for (std::size_t i = 0; i < types_.size(); ++i) {
      if (i) label_ += '-';
      label_ += types_[i];
    }
  }
}

MetaPath MetaPath::parse(const std::string& label) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : label) {
    if (ch == '-') {
      parts.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      cur += ch;
    }
  }
  parts.push_back(cur);
  for (const auto& p : parts) {
    if (p.empty()) throw SchemaError("malformed meta-path '" + label + "'");
  }
  return MetaPath(std::move(parts), label);
}

bool MetaPath::symmetric() const { return std::equal(types_.begin(), types_.end(), types_.rbegin()); }

void MetaPath::validate(const HinGraph& graph) const {
  for (std::size_t i = 0; i + 1 < types_.size(); ++i) {
    const auto a = graph.type_of(types_[i]);
    const auto b = graph.type_of(types_[i + 1]);
    if (!graph.types_adjacent(a, b)) {
      throw SchemaError("meta-path " + label_ + ": no edges between " + types_[i] + " and " +
                        types_[i + 1]);
    }
  }
}

namespace {

/// Bipartite 0/1 block of the adjacency between two types, local indices.
SparseRowMatrix type_block(const HinGraph& graph, std::size_t from, std::size_t to) {
  const auto& rf = graph.type_range(from);
  const auto& rt = graph.type_range(to);
  std::vector<Triplet> t;
  for (const auto& e : graph.edges()) {
    if (rf.contains(e.u) && rt.contains(e.v)) t.push_back({e.u - rf.begin, e.v - rt.begin, 1.0});
    if (rf.contains(e.v) && rt.contains(e.u)) t.push_back({e.v - rf.begin, e.u - rt.begin, 1.0});
  }
  SparseRowMatrix m = SparseRowMatrix::from_triplets(rf.size(), rt.size(), std::move(t));
  return m;
}

SparseRowMatrix booleanize(const SparseRowMatrix& m) {
  std::vector<std::vector<std::size_t>> cols(m.rows());
  std::vector<std::vector<double>> vals(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto cs = m.row_cols(r);
    cols[r].assign(cs.begin(), cs.end());
    vals[r].assign(cs.size(), 1.0);
  }
  return SparseRowMatrix::from_rows(m.cols(), std::move(cols), std::move(vals));
}

}  // namespace

SparseRowMatrix meta_path_adjacency(const HinGraph& graph, const MetaPath& path) {
  path.validate(graph);
  const auto& types = path.types();
  SparseRowMatrix acc =
      booleanize(type_block(graph, graph.type_of(types[0]), graph.type_of(types[1])));
  for (std::size_t i = 1; i + 1 < types.size(); ++i) {
    const auto hop = type_block(graph, graph.type_of(types[i]), graph.type_of(types[i + 1]));
    acc = booleanize(sparse_product(acc, booleanize(hop)));
  }
  return acc;
}

}  // namespace giam
