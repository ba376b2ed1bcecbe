#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "giam/sparse_matrix.hpp"

namespace giam {

/// Raised for malformed node/edge tables (unknown endpoints, duplicate ids).
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a meta-path does not fit the graph's observed schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NodeRecord {
  std::string id;
  std::string type;
  std::string label;  // optional class label, empty when absent
};

struct EdgeRecord {
  std::string src;
  std::string dst;
  std::string type;  // optional, derived from the endpoint types when empty
};

struct TypeRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
};

struct Edge {
  std::size_t u;  // u < v in canonical indices
  std::size_t v;
  std::size_t type;
};

/// Undirected typed graph. Nodes are stored in canonical order: grouped by
/// type name (sorted), stable with respect to input order inside a type.
class HinGraph {
 public:
  std::size_t node_count() const { return node_type_.size(); }
  std::size_t type_count() const { return type_names_.size(); }
  std::size_t edge_type_count() const { return edge_type_names_.size(); }

  std::size_t node_type(std::size_t node) const { return node_type_[node]; }
  const std::vector<std::size_t>& node_types() const { return node_type_; }
  const std::vector<std::string>& type_names() const { return type_names_; }
  const std::vector<std::string>& edge_type_names() const { return edge_type_names_; }
  const TypeRange& type_range(std::size_t type) const { return type_ranges_[type]; }
  const std::vector<TypeRange>& type_ranges() const { return type_ranges_; }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Type index for a type name; throws SchemaError when absent.
  std::size_t type_of(const std::string& name) const;

  const std::string& node_id(std::size_t node) const { return ids_[node]; }
  const std::vector<std::string>& node_ids() const { return ids_; }
  const std::string& node_label(std::size_t node) const { return labels_[node]; }
  const std::vector<std::string>& node_labels() const { return labels_; }
  /// Canonical index for an external id; throws IngestError when absent.
  std::size_t index_of(const std::string& id) const;
  bool has_id(const std::string& id) const { return index_.contains(id); }

  /// Symmetric 0/1 adjacency without self-loops.
  SparseRowMatrix adjacency() const;

  /// True when at least one edge joins the two node types.
  bool types_adjacent(std::size_t a, std::size_t b) const;

  friend HinGraph build_graph(const std::vector<NodeRecord>& nodes,
                              const std::vector<EdgeRecord>& edges);

 private:
  std::vector<std::size_t> node_type_;
  std::vector<std::string> type_names_;
  std::vector<std::string> edge_type_names_;
  std::vector<TypeRange> type_ranges_;
  std::vector<Edge> edges_;
  std::vector<std::string> ids_;
  std::vector<std::string> labels_;
  std::map<std::string, std::size_t> index_;
};

/// Builds a canonical graph. Directed duplicates, reversed duplicates and
/// self-edges collapse; the first-seen edge type label wins.
HinGraph build_graph(const std::vector<NodeRecord>& nodes, const std::vector<EdgeRecord>& edges);

/// Self-loop augmented adjacency (A + I) with its degree vector.
struct AugmentedAdjacency {
  SparseRowMatrix matrix;
  Vector degrees;
  double total_degree = 0.0;
};

AugmentedAdjacency augment(const HinGraph& graph);

/// Augments an arbitrary symmetric 0/1 adjacency (diagonal ignored).
AugmentedAdjacency augment(const SparseRowMatrix& adjacency);

/// D^{-1/2} (A + I) D^{-1/2}
SparseRowMatrix normalized_adjacency(const AugmentedAdjacency& aug);

class MetaPath {
 public:
  MetaPath(std::vector<std::string> type_sequence, std::string label = {});

  /// Parses "M-D-M" style labels.
  static MetaPath parse(const std::string& label);

  const std::vector<std::string>& types() const { return types_; }
  const std::string& label() const { return label_; }
  bool symmetric() const;

  /// Throws SchemaError when a type is missing or a hop has no edges.
  void validate(const HinGraph& graph) const;

 private:
  std::vector<std::string> types_;
  std::string label_;
};

/// Boolean reachability matrix over (first type nodes) x (last type nodes),
/// indexed relative to the start of each type range.
SparseRowMatrix meta_path_adjacency(const HinGraph& graph, const MetaPath& path);

}  // namespace giam
