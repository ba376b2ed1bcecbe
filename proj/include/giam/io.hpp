#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "giam/evaluation.hpp"
#include "giam/hin_graph.hpp"
#include "giam/models.hpp"
#include "giam/propagation.hpp"
#include "giam/synthetic.hpp"
#include "giam/training.hpp"

namespace giam {

/// Malformed text input; the message carries the source name and line.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal form that parses back to the same double.
std::string format_double(double x);
double parse_double(const std::string& text);

// Graph tables. Blank lines and lines starting with '#' are skipped.
std::vector<NodeRecord> read_nodes(std::istream& in, const std::string& source = "nodes");
std::vector<EdgeRecord> read_edges(std::istream& in, const std::string& source = "edges");
void write_nodes(std::ostream& out, const HinGraph& graph);
void write_edges(std::ostream& out, const HinGraph& graph);

/// Sparse per-node features `id<TAB>index:value ...`. A type's block width is
/// one past its largest index; types with no feature lines fall back to
/// one-hot blocks.
FeatureSet read_features(std::istream& in, const HinGraph& graph, const std::string& source = "features");
void write_features(std::ostream& out, const HinGraph& graph, const FeatureSet& features);

/// `id<TAB>label` lines.
struct LabelTable {
  std::vector<std::string> ids;
  std::vector<std::string> labels;
};
LabelTable read_labels(std::istream& in, const std::string& source = "labels");
void write_labels(std::ostream& out, const LabelTable& table);

struct EmbeddingTable {
  std::string variant;
  std::size_t k = 0;
  std::vector<std::string> ids;
  Matrix values;
};
void write_embeddings(std::ostream& out, const EmbeddingTable& table);
EmbeddingTable read_embeddings(std::istream& in, const std::string& source = "embeddings");

/// Coordinate list with a `# shape rows cols` header.
void write_coordinates(std::ostream& out, const SparseRowMatrix& m);
SparseRowMatrix read_coordinates(std::istream& in, const std::string& source = "matrix");
void write_dense_csv(std::ostream& out, const Matrix& m);
Matrix read_dense_csv(std::istream& in, const std::string& source = "grid");

/// One row per eigenvalue; infinite times print as `inf`, a missing
/// next eigenvalue as `nan`.
struct SpectrumRow {
  std::size_t c = 0;
  double lambda = 0.0;
  double t_enter = 0.0;
  double t_exit = 0.0;
};
std::vector<SpectrumRow> spectrum_rows(const SpectrumResult& spectrum);
void write_spectrum(std::ostream& out, const SpectrumResult& spectrum);
std::vector<SpectrumRow> read_spectrum(std::istream& in, const std::string& source = "spectrum");

void write_history(std::ostream& out, const TrainHistory& history);
std::vector<EpochRecord> read_history(std::istream& in, const std::string& source = "history");

void write_checkpoint(std::ostream& out, const ModelParams& params, Variant variant);
ModelParams read_checkpoint(std::istream& in, Variant* variant = nullptr,
                            const std::string& source = "checkpoint");

/// `metric,ratio,mean,stddev`; clustering rows leave ratio empty.
struct EvalRow {
  std::string metric;
  std::optional<double> ratio;
  double mean = 0.0;
  double stddev = 0.0;
};
std::vector<EvalRow> eval_rows(const EvalReport& report);
void write_eval(std::ostream& out, const std::vector<EvalRow>& rows);
std::vector<EvalRow> read_eval(std::istream& in, const std::string& source = "eval");

void write_report(std::ostream& out, const std::vector<ReportRow>& rows);
std::vector<ReportRow> read_report(std::istream& in, const std::string& source = "report");

// File helpers; parent directories are created on write.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace giam
