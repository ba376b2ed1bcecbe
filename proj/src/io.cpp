#include "giam/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace giam {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

bool skippable(const std::string& line) {
  return line.empty() || line.front() == '#';
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
  throw FormatError(source + ":" + std::to_string(line) + ": " + what);
}

double number(const std::string& text, const std::string& source, std::size_t line) {
  try {
    return parse_double(text);
  } catch (const std::exception&) {
    fail(source, line, "not a number: '" + text + "'");
  }
}

std::size_t count(const std::string& text, const std::string& source, std::size_t line) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    fail(source, line, "not a non-negative integer: '" + text + "'");
  }
  return v;
}

// Reads every non-comment line, keeping the 1-based line number.
template <typename F>
void for_lines(std::istream& in, F&& f) {
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    line = strip_cr(std::move(line));
    if (skippable(line)) continue;
    f(line, no);
  }
}

void write_row(std::ostream& out, const Matrix& m, Eigen::Index r, char sep) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (c) out << sep;
    out << format_double(m(r, c));
  }
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  if (text == "nan" || text == "NA") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* begin = text.data();
  if (!text.empty() && text.front() == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || begin == text.data() + text.size()) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  return v;
}

std::vector<NodeRecord> read_nodes(std::istream& in, const std::string& source) {
  std::vector<NodeRecord> out;
  for_lines(in, [&](const std::string& line, std::size_t no) {
    auto f = split(line, '\t');
    if (f.size() < 2 || f.size() > 3) fail(source, no, "expected id<TAB>type[<TAB>label]");
    if (f[0].empty() || f[1].empty()) fail(source, no, "empty id or type");
    out.push_back({f[0], f[1], f.size() == 3 ? f[2] : std::string{}});
  });
  return out;
}

std::vector<EdgeRecord> read_edges(std::istream& in, const std::string& source) {
  std::vector<EdgeRecord> out;
  for_lines(in, [&](const std::string& line, std::size_t no) {
    auto f = split(line, '\t');
    if (f.size() < 2 || f.size() > 3) fail(source, no, "expected src<TAB>dst[<TAB>type]");
    if (f[0].empty() || f[1].empty()) fail(source, no, "empty endpoint id");
    out.push_back({f[0], f[1], f.size() == 3 ? f[2] : std::string{}});
  });
  return out;
}

void write_nodes(std::ostream& out, const HinGraph& graph) {
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    out << graph.node_id(i) << '\t' << graph.type_names()[graph.node_type(i)];
    if (!graph.node_label(i).empty()) out << '\t' << graph.node_label(i);
    out << '\n';
  }
}

void write_edges(std::ostream& out, const HinGraph& graph) {
  for (const Edge& e : graph.edges()) {
    out << graph.node_id(e.u) << '\t' << graph.node_id(e.v) << '\t'
        << graph.edge_type_names()[e.type] << '\n';
  }
}

FeatureSet read_features(std::istream& in, const HinGraph& graph, const std::string& source) {
  struct Entry {
    std::size_t node, col;
    double value;
  };
  std::vector<Entry> entries;
  std::vector<std::size_t> width(graph.type_count(), 0);
  std::vector<bool> seen(graph.node_count(), false);
  for_lines(in, [&](const std::string& line, std::size_t no) {
    const std::size_t tab = line.find('\t');
    const std::string id = line.substr(0, tab);
    if (!graph.has_id(id)) fail(source, no, "unknown node id '" + id + "'");
    const std::size_t node = graph.index_of(id);
    if (seen[node]) fail(source, no, "duplicate feature line for '" + id + "'");
    seen[node] = true;
    const std::size_t type = graph.node_type(node);
    width[type] = std::max<std::size_t>(width[type], 1);
    if (tab == std::string::npos) return;
    std::istringstream pairs(line.substr(tab + 1));
    std::string tok;
    while (pairs >> tok) {
      const std::size_t colon = tok.find(':');
      if (colon == std::string::npos) fail(source, no, "expected index:value, got '" + tok + "'");
      const std::size_t col = count(tok.substr(0, colon), source, no);
      const double v = number(tok.substr(colon + 1), source, no);
      width[type] = std::max(width[type], col + 1);
      entries.push_back({node, col, v});
    }
  });
  FeatureSet fs;
  for (std::size_t t = 0; t < graph.type_count(); ++t) {
    const TypeRange& r = graph.type_range(t);
    if (width[t] == 0) {
      FeatureBlock eye(idx(r.size()), idx(r.size()));
      eye.setIdentity();
      fs.blocks.push_back(std::move(eye));
      continue;
    }
    std::vector<Eigen::Triplet<double>> trip;
    for (const Entry& e : entries) {
      if (r.contains(e.node)) trip.emplace_back(idx(e.node - r.begin), idx(e.col), e.value);
    }
    FeatureBlock block(idx(r.size()), idx(width[t]));
    block.setFromTriplets(trip.begin(), trip.end());
    fs.blocks.push_back(std::move(block));
  }
  return fs;
}

void write_features(std::ostream& out, const HinGraph& graph, const FeatureSet& features) {
  for (std::size_t t = 0; t < graph.type_count(); ++t) {
    const TypeRange& r = graph.type_range(t);
    const FeatureBlock& block = features.blocks.at(t);
    for (std::size_t i = 0; i < r.size(); ++i) {
      out << graph.node_id(r.begin + i);
      char sep = '\t';
      for (FeatureBlock::InnerIterator it(block, idx(i)); it; ++it) {
        out << sep << it.col() << ':' << format_double(it.value());
        sep = ' ';
      }
      out << '\n';
    }
  }
}

LabelTable read_labels(std::istream& in, const std::string& source) {
  LabelTable t;
  for_lines(in, [&](const std::string& line, std::size_t no) {
    auto f = split(line, '\t');
    if (f.size() != 2 || f[0].empty()) fail(source, no, "expected id<TAB>label");
    t.ids.push_back(f[0]);
    t.labels.push_back(f[1]);
  });
  return t;
}

void write_labels(std::ostream& out, const LabelTable& table) {
  for (std::size_t i = 0; i < table.ids.size(); ++i) out << table.ids[i] << '\t' << table.labels[i] << '\n';
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
  out << "# variant=" << table.variant << " k=" << table.k << " dim=" << table.values.cols() << '\n';
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    out << table.ids[i];
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) out << '\t' << format_double(table.values(idx(i), c));
    out << '\n';
  }
}

EmbeddingTable read_embeddings(std::istream& in, const std::string& source) {
  EmbeddingTable t;
  std::string line;
  if (!std::getline(in, line)) fail(source, 1, "missing header");
  line = strip_cr(line);
  if (line.rfind("# ", 0) != 0) fail(source, 1, "header must start with '# '");
  std::size_t dim = 0;
  bool has_dim = false;
  std::istringstream head(line.substr(2));
  std::string kv;
  while (head >> kv) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) fail(source, 1, "bad header field '" + kv + "'");
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (key == "variant") {
      t.variant = value;
    } else if (key == "k") {
      t.k = count(value, source, 1);
    } else if (key == "dim") {
      dim = count(value, source, 1);
      has_dim = true;
    }
  }
  if (t.variant.empty()) fail(source, 1, "header names no variant");
  std::vector<std::vector<double>> rows;
  std::size_t no = 1;
  while (std::getline(in, line)) {
    ++no;
    line = strip_cr(std::move(line));
    if (skippable(line)) continue;
    auto f = split(line, '\t');
    if (!has_dim) {
      dim = f.size() - 1;
      has_dim = true;
    }
    if (f.size() != dim + 1) fail(source, no, "expected " + std::to_string(dim) + " values");
    t.ids.push_back(f[0]);
    std::vector<double> row(dim);
    for (std::size_t c = 0; c < dim; ++c) row[c] = number(f[c + 1], source, no);
    rows.push_back(std::move(row));
  }
  t.values.resize(idx(rows.size()), idx(dim));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < dim; ++c) t.values(idx(r), idx(c)) = rows[r][c];
  }
  return t;
}

void write_coordinates(std::ostream& out, const SparseRowMatrix& m) {
  out << "# shape " << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto cols = m.row_cols(r);
    const auto vals = m.row_values(r);
    for (std::size_t j = 0; j < cols.size(); ++j) out << r << '\t' << cols[j] << '\t' << format_double(vals[j]) << '\n';
  }
}

SparseRowMatrix read_coordinates(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t no = 0, rows = 0, cols = 0;
  bool shaped = false;
  std::vector<Triplet> t;
  while (std::getline(in, line)) {
    ++no;
    line = strip_cr(std::move(line));
    if (line.rfind("# shape ", 0) == 0) {
      std::istringstream s(line.substr(8));
      if (!(s >> rows >> cols)) fail(source, no, "bad shape header");
      shaped = true;
      continue;
    }
    if (skippable(line)) continue;
    auto f = split(line, '\t');
    if (f.size() != 3) fail(source, no, "expected row<TAB>col<TAB>value");
    t.push_back({count(f[0], source, no), count(f[1], source, no), number(f[2], source, no)});
    if (!shaped) {
      rows = std::max(rows, t.back().row + 1);
      cols = std::max(cols, t.back().col + 1);
    } else if (t.back().row >= rows || t.back().col >= cols) {
      fail(source, no, "entry outside the declared shape");
    }
  }
  return SparseRowMatrix::from_triplets(rows, cols, std::move(t));
}

void write_dense_csv(std::ostream& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    write_row(out, m, r, ',');
    out << '\n';
  }
}

Matrix read_dense_csv(std::istream& in, const std::string& source) {
  std::vector<std::vector<double>> rows;
  for_lines(in, [&](const std::string& line, std::size_t no) {
    auto f = split(line, ',');
    if (!rows.empty() && f.size() != rows.front().size()) fail(source, no, "ragged row");
    std::vector<double> row;
    for (const auto& cell : f) row.push_back(number(cell, source, no));
    rows.push_back(std::move(row));
  });
  Matrix m(idx(rows.size()), idx(rows.empty() ? 0 : rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(idx(r), idx(c)) = rows[r][c];
  }
  return m;
}

std::vector<SpectrumRow> spectrum_rows(const SpectrumResult& spectrum) {
  const auto& ev = spectrum.eigenvalues;
  const double inf = std::numeric_limits<double>::infinity();
  auto reciprocal = [&](double l) { return l < kZeroEigenvalue ? inf : 1.0 / l; };
  std::vector<SpectrumRow> rows;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    SpectrumRow r;
    r.c = i + 1;
    r.lambda = ev[i];
    r.t_exit = reciprocal(ev[i]);
    r.t_enter = i + 1 < ev.size() ? reciprocal(ev[i + 1]) : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(r);
  }
  return rows;
}

void write_spectrum(std::ostream& out, const SpectrumResult& spectrum) {
  out << "c\tlambda\tt_enter\tt_exit\n";
  for (const auto& r : spectrum_rows(spectrum)) {
    out << r.c << '\t' << format_double(r.lambda) << '\t' << format_double(r.t_enter) << '\t'
        << format_double(r.t_exit) << '\n';
  }
}

std::vector<SpectrumRow> read_spectrum(std::istream& in, const std::string& source) {
  std::vector<SpectrumRow> rows;
  for_lines(in, [&](const std::string& line, std::size_t no) {
    if (line.rfind("c\t", 0) == 0) return;
    auto f = split(line, '\t');
    if (f.size() != 4) fail(source, no, "expected c<TAB>lambda<TAB>t_enter<TAB>t_exit");
    rows.push_back({count(f[0], source, no), number(f[1], source, no), number(f[2], source, no),
                    number(f[3], source, no)});
  });
  return rows;
}

void write_history(std::ostream& out, const TrainHistory& history) {
  out << "epoch,train_loss,val_loss,val_acc\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << ','
        << format_double(e.val_accuracy) << '\n';
  }
}

std::vector<EpochRecord> read_history(std::istream& in, const std::string& source) {
  std::vector<EpochRecord> out;
  for_lines(in, [&](const std::string& line, std::size_t no) {
    if (line.rfind("epoch,", 0) == 0) return;
    auto f = split(line, ',');
    if (f.size() != 4) fail(source, no, "expected epoch,train_loss,val_loss,val_acc");
    out.push_back({count(f[0], source, no), number(f[1], source, no), number(f[2], source, no),
                   number(f[3], source, no)});
  });
  return out;
}

void write_checkpoint(std::ostream& out, const ModelParams& params, Variant variant) {
  out << "# giam checkpoint variant=" << to_string(variant) << '\n';
  const auto names = params.block_names();
  const auto blocks = params.blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const Matrix& m = *blocks[b];
    out << "block " << names[b] << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      write_row(out, m, r, ' ');
      out << '\n';
    }
  }
}

ModelParams read_checkpoint(std::istream& in, Variant* variant, const std::string& source) {
  std::string line;
  std::size_t no = 0;
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++no;
      line = strip_cr(std::move(line));
      if (line.rfind("# giam checkpoint variant=", 0) == 0) {
        if (variant) *variant = parse_variant(line.substr(26));
        continue;
      }
      if (!skippable(line)) return true;
    }
    return false;
  };
  ModelParams p;
  while (next()) {
    std::istringstream head(line);
    std::string word, name;
    std::size_t rows = 0, cols = 0;
    if (!(head >> word >> name >> rows >> cols) || word != "block") fail(source, no, "expected a block header");
    Matrix m(idx(rows), idx(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      if (!next()) fail(source, no, "truncated block " + name);
      auto f = split(line, ' ');
      if (f.size() != cols) fail(source, no, "expected " + std::to_string(cols) + " values");
      for (std::size_t c = 0; c < cols; ++c) m(idx(r), idx(c)) = number(f[c], source, no);
    }
    auto indexed = [&](const std::string& prefix, std::vector<Matrix>& into) {
      if (name.rfind(prefix, 0) != 0) return false;
      const std::size_t i = count(name.substr(prefix.size()), source, no);
      if (i != into.size()) fail(source, no, "blocks out of order at " + name);
      into.push_back(std::move(m));
      return true;
    };
    if (indexed("projection_", p.projections) || indexed("weight_", p.weights) ||
        indexed("head_", p.head_projections)) {
      continue;
    }
    if (name == "classifier") {
      p.classifier = std::move(m);
    } else if (name == "attention") {
      p.attention = std::move(m);
    } else if (name == "metapath_logits") {
      p.metapath_logits = std::move(m);
    } else {
      fail(source, no, "unknown block " + name);
    }
  }
  return p;
}

std::vector<EvalRow> eval_rows(const EvalReport& report) {
  std::vector<EvalRow> rows;
  for (std::size_t i = 0; i < report.ratios.size(); ++i) {
    const ProbeScore& s = report.probe[i];
    rows.push_back({"macro_f1", report.ratios[i], s.macro_mean, s.macro_stddev});
    rows.push_back({"micro_f1", report.ratios[i], s.micro_mean, s.micro_stddev});
  }
  rows.push_back({"nmi", std::nullopt, report.clustering.nmi_mean, report.clustering.nmi_stddev});
  rows.push_back({"ari", std::nullopt, report.clustering.ari_mean, report.clustering.ari_stddev});
  return rows;
}

void write_eval(std::ostream& out, const std::vector<EvalRow>& rows) {
  out << "metric,ratio,mean,stddev\n";
  for (const auto& r : rows) {
    out << r.metric << ',' << (r.ratio ? format_double(*r.ratio) : std::string{}) << ','
        << format_double(r.mean) << ',' << format_double(r.stddev) << '\n';
  }
}

std::vector<EvalRow> read_eval(std::istream& in, const std::string& source) {
  std::vector<EvalRow> rows;
  for_lines(in, [&](const std::string& line, std::size_t no) {
    if (line.rfind("metric,", 0) == 0) return;
    auto f = split(line, ',');
    if (f.size() != 4) fail(source, no, "expected metric,ratio,mean,stddev");
    EvalRow r;
    r.metric = f[0];
    if (!f[1].empty()) r.ratio = number(f[1], source, no);
    r.mean = number(f[2], source, no);
    r.stddev = number(f[3], source, no);
    rows.push_back(r);
  });
  return rows;
}

void write_report(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "walk,k,hub,hub_zero_fraction,hub_within_mass,hub_out_mass,mean_within_mass,row_nmi\n";
  for (const auto& r : rows) {
    out << r.walk << ',' << r.k << ',' << r.hub << ',' << format_double(r.hub_zero_fraction) << ','
        << format_double(r.hub_within_mass) << ',' << format_double(r.hub_out_mass) << ','
        << format_double(r.mean_within_mass) << ',' << format_double(r.row_nmi) << '\n';
  }
}

std::vector<ReportRow> read_report(std::istream& in, const std::string& source) {
  std::vector<ReportRow> rows;
  for_lines(in, [&](const std::string& line, std::size_t no) {
    if (line.rfind("walk,", 0) == 0) return;
    auto f = split(line, ',');
    if (f.size() != 8) fail(source, no, "expected 8 report columns");
    ReportRow r;
    r.walk = f[0];
    r.k = count(f[1], source, no);
    r.hub = count(f[2], source, no);
    r.hub_zero_fraction = number(f[3], source, no);
    r.hub_within_mass = number(f[4], source, no);
    r.hub_out_mass = number(f[5], source, no);
    r.mean_within_mass = number(f[6], source, no);
    r.row_nmi = number(f[7], source, no);
    rows.push_back(r);
  });
  return rows;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return out;
}

}  // namespace giam
