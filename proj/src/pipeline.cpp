#include "giam/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "giam/propagation.hpp"
#include "giam/synthetic.hpp"

namespace giam {

namespace {

bool is_integer(const std::string& s) {
  if (s.empty()) return false;
  std::size_t i = s.front() == '-' ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  return true;
}

std::ifstream open(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return in;
}

std::vector<MetaPath> parse_candidates(const RunConfig& cfg, const HinGraph& graph) {
  std::vector<MetaPath> out;
  for (const auto& label : cfg.candidates) {
    out.push_back(MetaPath::parse(label));
    out.back().validate(graph);
  }
  return out;
}

FeatureSet single_block(const FeatureSet& fs, std::size_t type) {
  FeatureSet out;
  out.blocks.push_back(fs.blocks.at(type));
  return out;
}

}  // namespace

std::vector<int> encode_labels(const std::vector<std::string>& raw, std::vector<std::string>* names) {
  std::vector<std::string> distinct;
  for (const auto& s : raw) {
    if (!s.empty()) distinct.push_back(s);
  }
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (std::all_of(distinct.begin(), distinct.end(), is_integer)) {
    std::sort(distinct.begin(), distinct.end(),
              [](const std::string& a, const std::string& b) { return std::stoll(a) < std::stoll(b); });
  }
  std::vector<int> out(raw.size(), -1);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].empty()) continue;
    out[i] = static_cast<int>(std::find(distinct.begin(), distinct.end(), raw[i]) - distinct.begin());
  }
  if (names) *names = std::move(distinct);
  return out;
}

Dataset load_dataset(const RunConfig& cfg) {
  Dataset d;
  if (!cfg.synthetic.empty()) {
    SyntheticGraph g;
    if (cfg.synthetic == "newman") {
      NewmanSpec spec;
      spec.seed = cfg.seed;
      g = newman_graph(spec);
    } else {
      PlantedPowerLawSpec spec;
      spec.seed = cfg.seed;
      g = planted_powerlaw_graph(spec);
    }
    d.graph = std::move(g.graph);
  } else {
    auto nin = open(cfg.nodes);
    auto ein = open(cfg.edges);
    d.graph = build_graph(read_nodes(nin, cfg.nodes.string()), read_edges(ein, cfg.edges.string()));
  }
  if (!cfg.features.empty()) {
    auto fin = open(cfg.features);
    d.features = read_features(fin, d.graph, cfg.features.string());
  } else {
    d.features = FeatureSet::one_hot(d.graph.type_ranges());
  }
  std::vector<std::string> raw = d.graph.node_labels();
  if (!cfg.labels.empty()) {
    auto lin = open(cfg.labels);
    const LabelTable t = read_labels(lin, cfg.labels.string());
    std::fill(raw.begin(), raw.end(), std::string{});
    for (std::size_t i = 0; i < t.ids.size(); ++i) {
      if (!d.graph.has_id(t.ids[i])) {
        throw IngestError("labels: unknown node id '" + t.ids[i] + "'");
      }
      raw[d.graph.index_of(t.ids[i])] = t.labels[i];
    }
  }
  d.labels = encode_labels(raw, &d.class_names);
  return d;
}

PreparedModel prepare_model(const RunConfig& cfg, const Dataset& data) {
  const HinGraph& g = data.graph;
  PreparedModel out;
  const Variant v = cfg.model.variant;
  const bool candidate_mode = !cfg.candidates.empty() && v != Variant::gcn && v != Variant::giam1;
  std::size_t begin = 0, end = g.node_count();
  if (candidate_mode) {
    const auto paths = parse_candidates(cfg, g);
    const std::size_t target = g.type_of(paths.front().types().front());
    const TypeRange& r = g.type_range(target);
    begin = r.begin;
    end = r.end;
    FeatureSet fs = single_block(data.features, target);
    const std::vector<TypeRange> ranges = {TypeRange{0, r.size()}};
    if (v == Variant::giam3) {
      std::vector<PropagationState> states;
      std::vector<std::string> labels;
      for (const auto& p : paths) {
        states.push_back(candidate_metapath_state(g, {p}, cfg.k));
        labels.push_back(p.label());
      }
      out.context = make_metapath_context(std::move(states), std::move(labels), std::move(fs));
    } else {
      out.context = make_improved_context(v, candidate_metapath_state(g, paths, cfg.k), std::move(fs),
                                          ranges, {g.type_names()[target]});
    }
  } else {
    const AugmentedAdjacency aug = augment(g);
    switch (v) {
      case Variant::gcn:
        out.context = make_gcn_context(aug, data.features, g.type_ranges());
        break;
      case Variant::giam1:
        out.context = make_naive_context(g, aug, data.features);
        break;
      case Variant::giam2:
      case Variant::giam: {
        const PropagationState s = constrained_walk(transition(aug), null_transition(aug), cfg.k);
        out.context = make_improved_context(v, s, data.features, g.type_ranges(), g.type_names());
        break;
      }
      case Variant::giam3:
        throw std::invalid_argument("giam3 requires candidate meta-paths");
    }
  }
  for (std::size_t i = begin; i < end; ++i) {
    out.ids.push_back(g.node_id(i));
    out.labels.push_back(data.labels[i]);
  }
  out.classes = data.class_names.size();
  return out;
}

LabeledSplit split_for(const RunConfig& cfg, const std::vector<int>& labels, std::size_t classes) {
  const auto labeled = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l >= 0; }));
  if (labeled < 3) throw std::invalid_argument("need at least 3 labeled nodes, found " + std::to_string(labeled));
  const auto share = [&](double f) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(f * static_cast<double>(labeled))));
  };
  const std::size_t train = share(cfg.train_fraction);
  const std::size_t val = std::min(share(cfg.validation_fraction), labeled - train - 1);
  LabeledSplit split = make_split(labels, train, val, cfg.seed);
  split.classes = classes;
  return split;
}

TrainedModel train_model(const RunConfig& cfg, const PreparedModel& prepared) {
  TrainedModel out;
  out.config = cfg.model;
  out.config.classes = prepared.classes;
  if (out.config.classes < 2) throw std::invalid_argument("training needs at least two classes");
  out.split = split_for(cfg, prepared.labels, prepared.classes);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  out.history = train(prepared.context, out.config, out.split, tc);
  return out;
}

EmbeddingTable embed(const RunConfig& cfg, const PreparedModel& prepared, const ModelConfig& model,
                     const ModelParams& params) {
  const ForwardResult fwd = forward(prepared.context, model, params);
  EmbeddingTable t;
  t.variant = to_string(model.variant);
  t.k = cfg.k;
  t.ids = prepared.ids;
  t.values = fwd.embeddings;
  return t;
}

EvalReport evaluate_table(const EmbeddingTable& table, const std::map<std::string, int>& labels,
                          const std::vector<double>& ratios, std::size_t repeats, std::uint64_t seed) {
  std::vector<int> y(table.ids.size(), -1);
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    if (auto it = labels.find(table.ids[i]); it != labels.end()) y[i] = it->second;
  }
  if (std::none_of(y.begin(), y.end(), [](int l) { return l >= 0; })) {
    throw std::invalid_argument("no embedding row has a label");
  }
  return evaluate_embeddings(table.values, y, ratios, repeats, seed);
}

RunResult run_pipeline(const RunConfig& cfg) {
  RunResult result;
  result.directory = cfg.output_dir();
  {
    // Where the run is written does not change what it computes.
    RunConfig hashed = cfg;
    hashed.output.clear();
    result.config_hash = fnv1a_hex(hashed.canonical());
  }
  const auto dir = result.directory;
  std::filesystem::create_directories(dir);
  std::filesystem::remove(dir / ".partial");
  std::filesystem::remove(dir / "manifest.json");

  auto emit = [&](StageRecord& stage, const std::string& name, const std::string& text) {
    write_file(dir / name, text);
    stage.outputs.push_back(name);
    result.checksums[name] = fnv1a_hex(text);
  };
  auto run_stage = [&](const std::string& name, auto&& body) {
    StageRecord stage{name, 0.0, {}};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body(stage);
    } catch (const std::exception& e) {
      write_file(dir / ".partial", name + ": " + e.what() + "\n");
      throw PipelineError(name, e.what());
    }
    stage.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.stages.push_back(std::move(stage));
  };

  Dataset data;
  run_stage("ingest", [&](StageRecord& st) {
    cfg.validate();
    data = load_dataset(cfg);
    std::ostringstream nodes, edges, labels, summary;
    write_nodes(nodes, data.graph);
    write_edges(edges, data.graph);
    LabelTable lt;
    for (std::size_t i = 0; i < data.graph.node_count(); ++i) {
      if (data.labels[i] < 0) continue;
      lt.ids.push_back(data.graph.node_id(i));
      lt.labels.push_back(std::to_string(data.labels[i]));
    }
    write_labels(labels, lt);
    summary << "nodes\t" << data.graph.node_count() << "\nedges\t" << data.graph.edges().size()
            << "\nnode_types\t" << data.graph.type_count() << "\nedge_types\t" << data.graph.edge_type_count()
            << "\nclasses\t" << data.class_names.size() << '\n';
    for (std::size_t t = 0; t < data.graph.type_count(); ++t) {
      summary << "type\t" << data.graph.type_names()[t] << '\t' << data.graph.type_range(t).size() << '\n';
    }
    emit(st, "nodes.tsv", nodes.str());
    emit(st, "edges.tsv", edges.str());
    emit(st, "labels.tsv", labels.str());
    emit(st, "graph_summary.tsv", summary.str());
  });

  PreparedModel prepared;
  run_stage("propagate", [&](StageRecord& st) {
    prepared = prepare_model(cfg, data);
    std::ostringstream out;
    out << "operator\trows\tcols\tnonzeros\n";
    auto line = [&](const std::string& label, const SparseRowMatrix& m) {
      out << label << '\t' << m.rows() << '\t' << m.cols() << '\t' << m.nonzeros() << '\n';
    };
    const ModelContext& ctx = prepared.context;
    if (ctx.variant == Variant::gcn) line("normalized", ctx.normalized);
    for (std::size_t i = 0; i < ctx.grouping.operators.size(); ++i) line(ctx.grouping.labels[i], ctx.grouping.operators[i]);
    for (std::size_t i = 0; i < ctx.metapath_states.size(); ++i) line(ctx.metapath_labels[i], ctx.metapath_states[i]);
    emit(st, "propagation.tsv", out.str());
  });

  TrainedModel trained;
  run_stage("train", [&](StageRecord& st) {
    trained = train_model(cfg, prepared);
    std::ostringstream hist, ckpt;
    write_history(hist, trained.history);
    write_checkpoint(ckpt, trained.history.best_params, trained.config.variant);
    emit(st, "history.csv", hist.str());
    emit(st, "checkpoint.txt", ckpt.str());
  });

  EmbeddingTable table;
  run_stage("embed", [&](StageRecord& st) {
    table = embed(cfg, prepared, trained.config, trained.history.best_params);
    std::ostringstream out;
    write_embeddings(out, table);
    emit(st, "embeddings.tsv", out.str());
  });

  run_stage("evaluate", [&](StageRecord& st) {
    std::map<std::string, int> labels;
    for (std::size_t i = 0; i < prepared.ids.size(); ++i) {
      if (prepared.labels[i] >= 0) labels[prepared.ids[i]] = prepared.labels[i];
    }
    const EvalReport report = evaluate_table(table, labels, cfg.eval_ratios, cfg.eval_repeats, cfg.seed);
    std::ostringstream out;
    write_eval(out, eval_rows(report));
    emit(st, "eval.csv", out.str());
  });

  nlohmann::ordered_json m;
  m["config_hash"] = result.config_hash;
  m["seed"] = cfg.seed;
  m["variant"] = to_string(cfg.model.variant);
  m["k"] = cfg.k;
  m["config"] = cfg.canonical();
  m["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : result.stages) {
    m["stages"].push_back({{"name", s.name}, {"seconds", s.seconds}, {"outputs", s.outputs}});
  }
  m["checksums"] = result.checksums;
  try {
    write_file(dir / "manifest.json", m.dump(2) + "\n");
  } catch (const std::exception& e) {
    write_file(dir / ".partial", std::string("manifest: ") + e.what() + "\n");
    throw PipelineError("manifest", e.what());
  }
  return result;
}

}  // namespace giam
