// Command-line front end: one subcommand per pipeline stage plus `run`.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "giam/config.hpp"
#include "giam/io.hpp"
#include "giam/pipeline.hpp"
#include "giam/propagation.hpp"
#include "giam/synthetic.hpp"

namespace fs = std::filesystem;
using namespace giam;

namespace {

std::optional<std::uint64_t> g_seed;

template <typename F>
void emit(const std::string& path, F&& writer) {
  std::ostringstream out;
  writer(out);
  if (path.empty() || path == "-") {
    std::cout << out.str();
  } else {
    write_file(path, out.str());
  }
}

HinGraph load_graph(const std::string& nodes, const std::string& edges) {
  std::ifstream nin(nodes), ein(edges);
  if (!nin) throw std::runtime_error("cannot open " + nodes);
  if (!ein) throw std::runtime_error("cannot open " + edges);
  return build_graph(read_nodes(nin, nodes), read_edges(ein, edges));
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg = path.empty() ? RunConfig{} : parse_config_file(path);
  if (g_seed) cfg.set("seed", std::to_string(*g_seed));
  return cfg;
}

SyntheticGraph synthesize(const std::string& kind, std::uint64_t seed) {
  if (kind == "newman") {
    NewmanSpec spec;
    spec.seed = seed;
    return newman_graph(spec);
  }
  if (kind == "powerlaw") {
    PlantedPowerLawSpec spec;
    spec.seed = seed;
    return planted_powerlaw_graph(spec);
  }
  throw std::invalid_argument("unknown generator '" + kind + "' (newman or powerlaw)");
}

std::vector<std::size_t> parse_steps(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<std::size_t>(std::stoul(item)));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous graph embedding with null-model constrained propagation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option_function<std::uint64_t>("--seed", [](std::uint64_t s) { g_seed = s; },
                                         "Override the configured seed");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate node/edge tables and print a summary");
  std::string nodes, edges, features, out;
  ingest->add_option("--nodes", nodes, "Node table")->required();
  ingest->add_option("--edges", edges, "Edge table")->required();
  ingest->add_option("--features", features, "Sparse feature table");
  ingest->add_option("--out", out, "Directory for canonical tables");
  ingest->callback([&] {
    const HinGraph g = load_graph(nodes, edges);
    if (!features.empty()) {
      std::ifstream fin(features);
      if (!fin) throw std::runtime_error("cannot open " + features);
      read_features(fin, g, features);
    }
    std::cout << "nodes\t" << g.node_count() << "\nedges\t" << g.edges().size() << "\nnode_types\t"
              << g.type_count() << "\nedge_types\t" << g.edge_type_count() << '\n';
    for (std::size_t t = 0; t < g.type_count(); ++t) {
      std::cout << "type\t" << g.type_names()[t] << '\t' << g.type_range(t).size() << '\n';
    }
    if (!out.empty()) {
      emit((fs::path(out) / "nodes.tsv").string(), [&](std::ostream& o) { write_nodes(o, g); });
      emit((fs::path(out) / "edges.tsv").string(), [&](std::ostream& o) { write_edges(o, g); });
    }
  });

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a benchmark graph with ground-truth labels");
  std::string kind = "newman";
  synth->add_option("generator", kind, "newman or powerlaw");
  synth->add_option("--out", out, "Output directory")->required();
  synth->callback([&] {
    const SyntheticGraph g = synthesize(kind, g_seed.value_or(1));
    const fs::path dir(out);
    emit((dir / "nodes.tsv").string(), [&](std::ostream& o) { write_nodes(o, g.graph); });
    emit((dir / "edges.tsv").string(), [&](std::ostream& o) { write_edges(o, g.graph); });
    LabelTable t;
    for (std::size_t i = 0; i < g.groups.size(); ++i) {
      t.ids.push_back(g.graph.node_id(i));
      t.labels.push_back(std::to_string(g.groups[i]));
    }
    emit((dir / "labels.tsv").string(), [&](std::ostream& o) { write_labels(o, t); });
  });

  // propagate
  auto* propagate = app.add_subcommand("propagate", "Write the k-step propagation matrix");
  std::size_t k = 10;
  std::string walk = "constrained";
  bool dense = false;
  propagate->add_option("--nodes", nodes, "Node table")->required();
  propagate->add_option("--edges", edges, "Edge table")->required();
  propagate->add_option("-k,--steps", k, "Walk length");
  propagate->add_option("--walk", walk, "constrained or unconstrained")
      ->check(CLI::IsMember({"constrained", "unconstrained"}));
  propagate->add_flag("--dense", dense, "Dense CSV grid instead of coordinates");
  propagate->add_option("--out", out, "Output file (stdout when omitted)");
  propagate->callback([&] {
    const HinGraph g = load_graph(nodes, edges);
    const AugmentedAdjacency aug = augment(g);
    const TransitionMatrix p = transition(aug);
    const PropagationState s =
        walk == "constrained" ? constrained_walk(p, null_transition(aug), k) : unconstrained_walk(p, k);
    emit(out, [&](std::ostream& o) {
      if (dense) {
        write_dense_csv(o, s.matrix.to_dense());
      } else {
        write_coordinates(o, s.matrix);
      }
    });
  });

  // spectrum
  auto* spectrum = app.add_subcommand("spectrum", "Smallest Markov generator eigenvalues and mixing windows");
  std::size_t c_max = 10;
  spectrum->add_option("--nodes", nodes, "Node table")->required();
  spectrum->add_option("--edges", edges, "Edge table")->required();
  spectrum->add_option("--c-max", c_max, "Number of eigenvalues");
  spectrum->add_option("--out", out, "Output file (stdout when omitted)");
  spectrum->callback([&] {
    const HinGraph g = load_graph(nodes, edges);
    const AugmentedAdjacency aug = augment(g);
    const SpectrumResult spec = markov_spectrum(transition(aug), aug, std::min(c_max, g.node_count()));
    emit(out, [&](std::ostream& o) { write_spectrum(o, spec); });
  });

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model; writes history.csv and checkpoint.txt");
  std::string config;
  train_cmd->add_option("--config", config, "Run configuration")->required();
  train_cmd->callback([&] {
    const RunConfig cfg = load_config(config);
    cfg.validate();
    const PreparedModel prepared = prepare_model(cfg, load_dataset(cfg));
    const TrainedModel trained = train_model(cfg, prepared);
    const fs::path dir = cfg.output_dir();
    emit((dir / "history.csv").string(), [&](std::ostream& o) { write_history(o, trained.history); });
    emit((dir / "checkpoint.txt").string(), [&](std::ostream& o) {
      write_checkpoint(o, trained.history.best_params, trained.config.variant);
    });
    std::cout << "best_epoch\t" << trained.history.best_epoch << "\nbest_val_loss\t"
              << format_double(trained.history.best_val_loss) << '\n';
  });

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "Export embeddings from a checkpoint");
  std::string checkpoint;
  embed_cmd->add_option("--config", config, "Run configuration")->required();
  embed_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  embed_cmd->add_option("--out", out, "Embedding file (defaults to the output directory)");
  embed_cmd->callback([&] {
    const RunConfig cfg = load_config(config);
    cfg.validate();
    const PreparedModel prepared = prepare_model(cfg, load_dataset(cfg));
    std::ifstream in(checkpoint);
    if (!in) throw std::runtime_error("cannot open " + checkpoint);
    Variant variant = cfg.model.variant;
    const ModelParams params = read_checkpoint(in, &variant, checkpoint);
    if (variant != cfg.model.variant) throw std::invalid_argument("checkpoint variant does not match config");
    ModelConfig model = cfg.model;
    model.classes = prepared.classes;
    const EmbeddingTable table = embed(cfg, prepared, model, params);
    const std::string path = out.empty() ? (cfg.output_dir() / "embeddings.tsv").string() : out;
    emit(path, [&](std::ostream& o) { write_embeddings(o, table); });
  });

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Linear-probe F1 and clustering scores");
  std::string emb_path, labels_path;
  std::size_t repeats = 10;
  std::vector<double> ratios = kProbeRatios;
  evaluate->add_option("--embeddings", emb_path, "Embedding file")->required();
  evaluate->add_option("--labels", labels_path, "Label file")->required();
  evaluate->add_option("--ratios", ratios, "Training ratios")->delimiter(',');
  evaluate->add_option("--repeats", repeats, "Repeats per ratio");
  evaluate->add_option("--out", out, "CSV output (stdout when omitted)");
  evaluate->callback([&] {
    std::ifstream ein(emb_path), lin(labels_path);
    if (!ein) throw std::runtime_error("cannot open " + emb_path);
    if (!lin) throw std::runtime_error("cannot open " + labels_path);
    const EmbeddingTable table = read_embeddings(ein, emb_path);
    const LabelTable lt = read_labels(lin, labels_path);
    const std::vector<int> enc = encode_labels(lt.labels);
    std::map<std::string, int> labels;
    for (std::size_t i = 0; i < lt.ids.size(); ++i) labels[lt.ids[i]] = enc[i];
    const EvalReport report = evaluate_table(table, labels, ratios, repeats, g_seed.value_or(42));
    emit(out, [&](std::ostream& o) { write_eval(o, eval_rows(report)); });
  });

  // report
  auto* report = app.add_subcommand("report", "Propagation diagnostics on a synthetic benchmark");
  std::string steps = "2,6,10", grids;
  report->add_option("generator", kind, "newman or powerlaw");
  report->add_option("--steps", steps, "Comma-separated walk lengths");
  report->add_option("--out", out, "CSV output (stdout when omitted)");
  report->add_option("--grids", grids, "Directory for dense heatmap grids");
  report->callback([&] {
    const std::uint64_t seed = g_seed.value_or(1);
    const SyntheticGraph g = synthesize(kind, seed);
    ReportOptions opt;
    opt.seed = seed;
    const auto ks = parse_steps(steps);
    const auto rows = propagation_report(g, ks, opt);
    emit(out, [&](std::ostream& o) { write_report(o, rows); });
    if (!grids.empty()) {
      const AugmentedAdjacency aug = augment(g.graph);
      const TransitionMatrix p = transition(aug);
      const NullTransition q = null_transition(aug);
      for (std::size_t step : ks) {
        const fs::path dir(grids);
        const std::string tag = "k" + std::to_string(step) + ".csv";
        emit((dir / ("unconstrained_" + tag)).string(),
             [&](std::ostream& o) { write_dense_csv(o, unconstrained_walk(p, step).matrix.to_dense()); });
        emit((dir / ("constrained_" + tag)).string(),
             [&](std::ostream& o) { write_dense_csv(o, constrained_walk(p, q, step).matrix.to_dense()); });
      }
    }
  });

  // run
  auto* run = app.add_subcommand("run", "Full pipeline with manifest");
  run->add_option("--config", config, "Run configuration")->required();
  run->callback([&] {
    const RunConfig cfg = load_config(config);
    const RunResult r = run_pipeline(cfg);
    std::cout << "output\t" << r.directory.string() << "\nconfig_hash\t" << r.config_hash << '\n';
    for (const auto& s : r.stages) std::cout << "stage\t" << s.name << '\t' << format_double(s.seconds) << '\n';
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
