#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "giam/config.hpp"
#include "giam/evaluation.hpp"
#include "giam/hin_graph.hpp"
#include "giam/io.hpp"
#include "giam/models.hpp"
#include "giam/training.hpp"

namespace giam {

/// A stage failed; what() is prefixed with the stage name.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct Dataset {
  HinGraph graph;
  FeatureSet features;
  std::vector<int> labels;  // per canonical node, -1 when unlabeled
  std::vector<std::string> class_names;
};

/// Maps label strings to dense class indices. Empty strings stay -1. Classes
/// are ordered numerically when every label is an integer, else lexically.
std::vector<int> encode_labels(const std::vector<std::string>& raw, std::vector<std::string>* names = nullptr);

Dataset load_dataset(const RunConfig& cfg);

/// The graph operators a variant trains on, plus the node rows they cover.
struct PreparedModel {
  ModelContext context;
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::size_t classes = 0;
};

PreparedModel prepare_model(const RunConfig& cfg, const Dataset& data);

struct TrainedModel {
  ModelConfig config;
  LabeledSplit split;
  TrainHistory history;
};

LabeledSplit split_for(const RunConfig& cfg, const std::vector<int>& labels, std::size_t classes);
TrainedModel train_model(const RunConfig& cfg, const PreparedModel& prepared);

/// Evaluation-mode forward pass exported with node ids.
EmbeddingTable embed(const RunConfig& cfg, const PreparedModel& prepared, const ModelConfig& model,
                     const ModelParams& params);

/// Probe and clustering scores over the labeled rows of an embedding table.
EvalReport evaluate_table(const EmbeddingTable& table, const std::map<std::string, int>& labels,
                          const std::vector<double>& ratios, std::size_t repeats, std::uint64_t seed);

struct StageRecord {
  std::string name;
  double seconds = 0.0;
  std::vector<std::string> outputs;
};

struct RunResult {
  std::filesystem::path directory;
  std::string config_hash;
  std::vector<StageRecord> stages;
  std::map<std::string, std::string> checksums;  // file name -> FNV-1a
};

/// Ingest, propagate, train, embed and evaluate, writing each stage's files
/// and a manifest.json under cfg.output_dir(). On failure the directory
/// keeps its partial outputs plus a `.partial` marker and PipelineError is
/// thrown.
RunResult run_pipeline(const RunConfig& cfg);

}  // namespace giam
