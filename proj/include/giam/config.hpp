#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "giam/models.hpp"
#include "giam/training.hpp"

namespace giam {

/// Bad configuration; names the key and, for file input, the line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Name of the environment variable holding the default output root.
inline constexpr const char* kOutputRootEnv = "GIAM_OUTPUT_ROOT";

struct RunConfig {
  // Dataset. Either a synthetic generator ("newman", "powerlaw") or tables.
  std::string synthetic;
  std::filesystem::path nodes;
  std::filesystem::path edges;
  std::filesystem::path features;
  std::filesystem::path labels;

  ModelConfig model;             // classes is filled in from the data
  std::size_t k = 10;
  std::vector<std::string> candidates;  // meta-path labels such as "M-D-M"

  TrainConfig train;
  double train_fraction = 0.1;   // of the labeled nodes
  double validation_fraction = 0.1;

  std::vector<double> eval_ratios;
  std::size_t eval_repeats = 10;

  std::filesystem::path output;
  std::uint64_t seed = 42;
  std::map<std::string, std::size_t> key_lines;  // config line of each key that was set

  RunConfig();

  /// Cross-field rules and path existence. Throws ConfigError.
  void validate() const;
  /// Sets one key from its text form; `line` is 0 for command-line overrides.
  void set(const std::string& key, const std::string& value, std::size_t line = 0);
  /// Every key in a stable order, in the same syntax the parser accepts.
  std::string canonical() const;
  /// Output directory, falling back to the environment root.
  std::filesystem::path output_dir() const;
};

/// `key = value` lines with `#` comments. Relative paths resolve against
/// `base`.
RunConfig parse_config(std::istream& in, const std::filesystem::path& base = {});
RunConfig parse_config_file(const std::filesystem::path& path);

}  // namespace giam
