#include "giam/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <sstream>

#include "giam/evaluation.hpp"
#include "giam/io.hpp"

namespace giam {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, std::size_t line, const std::string& what) {
  std::string where = line ? "line " + std::to_string(line) + ", " : std::string{};
  throw ConfigError("config " + where + "key '" + key + "': " + what);
}

std::uint64_t as_uint(const std::string& key, const std::string& v, std::size_t line) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
    bad(key, line, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t as_positive(const std::string& key, const std::string& v, std::size_t line) {
  const auto out = as_uint(key, v, line);
  if (out == 0) bad(key, line, "must be positive");
  return static_cast<std::size_t>(out);
}

double as_real(const std::string& key, const std::string& v, std::size_t line) {
  try {
    return parse_double(v);
  } catch (const std::exception&) {
    bad(key, line, "expected a number, got '" + v + "'");
  }
}

std::vector<std::string> as_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

}  // namespace

RunConfig::RunConfig() : eval_ratios(kProbeRatios) {
  model.variant = Variant::giam2;
  train.seed = seed;
}

void RunConfig::set(const std::string& key, const std::string& value, std::size_t line) {
  const std::string& v = value;
  if (line) key_lines[key] = line;
  if (key == "synthetic") {
    if (v != "newman" && v != "powerlaw" && !v.empty()) bad(key, line, "expected newman or powerlaw");
    synthetic = v;
  } else if (key == "nodes") {
    nodes = v;
  } else if (key == "edges") {
    edges = v;
  } else if (key == "features") {
    features = v;
  } else if (key == "labels") {
    labels = v;
  } else if (key == "variant") {
    try {
      model.variant = parse_variant(v);
    } catch (const std::exception&) {
      bad(key, line, "unknown variant '" + v + "'");
    }
  } else if (key == "activation") {
    try {
      model.activation = parse_activation(v);
    } catch (const std::exception&) {
      bad(key, line, "unknown activation '" + v + "'");
    }
  } else if (key == "k") {
    k = as_positive(key, v, line);
  } else if (key == "hidden") {
    model.hidden = as_positive(key, v, line);
  } else if (key == "heads") {
    model.heads = as_positive(key, v, line);
  } else if (key == "layers") {
    model.layers = as_positive(key, v, line);
  } else if (key == "leaky_slope") {
    model.leaky_slope = as_real(key, v, line);
  } else if (key == "candidates") {
    candidates = as_list(v);
  } else if (key == "lr") {
    train.learning_rate = as_real(key, v, line);
  } else if (key == "dropout") {
    train.dropout_rate = as_real(key, v, line);
  } else if (key == "patience") {
    train.patience = as_positive(key, v, line);
  } else if (key == "max_epochs") {
    train.max_epochs = as_positive(key, v, line);
  } else if (key == "weight_decay") {
    train.weight_decay = as_real(key, v, line);
  } else if (key == "train_fraction") {
    train_fraction = as_real(key, v, line);
  } else if (key == "validation_fraction") {
    validation_fraction = as_real(key, v, line);
  } else if (key == "eval_ratios") {
    eval_ratios.clear();
    for (const auto& item : as_list(v)) eval_ratios.push_back(as_real(key, item, line));
  } else if (key == "eval_repeats") {
    eval_repeats = as_positive(key, v, line);
  } else if (key == "output") {
    output = v;
  } else if (key == "seed") {
    seed = as_uint(key, v, line);
    train.seed = seed;
  } else {
    bad(key, line, "unknown key");
  }
}

void RunConfig::validate() const {
  // Point range errors at the line that set the key, when there was one.
  auto bad = [this](const std::string& key, std::size_t, const std::string& what) {
    const auto it = key_lines.find(key);
    giam::bad(key, it == key_lines.end() ? 0 : it->second, what);
  };
  auto need_file = [&bad](const char* key, const std::filesystem::path& p) {
    if (!p.empty() && !std::filesystem::exists(p)) bad(key, 0, "no such file: " + p.string());
  };
  if (synthetic.empty()) {
    if (nodes.empty()) bad("nodes", 0, "required unless 'synthetic' is set");
    if (edges.empty()) bad("edges", 0, "required unless 'synthetic' is set");
  }
  need_file("nodes", nodes);
  need_file("edges", edges);
  need_file("features", features);
  need_file("labels", labels);
  if (model.variant == Variant::giam3 && candidates.empty()) {
    bad("candidates", 0, "variant giam3 requires candidate meta-paths");
  }
  if (model.variant == Variant::giam && model.hidden % model.heads != 0) {
    bad("heads", 0, "hidden must be divisible by heads");
  }
  if (!(train.learning_rate > 0.0)) bad("lr", 0, "must be positive");
  if (train.dropout_rate < 0.0 || train.dropout_rate >= 1.0) bad("dropout", 0, "must lie in [0, 1)");
  if (train.weight_decay < 0.0) bad("weight_decay", 0, "must be non-negative");
  if (!(train_fraction > 0.0) || train_fraction >= 1.0) bad("train_fraction", 0, "must lie in (0, 1)");
  if (validation_fraction < 0.0 || train_fraction + validation_fraction >= 1.0) {
    bad("validation_fraction", 0, "train and validation fractions must leave test nodes");
  }
  for (double r : eval_ratios) {
    if (!(r > 0.0 && r < 1.0)) bad("eval_ratios", 0, "ratios must lie in (0, 1)");
  }
}

std::string RunConfig::canonical() const {
  std::ostringstream out;
  out << "synthetic = " << synthetic << '\n'
      << "nodes = " << nodes.string() << '\n'
      << "edges = " << edges.string() << '\n'
      << "features = " << features.string() << '\n'
      << "labels = " << labels.string() << '\n'
      << "variant = " << to_string(model.variant) << '\n'
      << "activation = " << to_string(model.activation) << '\n'
      << "k = " << k << '\n'
      << "hidden = " << model.hidden << '\n'
      << "heads = " << model.heads << '\n'
      << "layers = " << model.layers << '\n'
      << "leaky_slope = " << format_double(model.leaky_slope) << '\n'
      << "candidates = " << join(candidates) << '\n'
      << "lr = " << format_double(train.learning_rate) << '\n'
      << "dropout = " << format_double(train.dropout_rate) << '\n'
      << "patience = " << train.patience << '\n'
      << "max_epochs = " << train.max_epochs << '\n'
      << "weight_decay = " << format_double(train.weight_decay) << '\n'
      << "train_fraction = " << format_double(train_fraction) << '\n'
      << "validation_fraction = " << format_double(validation_fraction) << '\n';
  std::vector<std::string> ratios;
  for (double r : eval_ratios) ratios.push_back(format_double(r));
  out << "eval_ratios = " << join(ratios) << '\n'
      << "eval_repeats = " << eval_repeats << '\n'
      << "output = " << output.string() << '\n'
      << "seed = " << seed << '\n';
  return out.str();
}

std::filesystem::path RunConfig::output_dir() const {
  if (!output.empty()) return output;
  const char* root = std::getenv(kOutputRootEnv);
  return std::filesystem::path(root && *root ? root : ".") / "giam-run";
}

RunConfig parse_config(std::istream& in, const std::filesystem::path& base) {
  RunConfig cfg;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line) + ": expected 'key = value', got '" + text + "'");
    }
    const std::string key = trim(text.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line) + ": empty key");
    cfg.set(key, trim(text.substr(eq + 1)), line);
  }
  if (!base.empty()) {
    for (auto* p : {&cfg.nodes, &cfg.edges, &cfg.features, &cfg.labels, &cfg.output}) {
      if (!p->empty() && p->is_relative()) *p = base / *p;
    }
  }
  return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in, path.parent_path());
}

}  // namespace giam
