#pragma once

#include <string>

#include "igniter/dims.hpp"
#include "igniter/influence.hpp"
#include "igniter/training.hpp"

namespace igniter {

struct PathsConfig {
  std::string graph;
  std::string cascades;
  std::string news;
  std::string word_vectors;
  std::string output_dir = "out";
  std::string corpus_dir;  // empty = <output_dir>/corpus
  std::string influence;   // empty = <output_dir>/influence.bin
  std::string checkpoint;  // empty = <output_dir>/checkpoint.bin

  std::string resolved_corpus_dir() const {
    return corpus_dir.empty() ? output_dir + "/corpus" : corpus_dir;
  }
  std::string resolved_influence() const {
    return influence.empty() ? output_dir + "/influence.bin" : influence;
  }
  std::string resolved_checkpoint() const {
    return checkpoint.empty() ? output_dir + "/checkpoint.bin" : checkpoint;
  }
};

struct CorpusConfig {
  int window_days = 90;
  int s_max = 20;
  int n_max = 20;
  std::int64_t unit_seconds = 3600;
  int d_max = 120;
  int min_history = 1;
  double train_frac = 0.85;
  double valid_frac = 0.10;
};

struct EvalConfig {
  int max_test_negatives = 10;
  bool global_auc = false;
  int threads = 1;
  int attention_per_user = 5;
};

struct Config {
  PathsConfig paths;
  CorpusConfig corpus;
  ModelDims model;  // n_max/d_max/s_max mirrored from corpus
  InfluenceConfig influence;
  TrainConfig training;
  EvalConfig eval;
};

Config default_config();

/// Loads a JSON config; keys absent in the file keep their defaults. Unknown
/// keys are a config_error.
Config load_config_file(const std::string& path);

/// Applies one "section.key=value" override (value parsed as JSON when
/// possible, else taken as a string).
void apply_override(Config& cfg, const std::string& dotted_assignment);

void validate_config(const Config& cfg);

std::string config_to_json(const Config& cfg);

}  // namespace igniter
