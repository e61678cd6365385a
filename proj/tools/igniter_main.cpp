// Command-line front end: ingest | train-influence | train | evaluate |
// dump-attention, driven by a JSON config with dotted-key overrides.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "igniter/config.hpp"
#include "igniter/eval.hpp"
#include "igniter/rng.hpp"

namespace fs = std::filesystem;
using namespace igniter;

namespace {

struct CliOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  bool seed_set = false;
  std::uint64_t seed = 0;
  bool grad_check = false;
};

Config resolve_config(const CliOptions& opts) {
  Config cfg = opts.config_path.empty() ? default_config() : load_config_file(opts.config_path);
  for (const auto& kv : opts.overrides) apply_override(cfg, kv);
  if (opts.seed_set) {
    apply_override(cfg, "training.seed=" + std::to_string(opts.seed));
  }
  if (opts.grad_check) cfg.training.grad_check = true;
  validate_config(cfg);
  return cfg;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw config_error("config is missing the " + what + " path");
  if (!fs::exists(path)) throw config_error(what + " not found: " + path);
}

TokenIndex empty_token_index() { return TokenIndex{}; }

Corpus load_normalized(const Config& cfg, const TokenIndex& tokens) {
  require_file(cfg.paths.resolved_corpus_dir() + "/meta.json", "normalized corpus (run ingest first)");
  return load_corpus(cfg.paths.resolved_corpus_dir(), tokens, cfg.corpus.n_max);
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << body;
  if (!body.empty() && body.back() != '\n') out << '\n';
}

std::string format_csv_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

int cmd_ingest(const Config& cfg) {
  require_file(cfg.paths.graph, "follower graph");
  require_file(cfg.paths.cascades, "cascades file");
  require_file(cfg.paths.news, "news titles file");
  IngestConfig icfg;
  icfg.window_days = cfg.corpus.window_days;
  icfg.s_max = cfg.corpus.s_max;
  icfg.n_max = cfg.corpus.n_max;
  icfg.min_history = cfg.corpus.min_history;
  // Title token ids are not persisted, so ingest does not need the vocabulary.
  const Corpus corpus =
      ingest_corpus(cfg.paths.graph, cfg.paths.cascades, cfg.paths.news, empty_token_index(), icfg);
  fs::create_directories(cfg.paths.resolved_corpus_dir());
  save_corpus(corpus, cfg.paths.resolved_corpus_dir());
  std::cout << corpus_stats_json(corpus.stats()) << '\n';
  return 0;
}

int cmd_train_influence(const Config& cfg) {
  const Corpus corpus = load_normalized(cfg, empty_token_index());
  InfluenceTrainLog log;
  const InfluenceModel model =
      train_influence(corpus.cascades, corpus.graph.node_count, cfg.influence, &log);
  fs::create_directories(fs::path(cfg.paths.resolved_influence()).parent_path().string().empty()
                             ? "."
                             : fs::path(cfg.paths.resolved_influence()).parent_path().string());
  save_influence(model, cfg.paths.resolved_influence());
  std::string csv = "epoch,loss\n";
  for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) {
    csv += std::to_string(e) + "," + format_csv_value(log.epoch_loss[e]) + "\n";
  }
  write_text(cfg.paths.output_dir + "/influence_loss.csv", csv);
  std::cout << "influence model: " << model.node_count() << " nodes, "
            << model.influencer_ids.size() << " influencers, g2=" << model.g2() << "\n"
            << "archive: " << cfg.paths.resolved_influence() << '\n';
  return 0;
}

template <class S>
int run_training(const Config& cfg, const Corpus& corpus, const WordEmbeddingTable& words,
                 const InfluenceModel& influence) {
  const DatasetSplit split =
      split_timeline(corpus.histories, cfg.corpus.train_frac, cfg.corpus.valid_frac);
  std::string csv = "epoch,train_loss,valid_auc\n";
  const auto on_epoch = [&csv](const EpochLog& log) {
    csv += std::to_string(log.epoch) + "," + format_csv_value(log.train_loss) + "," +
           format_csv_value(log.valid_auc) + "\n";
    std::cerr << "epoch " << log.epoch << ": train_loss=" << log.train_loss
              << " valid_auc=" << log.valid_auc << '\n';
  };
  const TrainResult<S> result =
      train_model<S>(cfg.training, cfg.model, corpus, split, influence, words,
                     cfg.corpus.unit_seconds, cfg.eval.max_test_negatives, on_epoch);
  save_checkpoint(result.params, cfg.paths.resolved_checkpoint());
  write_text(cfg.paths.output_dir + "/training_log.csv", csv);
  if (cfg.training.grad_check) {
    std::cout << "grad_check_max_rel_error: " << result.grad_check_max_rel_error << '\n';
  }
  std::cout << "checkpoint: " << cfg.paths.resolved_checkpoint() << '\n';
  return 0;
}

int cmd_train(Config cfg) {
  require_file(cfg.paths.word_vectors, "word vectors file");
  const WordEmbeddingTable words = load_word_vectors(cfg.paths.word_vectors);
  if (words.g1 != cfg.model.g1) {
    std::cerr << "note: using g1=" << words.g1 << " from " << cfg.paths.word_vectors << '\n';
    cfg.model.g1 = words.g1;
  }
  const Corpus corpus = load_normalized(cfg, words.index);
  require_file(cfg.paths.resolved_influence(), "influence archive (run train-influence first)");
  const InfluenceModel influence = load_influence(cfg.paths.resolved_influence());
  if (influence.g2() != cfg.model.g2) {
    std::cerr << "note: using g2=" << influence.g2() << " from " << cfg.paths.resolved_influence() << '\n';
    cfg.model.g2 = influence.g2();
  }
  fs::create_directories(cfg.paths.output_dir);
  if (cfg.training.precision == 64) {
    return run_training<double>(cfg, corpus, words, influence);
  }
  return run_training<float>(cfg, corpus, words, influence);
}

template <class S>
int run_evaluate(const Config& cfg, const Corpus& corpus, const WordEmbeddingTable& words,
                 const InfluenceModel& influence, bool attention_only) {
  ModelParams<S> params = ModelParams<S>::sized(cfg.model);
  load_checkpoint_into(params, cfg.paths.resolved_checkpoint());
  const EncodingTables<S> tables = make_tables<S>(words, influence);
  const DatasetSplit split =
      split_timeline(corpus.histories, cfg.corpus.train_frac, cfg.corpus.valid_frac);
  const ImpressionBuilder builder(corpus, influence, cfg.model, cfg.corpus.unit_seconds);
  ImpressionBuildStats stats;
  const auto impressions =
      builder.build(split.test, cfg.eval.max_test_negatives, /*test_mode=*/true,
                    derive_seed(cfg.training.seed, 0x7e57u), &stats);
  fs::create_directories(cfg.paths.output_dir);
  if (attention_only) {
    const std::string path = cfg.paths.output_dir + "/attention.jsonl";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    dump_attention(params, tables, impressions, out, cfg.eval.attention_per_user);
    std::cout << "attention dump: " << path << '\n';
    return 0;
  }
  EvalOptions options;
  options.threads = cfg.eval.threads;
  options.global_auc = cfg.eval.global_auc;
  const MetricReport report = evaluate(params, tables, impressions, corpus, options);
  const std::string body = metric_report_json(report);
  write_text(cfg.paths.output_dir + "/metrics.json", body);
  std::cout << body << '\n';
  return 0;
}

int cmd_evaluate(Config cfg, bool attention_only) {
  require_file(cfg.paths.word_vectors, "word vectors file");
  require_file(cfg.paths.resolved_checkpoint(), "checkpoint (run train first)");
  require_file(cfg.paths.resolved_influence(), "influence archive");
  const WordEmbeddingTable words = load_word_vectors(cfg.paths.word_vectors);
  if (words.g1 != cfg.model.g1) cfg.model.g1 = words.g1;
  const Corpus corpus = load_normalized(cfg, words.index);
  const InfluenceModel influence = load_influence(cfg.paths.resolved_influence());
  if (influence.g2() != cfg.model.g2) cfg.model.g2 = influence.g2();
  // Honor the checkpoint's channel switches (e.g. ablation runs) but keep the
  // configured tensor dimensions so shape mismatches surface as errors.
  const ModelDims ckpt_dims = read_checkpoint_dims(cfg.paths.resolved_checkpoint());
  cfg.model.use_diffusion = ckpt_dims.use_diffusion;
  cfg.model.use_adoption = ckpt_dims.use_adoption;
  if (cfg.training.precision == 64) {
    return run_evaluate<double>(cfg, corpus, words, influence, attention_only);
  }
  return run_evaluate<float>(cfg, corpus, words, influence, attention_only);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diffusion-aware news recommender pipeline"};
  app.require_subcommand(1);

  CliOptions opts;
  app.add_option("--config", opts.config_path, "JSON config file");
  app.add_option("--set", opts.overrides, "override, e.g. --set training.lr=0.01")
      ->take_all()
      ->allow_extra_args(false);
  auto* seed_opt = app.add_option("--seed", opts.seed, "override training.seed");
  app.add_flag("--grad-check", opts.grad_check, "finite-difference probe on the first batch");

  auto* ingest = app.add_subcommand("ingest", "normalize raw graph/cascades/news files");
  auto* train_inf = app.add_subcommand("train-influence", "learn influence embeddings");
  auto* train = app.add_subcommand("train", "train the recommender");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "metrics on the timeline test split");
  auto* dump = app.add_subcommand("dump-attention", "export attention weights as JSON lines");
  for (CLI::App* sub : {ingest, train_inf, train, evaluate_cmd, dump}) {
    sub->fallthrough();  // global options may follow the subcommand name
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    opts.seed_set = seed_opt->count() > 0;
    const Config cfg = resolve_config(opts);
    if (ingest->parsed()) return cmd_ingest(cfg);
    if (train_inf->parsed()) return cmd_train_influence(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (evaluate_cmd->parsed()) return cmd_evaluate(cfg, /*attention_only=*/false);
    if (dump->parsed()) return cmd_evaluate(cfg, /*attention_only=*/true);
    std::cerr << "no subcommand given\n";
    return 2;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
