#include "igniter/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace igniter {

namespace {

using json = nlohmann::json;

json to_tree(const Config& c) {
  json j;
  j["paths"] = {{"graph", c.paths.graph},
                {"cascades", c.paths.cascades},
                {"news", c.paths.news},
                {"word_vectors", c.paths.word_vectors},
                {"output_dir", c.paths.output_dir},
                {"corpus_dir", c.paths.corpus_dir},
                {"influence", c.paths.influence},
                {"checkpoint", c.paths.checkpoint}};
  j["corpus"] = {{"window_days", c.corpus.window_days},
                 {"s_max", c.corpus.s_max},
                 {"n_max", c.corpus.n_max},
                 {"unit_seconds", c.corpus.unit_seconds},
                 {"d_max", c.corpus.d_max},
                 {"min_history", c.corpus.min_history},
                 {"train_frac", c.corpus.train_frac},
                 {"valid_frac", c.corpus.valid_frac}};
  j["model"] = {{"g", c.model.g},
                {"g1", c.model.g1},
                {"g2", c.model.g2},
                {"u", c.model.u},
                {"gamma", c.model.gamma},
                {"l", c.model.l},
                {"m", c.model.m},
                {"use_diffusion", c.model.use_diffusion},
                {"use_adoption", c.model.use_adoption}};
  j["influence"] = {{"epochs", c.influence.epochs},
                    {"lr", c.influence.lr},
                    {"k", c.influence.k},
                    {"sampled_softmax", c.influence.sampled_softmax},
                    {"softmax_negatives", c.influence.softmax_negatives}};
  j["training"] = {{"lambda", c.training.lambda},
                   {"lr", c.training.lr},
                   {"epochs", c.training.epochs},
                   {"batch", c.training.batch},
                   {"seed", c.training.seed},
                   {"precision", c.training.precision},
                   {"momentum", c.training.momentum},
                   {"threads", c.training.threads},
                   {"lr_step_factor", c.training.lr_step_factor},
                   {"lr_step_epochs", c.training.lr_step_epochs},
                   {"grad_check", c.training.grad_check}};
  j["eval"] = {{"max_test_negatives", c.eval.max_test_negatives},
               {"global_auc", c.eval.global_auc},
               {"threads", c.eval.threads},
               {"attention_per_user", c.eval.attention_per_user}};
  return j;
}

template <class T>
void bind(const json& j, const char* key, T& out) {
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw config_error(std::string("config key '") + key + "': " + e.what());
  }
}

Config from_tree(const json& j) {
  Config c;
  const json& p = j.at("paths");
  bind(p, "graph", c.paths.graph);
  bind(p, "cascades", c.paths.cascades);
  bind(p, "news", c.paths.news);
  bind(p, "word_vectors", c.paths.word_vectors);
  bind(p, "output_dir", c.paths.output_dir);
  bind(p, "corpus_dir", c.paths.corpus_dir);
  bind(p, "influence", c.paths.influence);
  bind(p, "checkpoint", c.paths.checkpoint);

  const json& co = j.at("corpus");
  bind(co, "window_days", c.corpus.window_days);
  bind(co, "s_max", c.corpus.s_max);
  bind(co, "n_max", c.corpus.n_max);
  bind(co, "unit_seconds", c.corpus.unit_seconds);
  bind(co, "d_max", c.corpus.d_max);
  bind(co, "min_history", c.corpus.min_history);
  bind(co, "train_frac", c.corpus.train_frac);
  bind(co, "valid_frac", c.corpus.valid_frac);

  const json& m = j.at("model");
  bind(m, "g", c.model.g);
  bind(m, "g1", c.model.g1);
  bind(m, "g2", c.model.g2);
  bind(m, "u", c.model.u);
  bind(m, "gamma", c.model.gamma);
  bind(m, "l", c.model.l);
  bind(m, "m", c.model.m);
  bind(m, "use_diffusion", c.model.use_diffusion);
  bind(m, "use_adoption", c.model.use_adoption);
  c.model.n_max = c.corpus.n_max;
  c.model.d_max = c.corpus.d_max;
  c.model.s_max = c.corpus.s_max;

  const json& inf = j.at("influence");
  bind(inf, "epochs", c.influence.epochs);
  bind(inf, "lr", c.influence.lr);
  bind(inf, "k", c.influence.k);
  bind(inf, "sampled_softmax", c.influence.sampled_softmax);
  bind(inf, "softmax_negatives", c.influence.softmax_negatives);
  c.influence.g2 = c.model.g2;

  const json& t = j.at("training");
  bind(t, "lambda", c.training.lambda);
  bind(t, "lr", c.training.lr);
  bind(t, "epochs", c.training.epochs);
  bind(t, "batch", c.training.batch);
  bind(t, "seed", c.training.seed);
  bind(t, "precision", c.training.precision);
  bind(t, "momentum", c.training.momentum);
  bind(t, "threads", c.training.threads);
  bind(t, "lr_step_factor", c.training.lr_step_factor);
  bind(t, "lr_step_epochs", c.training.lr_step_epochs);
  bind(t, "grad_check", c.training.grad_check);
  c.influence.seed = c.training.seed;

  const json& e = j.at("eval");
  bind(e, "max_test_negatives", c.eval.max_test_negatives);
  bind(e, "global_auc", c.eval.global_auc);
  bind(e, "threads", c.eval.threads);
  bind(e, "attention_per_user", c.eval.attention_per_user);

  return c;
}

void merge_checked(json& base, const json& overlay, const std::string& prefix) {
  for (const auto& [key, value] : overlay.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw config_error("unknown config key: " + path);
    if (value.is_object() && base[key].is_object()) {
      merge_checked(base[key], value, path);
    } else {
      base[key] = value;
    }
  }
}

}  // namespace

Config default_config() { return from_tree(to_tree(Config{})); }

Config load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  json overlay;
  try {
    in >> overlay;
  } catch (const json::exception& e) {
    throw config_error(path + ": " + e.what());
  }
  json tree = to_tree(Config{});
  merge_checked(tree, overlay, "");
  return from_tree(tree);
}

void apply_override(Config& cfg, const std::string& dotted_assignment) {
  const auto eq = dotted_assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw config_error("override must be key.path=value: " + dotted_assignment);
  }
  const std::string key = dotted_assignment.substr(0, eq);
  const std::string raw = dotted_assignment.substr(eq + 1);

  std::string pointer = "/";
  for (const char ch : key) pointer += ch == '.' ? '/' : ch;

  json tree = to_tree(cfg);
  const json::json_pointer jp(pointer);
  if (!tree.contains(jp)) throw config_error("unknown config key: " + key);
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;  // plain string
  tree[jp] = value;
  cfg = from_tree(tree);
}

void validate_config(const Config& cfg) {
  cfg.model.validate();
  if (cfg.corpus.window_days <= 0) throw config_error("corpus.window_days must be positive");
  if (cfg.corpus.unit_seconds <= 0) throw config_error("corpus.unit_seconds must be positive");
  if (cfg.corpus.min_history < 1) throw config_error("corpus.min_history must be >= 1");
  if (!(cfg.corpus.train_frac > 0.0 && cfg.corpus.train_frac < 1.0)) {
    throw config_error("corpus.train_frac must be in (0,1)");
  }
  if (!(cfg.corpus.valid_frac >= 0.0 && cfg.corpus.valid_frac < 1.0)) {
    throw config_error("corpus.valid_frac must be in [0,1)");
  }
  if (cfg.training.lambda < 1) throw config_error("training.lambda must be >= 1");
  if (cfg.training.lr <= 0.0) throw config_error("training.lr must be positive");
  if (cfg.training.batch < 1) throw config_error("training.batch must be >= 1");
  if (cfg.training.precision != 32 && cfg.training.precision != 64) {
    throw config_error("training.precision must be 32 or 64");
  }
  if (cfg.eval.max_test_negatives < 1) throw config_error("eval.max_test_negatives must be >= 1");
}

std::string config_to_json(const Config& cfg) { return to_tree(cfg).dump(2); }

}  // namespace igniter
