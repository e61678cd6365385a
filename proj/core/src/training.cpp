#include "igniter/training.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <thread>

#include "igniter/eval.hpp"
#include "igniter/rng.hpp"
#include "igniter/word_vectors.hpp"

namespace igniter {

// ---------------------------------------------------------------------------
// ImpressionBuilder
// ---------------------------------------------------------------------------

ImpressionBuilder::ImpressionBuilder(const Corpus& corpus, const InfluenceModel& influence,
                                     const ModelDims& dims, std::int64_t unit_seconds)
    : corpus_(corpus), influence_(influence), dims_(dims), unit_seconds_(unit_seconds) {
  is_influencer_ = influencer_mask(influence);
  for (std::size_t n = 0; n < corpus.news.size(); ++n) {
    if (corpus.cascade_of_news[n] >= 0) {
      news_by_time_.push_back(static_cast<std::int32_t>(n));
    }
  }
  std::sort(news_by_time_.begin(), news_by_time_.end(), [&corpus](std::int32_t a, std::int32_t b) {
    const Timestamp ta = corpus.cascade_for(a)->start_time();
    const Timestamp tb = corpus.cascade_for(b)->start_time();
    return ta != tb ? ta < tb : a < b;
  });
  start_times_.reserve(news_by_time_.size());
  for (const auto n : news_by_time_) start_times_.push_back(corpus.cascade_for(n)->start_time());
}

CandidateState ImpressionBuilder::snapshot(NewsId news, Timestamp t, UserId target) const {
  const Cascade* cascade = corpus_.cascade_for(news);
  if (cascade == nullptr) throw error("news " + std::to_string(news) + " has no cascade");
  CandidateState c;
  c.state = snapshot_news_state(corpus_.news[static_cast<std::size_t>(news)], *cascade, t, target,
                                unit_seconds_, dims_.d_max);
  c.view = select_local_influence(c.state.diffusion, corpus_.graph, influence_, is_influencer_,
                                  target, dims_.m);
  return c;
}

std::vector<Impression> ImpressionBuilder::build(const std::vector<AdoptionRef>& positives,
                                                 int negatives, bool test_mode, std::uint64_t seed,
                                                 ImpressionBuildStats* stats) const {
  // Adoption sets per user, for negative filtering.
  std::vector<std::vector<NewsId>> adopted(static_cast<std::size_t>(corpus_.graph.node_count));
  for (const auto& c : corpus_.cascades) {
    for (const auto& [u, t] : c.events) adopted[static_cast<std::size_t>(u)].push_back(c.news_id);
  }
  for (auto& v : adopted) std::sort(v.begin(), v.end());

  std::vector<Impression> out;
  out.reserve(positives.size());
  for (std::size_t pi = 0; pi < positives.size(); ++pi) {
    const AdoptionRef& ref = positives[pi];
    const UserHistory& hist = corpus_.histories[static_cast<std::size_t>(ref.history_idx)];
    const Adoption& pos = hist.adoptions[static_cast<std::size_t>(ref.adoption_idx)];
    const UserId user = hist.user_id;

    if (hist.adoptions.size() < 2) {
      if (stats) ++stats->skipped_empty_history;
      continue;
    }

    // Eligible negatives: cascade start inside the window and at most the
    // impression time, not adopted by this user.
    const Timestamp hi = std::min(hist.window_end - 1, pos.t);
    const auto lo_it = std::lower_bound(start_times_.begin(), start_times_.end(), hist.window_start);
    const auto hi_it = std::upper_bound(start_times_.begin(), start_times_.end(), hi);
    std::vector<NewsId> eligible;
    const auto& user_adopted = adopted[static_cast<std::size_t>(user)];
    for (auto it = lo_it; it != hi_it; ++it) {
      const NewsId n = news_by_time_[static_cast<std::size_t>(it - start_times_.begin())];
      if (!std::binary_search(user_adopted.begin(), user_adopted.end(), n)) eligible.push_back(n);
    }

    int take = negatives;
    if (test_mode) {
      take = std::min<int>(negatives, static_cast<int>(eligible.size()));
      if (take < 1) {
        if (stats) ++stats->skipped_small_pool;
        continue;
      }
    } else if (static_cast<int>(eligible.size()) < negatives) {
      if (stats) ++stats->skipped_small_pool;
      continue;
    }

    Impression imp;
    imp.history_index = ref.history_idx;
    imp.user = user;
    imp.timestamp = pos.t;
    imp.positive = snapshot(pos.news, pos.t, user);
    Rng rng(derive_seed(seed, pi));
    for (const std::size_t idx : rng.sample_without_replacement(eligible.size(),
                                                                static_cast<std::size_t>(take))) {
      imp.negatives.push_back(snapshot(eligible[idx], pos.t, user));
    }
    for (std::size_t a = 0; a < hist.adoptions.size(); ++a) {
      if (static_cast<std::int32_t>(a) == ref.adoption_idx) continue;
      const Adoption& item = hist.adoptions[a];
      imp.history.push_back(snapshot(item.news, item.t, user));
    }
    if (stats) ++stats->built;
    out.push_back(std::move(imp));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

template <class S>
S score(const Vec<S>& e_u, const Vec<S>& e_n) {
  if (e_u.size() != e_n.size()) {
    throw error("score dimension mismatch: " + std::to_string(e_u.size()) + " vs " +
                std::to_string(e_n.size()));
  }
  return e_u.dot(e_n);
}

template <class S>
S impression_probability(const Vec<S>& scores) {
  const S m = scores.maxCoeff();
  const Vec<S> shifted = (scores.array() - m).exp().matrix();
  return shifted[0] / shifted.sum();
}

template <class S>
S batch_loss(const std::vector<Vec<S>>& per_impression_scores) {
  S loss = S(0);
  for (const auto& scores : per_impression_scores) {
    loss += log_sum_exp(scores) - scores[0];
  }
  return loss;
}

template <class S>
ImpressionForward<S> forward_impression(const Impression& imp, const ModelParams<S>& params,
                                        const EncodingTables<S>& tables) {
  ImpressionForward<S> fwd;
  const int s = static_cast<int>(imp.history.size());
  Mat<S> history(params.dims.g, s);
  fwd.history.reserve(imp.history.size());
  for (int j = 0; j < s; ++j) {
    fwd.history.push_back(encode_news(imp.history[static_cast<std::size_t>(j)].state,
                                      imp.history[static_cast<std::size_t>(j)].view, tables,
                                      params.news, params.dims));
    history.col(j) = fwd.history.back().out.e_n;
  }
  fwd.user = encode_user(params.user, history, s);

  const int n_cand = 1 + static_cast<int>(imp.negatives.size());
  fwd.scores.resize(n_cand);
  fwd.candidates.reserve(static_cast<std::size_t>(n_cand));
  fwd.candidates.push_back(encode_news(imp.positive.state, imp.positive.view, tables, params.news,
                                       params.dims));
  fwd.scores[0] = score(fwd.user.out.e_u, fwd.candidates[0].out.e_n);
  for (int c = 1; c < n_cand; ++c) {
    fwd.candidates.push_back(encode_news(imp.negatives[static_cast<std::size_t>(c - 1)].state,
                                         imp.negatives[static_cast<std::size_t>(c - 1)].view,
                                         tables, params.news, params.dims));
    fwd.scores[c] = score(fwd.user.out.e_u, fwd.candidates.back().out.e_n);
  }
  const S lse = log_sum_exp(fwd.scores);
  fwd.probs = (fwd.scores.array() - lse).exp().matrix();
  fwd.loss = lse - fwd.scores[0];
  return fwd;
}

template <class S>
void backward_impression(const Impression& imp, const ModelParams<S>& params,
                         const EncodingTables<S>& tables, const ImpressionForward<S>& fwd,
                         ModelParams<S>& grads) {
  (void)imp;
  (void)tables;
  Vec<S> d_scores = fwd.probs;
  d_scores[0] -= S(1);

  Vec<S> d_e_u = Vec<S>::Zero(params.dims.g);
  for (Eigen::Index c = 0; c < d_scores.size(); ++c) {
    d_e_u.noalias() += d_scores[c] * fwd.candidates[static_cast<std::size_t>(c)].out.e_n;
    const Vec<S> d_cand = d_scores[c] * fwd.user.out.e_u;
    news_backward(params.news, fwd.candidates[static_cast<std::size_t>(c)], d_cand, grads.news);
  }

  const Mat<S> d_history = user_backward(params.user, fwd.user, d_e_u, grads.user);
  for (std::size_t j = 0; j < fwd.history.size(); ++j) {
    const Vec<S> d_item = d_history.col(static_cast<Eigen::Index>(j));
    news_backward(params.news, fwd.history[j], d_item, grads.news);
  }
}

template <class S>
std::vector<std::pair<std::string, Mat<S>>> gradients_by_name(const Impression& imp,
                                                              const ModelParams<S>& params,
                                                              const EncodingTables<S>& tables) {
  ModelParams<S> grads = ModelParams<S>::sized(params.dims);
  const auto fwd = forward_impression(imp, params, tables);
  backward_impression(imp, params, tables, fwd, grads);
  std::vector<std::pair<std::string, Mat<S>>> out;
  visit_tensors(grads, [&out](const std::string& name, const auto& t) {
    out.emplace_back(name, Mat<S>(t));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

template <class S>
EncodingTables<S> make_tables(const WordEmbeddingTable& words, const InfluenceModel& influence) {
  EncodingTables<S> t;
  t.words = words.vectors.template cast<S>();
  t.nodes = influence.reposters.template cast<S>();
  return t;
}

namespace {

template <class S>
void sgd_step(ModelParams<S>& params, ModelParams<S>& grads, ModelParams<S>* velocity, double lr,
              double momentum, int batch_n) {
  const S scale = static_cast<S>(1.0 / static_cast<double>(batch_n));
  auto pv = tensor_views(params);
  auto gv = tensor_views(grads);
  if (velocity == nullptr) {
    for (std::size_t t = 0; t < pv.size(); ++t) {
      for (Eigen::Index i = 0; i < pv[t].size; ++i) {
        pv[t].data[i] -= static_cast<S>(lr) * scale * gv[t].data[i];
      }
    }
    return;
  }
  auto vv = tensor_views(*velocity);
  for (std::size_t t = 0; t < pv.size(); ++t) {
    for (Eigen::Index i = 0; i < pv[t].size; ++i) {
      vv[t].data[i] = static_cast<S>(momentum) * vv[t].data[i] + scale * gv[t].data[i];
      pv[t].data[i] -= static_cast<S>(lr) * vv[t].data[i];
    }
  }
}

template <class S>
void check_finite_grads(ModelParams<S>& grads) {
  std::string bad;
  visit_tensors(grads, [&bad](const std::string& name, const auto& t) {
    if (bad.empty() && !t.allFinite()) bad = name;
  });
  if (!bad.empty()) throw numeric_error("non-finite gradient in tensor " + bad);
}

/// Finite-difference probe over a few elements of every tensor; returns the
/// maximum relative error observed.
template <class S>
double grad_check_probe(ModelParams<S>& params, const EncodingTables<S>& tables,
                        const std::vector<const Impression*>& batch) {
  ModelParams<S> grads = ModelParams<S>::sized(params.dims);
  for (const auto* imp : batch) {
    const auto fwd = forward_impression(*imp, params, tables);
    backward_impression(*imp, params, tables, fwd, grads);
  }
  const auto loss_fn = [&]() {
    double loss = 0.0;
    for (const auto* imp : batch) {
      loss += static_cast<double>(forward_impression(*imp, params, tables).loss);
    }
    return loss;
  };
  const double h = params.dims.g >= 32 ? 1e-3 : 1e-4;
  double max_rel = 0.0;
  auto pv = tensor_views(params);
  auto gv = tensor_views(grads);
  for (std::size_t t = 0; t < pv.size(); ++t) {
    if (pv[t].size == 0) continue;
    const Eigen::Index probes[2] = {0, pv[t].size / 2};
    for (const Eigen::Index i : probes) {
      const S saved = pv[t].data[i];
      pv[t].data[i] = saved + static_cast<S>(h);
      const double up = loss_fn();
      pv[t].data[i] = saved - static_cast<S>(h);
      const double down = loss_fn();
      pv[t].data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = static_cast<double>(gv[t].data[i]);
      const double rel =
          std::abs(analytic - numeric) / std::max(1e-6, std::abs(analytic) + std::abs(numeric));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

double validation_auc_of_scores(const std::vector<std::vector<double>>& score_sets) {
  if (score_sets.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : score_sets) sum += auc_impression(s, 0);
  return sum / static_cast<double>(score_sets.size());
}

}  // namespace

template <class S>
TrainResult<S> train_model(const TrainConfig& cfg, const ModelDims& dims, const Corpus& corpus,
                           const DatasetSplit& split, const InfluenceModel& influence,
                           const WordEmbeddingTable& words, std::int64_t unit_seconds,
                           int max_test_negatives,
                           const std::function<void(const EpochLog&)>& on_epoch) {
  dims.validate();
  if (cfg.lambda < 1) throw config_error("lambda must be >= 1");
  if (cfg.lr <= 0) throw config_error("lr must be positive");

  const EncodingTables<S> tables = make_tables<S>(words, influence);
  const ImpressionBuilder builder(corpus, influence, dims, unit_seconds);

  TrainResult<S> result;
  result.params = init_model<S>(dims, cfg.seed);
  ModelParams<S> grads = ModelParams<S>::sized(dims);
  std::optional<ModelParams<S>> velocity;
  if (cfg.momentum > 0.0) velocity = ModelParams<S>::sized(dims);

  const auto valid_impressions =
      builder.build(split.validation, max_test_negatives, /*test_mode=*/true,
                    derive_seed(cfg.seed, 0xa11du));

  ModelParams<S> best = result.params;
  double best_auc = -1.0;
  double initial_loss = -1.0;

  const int threads = std::max(1, cfg.threads);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto impressions = builder.build(split.train, cfg.lambda, /*test_mode=*/false,
                                     derive_seed(cfg.seed, 0x7e9u, static_cast<std::uint64_t>(epoch)));
    if (impressions.empty()) throw error("no trainable impressions in the train split");

    std::vector<std::size_t> order(impressions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5f1eu, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double lr = cfg.lr;
    if (cfg.lr_step_epochs > 0) {
      lr *= std::pow(cfg.lr_step_factor, epoch / cfg.lr_step_epochs);
    }

    double epoch_loss = 0.0;
    std::size_t cursor = 0;
    bool first_batch = epoch == 0;
    while (cursor < order.size()) {
      const std::size_t batch_n = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch),
                                                        order.size() - cursor);
      std::vector<const Impression*> batch(batch_n);
      for (std::size_t i = 0; i < batch_n; ++i) batch[i] = &impressions[order[cursor + i]];
      cursor += batch_n;

      set_zero(grads);
      double batch_loss_sum = 0.0;
      if (threads == 1 || batch_n == 1) {
        for (const auto* imp : batch) {
          const auto fwd = forward_impression(*imp, result.params, tables);
          batch_loss_sum += static_cast<double>(fwd.loss);
          backward_impression(*imp, result.params, tables, fwd, grads);
        }
      } else {
        // Contiguous shards; each worker owns a gradient accumulator, reduced
        // in shard order so results do not depend on scheduling.
        const int n_workers = std::min<int>(threads, static_cast<int>(batch_n));
        std::vector<ModelParams<S>> shard_grads;
        std::vector<double> shard_loss(static_cast<std::size_t>(n_workers), 0.0);
        shard_grads.reserve(static_cast<std::size_t>(n_workers));
        for (int w = 0; w < n_workers; ++w) shard_grads.push_back(ModelParams<S>::sized(dims));
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) {
          pool.emplace_back([&, w]() {
            for (std::size_t i = static_cast<std::size_t>(w); i < batch_n;
                 i += static_cast<std::size_t>(n_workers)) {
              const auto fwd = forward_impression(*batch[i], result.params, tables);
              shard_loss[static_cast<std::size_t>(w)] += static_cast<double>(fwd.loss);
              backward_impression(*batch[i], result.params, tables, fwd,
                                  shard_grads[static_cast<std::size_t>(w)]);
            }
          });
        }
        for (auto& th : pool) th.join();
        for (int w = 0; w < n_workers; ++w) {
          batch_loss_sum += shard_loss[static_cast<std::size_t>(w)];
          auto dst = tensor_views(grads);
          auto src = tensor_views(shard_grads[static_cast<std::size_t>(w)]);
          for (std::size_t t = 0; t < dst.size(); ++t) {
            for (Eigen::Index i = 0; i < dst[t].size; ++i) dst[t].data[i] += src[t].data[i];
          }
        }
      }

      if (!std::isfinite(batch_loss_sum)) {
        throw numeric_error("training diverged: non-finite batch loss");
      }
      const double batch_mean = batch_loss_sum / static_cast<double>(batch_n);
      if (initial_loss < 0.0) initial_loss = std::max(batch_mean, 1e-12);
      if (batch_mean > cfg.divergence_factor * initial_loss) {
        throw numeric_error("training diverged: batch loss " + std::to_string(batch_mean) +
                            " exceeds " + std::to_string(cfg.divergence_factor) + "x initial " +
                            std::to_string(initial_loss));
      }
      check_finite_grads(grads);

      if (first_batch && cfg.grad_check) {
        result.grad_check_max_rel_error = grad_check_probe(
            result.params, tables,
            std::vector<const Impression*>(batch.begin(),
                                           batch.begin() + std::min<std::size_t>(2, batch_n)));
      }
      first_batch = false;

      epoch_loss += batch_loss_sum;
      sgd_step(result.params, grads, velocity ? &*velocity : nullptr, lr, cfg.momentum,
               static_cast<int>(batch_n));
    }

    // Validation AUC with frozen parameters.
    std::vector<std::vector<double>> valid_scores(valid_impressions.size());
    for (std::size_t i = 0; i < valid_impressions.size(); ++i) {
      const auto fwd = forward_impression(valid_impressions[i], result.params, tables);
      valid_scores[i].resize(static_cast<std::size_t>(fwd.scores.size()));
      for (Eigen::Index c = 0; c < fwd.scores.size(); ++c) {
        valid_scores[i][static_cast<std::size_t>(c)] = static_cast<double>(fwd.scores[c]);
      }
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss / static_cast<double>(impressions.size());
    log.valid_auc = validation_auc_of_scores(valid_scores);
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);

    if (log.valid_auc >= best_auc) {
      best_auc = log.valid_auc;
      best = result.params;
    }
  }

  result.params = std::move(best);
  return result;
}

// Explicit instantiations.
template float score(const Vec<float>&, const Vec<float>&);
template double score(const Vec<double>&, const Vec<double>&);
template float impression_probability(const Vec<float>&);
template double impression_probability(const Vec<double>&);
template float batch_loss(const std::vector<Vec<float>>&);
template double batch_loss(const std::vector<Vec<double>>&);
template ImpressionForward<float> forward_impression(const Impression&, const ModelParams<float>&,
                                                     const EncodingTables<float>&);
template ImpressionForward<double> forward_impression(const Impression&,
                                                      const ModelParams<double>&,
                                                      const EncodingTables<double>&);
template void backward_impression(const Impression&, const ModelParams<float>&,
                                  const EncodingTables<float>&, const ImpressionForward<float>&,
                                  ModelParams<float>&);
template void backward_impression(const Impression&, const ModelParams<double>&,
                                  const EncodingTables<double>&, const ImpressionForward<double>&,
                                  ModelParams<double>&);
template std::vector<std::pair<std::string, Mat<float>>> gradients_by_name(
    const Impression&, const ModelParams<float>&, const EncodingTables<float>&);
template std::vector<std::pair<std::string, Mat<double>>> gradients_by_name(
    const Impression&, const ModelParams<double>&, const EncodingTables<double>&);
template EncodingTables<float> make_tables(const WordEmbeddingTable&, const InfluenceModel&);
template EncodingTables<double> make_tables(const WordEmbeddingTable&, const InfluenceModel&);
template TrainResult<float> train_model(const TrainConfig&, const ModelDims&, const Corpus&,
                                        const DatasetSplit&, const InfluenceModel&,
                                        const WordEmbeddingTable&, std::int64_t, int,
                                        const std::function<void(const EpochLog&)>&);
template TrainResult<double> train_model(const TrainConfig&, const ModelDims&, const Corpus&,
                                         const DatasetSplit&, const InfluenceModel&,
                                         const WordEmbeddingTable&, std::int64_t, int,
                                         const std::function<void(const EpochLog&)>&);

}  // namespace igniter
