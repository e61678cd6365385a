#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "igniter/cascade_view.hpp"
#include "igniter/corpus.hpp"
#include "igniter/influence.hpp"
#include "igniter/model.hpp"
#include "igniter/word_vectors.hpp"

namespace igniter {

/// One candidate news item, frozen at a moment in time: the state snapshot and
/// the personalized view of its diffusion sequence for the target user.
struct CandidateState {
  NewsState state;
  PersonalizedView view;
};

/// One positive adoption plus sampled negatives, with the user's encoded
/// history (the remaining adoptions of the window, each at its own adoption
/// time).
struct Impression {
  std::int32_t history_index = -1;  // pseudo-user
  UserId user = -1;
  Timestamp timestamp = 0;          // adoption time of the positive
  std::vector<CandidateState> history;
  CandidateState positive;
  std::vector<CandidateState> negatives;
};

struct ImpressionBuildStats {
  std::int64_t built = 0;
  std::int64_t skipped_small_pool = 0;    // fewer eligible negatives than needed
  std::int64_t skipped_empty_history = 0; // positive with no other adoptions
};

/// Builds impressions for a list of positives. Negatives are drawn uniformly
/// without replacement from news published inside the pseudo-user's window, no
/// later than the impression timestamp, and never adopted by the user. In
/// training mode exactly `negatives` are required (else the impression is
/// skipped); in test mode up to `negatives` are taken, at least one.
class ImpressionBuilder {
 public:
  ImpressionBuilder(const Corpus& corpus, const InfluenceModel& influence, const ModelDims& dims,
                    std::int64_t unit_seconds);

  std::vector<Impression> build(const std::vector<AdoptionRef>& positives, int negatives,
                                bool test_mode, std::uint64_t seed,
                                ImpressionBuildStats* stats = nullptr) const;

  CandidateState snapshot(NewsId news, Timestamp t, UserId target) const;

 private:
  const Corpus& corpus_;
  const InfluenceModel& influence_;
  ModelDims dims_;
  std::int64_t unit_seconds_;
  std::vector<std::uint8_t> is_influencer_;
  std::vector<std::int32_t> news_by_time_;  // news ids sorted by cascade start
  std::vector<Timestamp> start_times_;      // parallel to news_by_time_
};

// ---------------------------------------------------------------------------
// Forward / backward over one impression
// ---------------------------------------------------------------------------

template <class S>
S score(const Vec<S>& e_u, const Vec<S>& e_n);

/// Softmax probability of the first (positive) score, max-subtracted.
template <class S>
S impression_probability(const Vec<S>& scores);

/// Negative log-likelihood of the positives of a batch given per-impression
/// candidate scores (positive first).
template <class S>
S batch_loss(const std::vector<Vec<S>>& per_impression_scores);

template <class S>
struct ImpressionForward {
  std::vector<NewsForward<S>> history;
  std::vector<NewsForward<S>> candidates;  // positive first
  UserForward<S> user;
  Vec<S> scores;  // 1 + lambda, positive at index 0
  Vec<S> probs;
  S loss = S(0);
};

template <class S>
ImpressionForward<S> forward_impression(const Impression& imp, const ModelParams<S>& params,
                                        const EncodingTables<S>& tables);

/// Exact reverse-mode gradients of the impression loss; accumulates into
/// `grads` (a ModelParams of identical shapes).
template <class S>
void backward_impression(const Impression& imp, const ModelParams<S>& params,
                         const EncodingTables<S>& tables, const ImpressionForward<S>& fwd,
                         ModelParams<S>& grads);

/// Gradients keyed by tensor name, for inspection and tests.
template <class S>
std::vector<std::pair<std::string, Mat<S>>> gradients_by_name(const Impression& imp,
                                                              const ModelParams<S>& params,
                                                              const EncodingTables<S>& tables);

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

struct TrainConfig {
  int lambda = 4;
  double lr = 0.05;
  int epochs = 5;
  int batch = 16;
  std::uint64_t seed = 42;
  int precision = 32;        // 32 or 64
  double momentum = 0.0;
  int threads = 1;           // data-parallel gradients, deterministic reduction
  double lr_step_factor = 1.0;  // per lr_step_epochs epochs; 1.0 = constant lr
  int lr_step_epochs = 0;
  double divergence_factor = 10.0;
  bool grad_check = false;   // run a finite-difference probe on the first batch
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;  // mean per impression
  double valid_auc = 0.0;
};

template <class S>
struct TrainResult {
  ModelParams<S> params;      // best validation AUC
  std::vector<EpochLog> log;
  double grad_check_max_rel_error = -1.0;  // set when cfg.grad_check
};

/// Mini-batch SGD over the train split with per-epoch validation AUC; keeps
/// the best-validation parameters. Negatives are resampled every epoch.
template <class S>
TrainResult<S> train_model(const TrainConfig& cfg, const ModelDims& dims, const Corpus& corpus,
                           const DatasetSplit& split, const InfluenceModel& influence,
                           const WordEmbeddingTable& words, std::int64_t unit_seconds,
                           int max_test_negatives,
                           const std::function<void(const EpochLog&)>& on_epoch = nullptr);

/// Casts frozen tables to the working scalar type.
template <class S>
EncodingTables<S> make_tables(const WordEmbeddingTable& words, const InfluenceModel& influence);

}  // namespace igniter
