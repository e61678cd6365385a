#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "igniter/corpus.hpp"
#include "igniter/linalg.hpp"

namespace igniter {

/// Initiator (O) and reposter (T) embeddings learned from cascades, plus a
/// per-reposter bias. Rows of T/b are indexed by dense user id; rows of O by
/// influencer_index.
struct InfluenceModel {
  Mat<double> initiators;             // I x g2   (O)
  Mat<double> reposters;              // |V| x g2 (T)
  Vec<double> bias;                   // |V|      (b)
  std::vector<UserId> influencer_ids;  // O row -> user id
  std::unordered_map<UserId, int> influencer_index;

  int g2() const { return static_cast<int>(reposters.cols()); }
  int node_count() const { return static_cast<int>(reposters.rows()); }
  bool is_influencer(UserId u) const { return influencer_index.count(u) > 0; }

  static InfluenceModel zeros(const std::vector<UserId>& influencers, int node_count, int g2);
};

struct ContextPair {
  UserId initiator = -1;
  UserId reposter = -1;
  double weight = 0.0;  // sampling probability of this reposter
};

/// Closed-form reposter sampling distribution for one cascade: reposter j gets
/// weight proportional to 1/(t_j - t0 + 1s). Empty if the cascade has no
/// reposters.
std::vector<ContextPair> context_distribution(const Cascade& cascade);

/// Draws k reposters with replacement from context_distribution (inverse-CDF
/// on a seeded uniform stream).
std::vector<ContextPair> sample_context(const Cascade& cascade, int k, std::uint64_t seed);

/// Softmax over logits z_j = O_row(initiator) . T_j + b_j for every node j.
Vec<double> forward_scores(const InfluenceModel& model, UserId initiator);

struct InfluenceConfig {
  int g2 = 50;
  int epochs = 5;
  double lr = 0.05;
  int k = 10;  // context samples per cascade per epoch, capped at #reposters
  std::uint64_t seed = 42;
  // Approximate the softmax over a uniform negative sample instead of all of
  // V. Off by default: exact softmax is the reference behavior at desk scale.
  bool sampled_softmax = false;
  int softmax_negatives = 64;
};

struct InfluenceTrainLog {
  std::vector<double> epoch_loss;  // average cross-entropy per sampled pair
};

/// SGD on the cross-entropy of sampled (initiator, reposter) pairs.
InfluenceModel train_influence(const std::vector<Cascade>& cascades, int node_count,
                               const InfluenceConfig& cfg, InfluenceTrainLog* log = nullptr);

/// Dot product of reposter embedding rows.
double reposter_similarity(const InfluenceModel& model, UserId i, UserId j);

/// One cross-entropy step: loss -log softmax(z)[target] and its exact
/// gradients. Exposed so tests can compare against finite differences.
struct InfluenceStepGrads {
  Vec<double> d_initiator_row;  // g2
  Mat<double> d_reposters;      // |V| x g2
  Vec<double> d_bias;           // |V|
};
double influence_step(const InfluenceModel& model, UserId initiator, UserId target,
                      InfluenceStepGrads* grads);

void save_influence(const InfluenceModel& model, const std::string& path);
InfluenceModel load_influence(const std::string& path);

}  // namespace igniter
