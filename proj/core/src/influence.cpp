#include "igniter/influence.hpp"

#include <algorithm>
#include <cmath>

#include "igniter/checkpoint.hpp"
#include "igniter/rng.hpp"

namespace igniter {

namespace {

// The inverse-elapsed-time weight is singular when a repost lands on the
// initiation second; one second is added to the elapsed time.
constexpr double kElapsedEpsilonSeconds = 1.0;

}  // namespace

InfluenceModel InfluenceModel::zeros(const std::vector<UserId>& influencers, int node_count,
                                     int g2) {
  InfluenceModel m;
  m.initiators = Mat<double>::Zero(static_cast<Eigen::Index>(influencers.size()), g2);
  m.reposters = Mat<double>::Zero(node_count, g2);
  m.bias = Vec<double>::Zero(node_count);
  m.influencer_ids = influencers;
  for (std::size_t i = 0; i < influencers.size(); ++i) {
    m.influencer_index.emplace(influencers[i], static_cast<int>(i));
  }
  return m;
}

std::vector<ContextPair> context_distribution(const Cascade& cascade) {
  std::vector<ContextPair> pairs;
  if (cascade.events.size() < 2) return pairs;
  const UserId initiator = cascade.initiator();
  const Timestamp t0 = cascade.start_time();
  pairs.reserve(cascade.events.size() - 1);
  double total = 0.0;
  for (std::size_t i = 1; i < cascade.events.size(); ++i) {
    const auto& [user, t] = cascade.events[i];
    const double w = 1.0 / (static_cast<double>(t - t0) + kElapsedEpsilonSeconds);
    pairs.push_back(ContextPair{initiator, user, w});
    total += w;
  }
  for (auto& p : pairs) p.weight /= total;
  return pairs;
}

std::vector<ContextPair> sample_context(const Cascade& cascade, int k, std::uint64_t seed) {
  const auto dist = context_distribution(cascade);
  std::vector<ContextPair> out;
  if (dist.empty() || k < 1) return out;
  std::vector<double> cdf(dist.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    acc += dist[i].weight;
    cdf[i] = acc;
  }
  cdf.back() = 1.0;
  Rng rng(seed);
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const double u = rng.uniform01();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const std::size_t idx = std::min(static_cast<std::size_t>(it - cdf.begin()), dist.size() - 1);
    out.push_back(dist[idx]);
  }
  return out;
}

Vec<double> forward_scores(const InfluenceModel& model, UserId initiator) {
  const auto it = model.influencer_index.find(initiator);
  if (it == model.influencer_index.end()) {
    throw error("user " + std::to_string(initiator) + " is not a known influencer");
  }
  Vec<double> logits = model.reposters * model.initiators.row(it->second).transpose() + model.bias;
  softmax_inplace(logits);
  return logits;
}

double influence_step(const InfluenceModel& model, UserId initiator, UserId target,
                      InfluenceStepGrads* grads) {
  const auto it = model.influencer_index.find(initiator);
  if (it == model.influencer_index.end()) {
    throw error("user " + std::to_string(initiator) + " is not a known influencer");
  }
  const Vec<double> o_row = model.initiators.row(it->second).transpose();
  Vec<double> logits = model.reposters * o_row + model.bias;
  const double lse = log_sum_exp(logits);
  const double loss = lse - logits[target];
  if (grads != nullptr) {
    Vec<double> p = (logits.array() - lse).exp();  // softmax
    p[target] -= 1.0;
    grads->d_initiator_row = model.reposters.transpose() * p;
    grads->d_reposters = p * o_row.transpose();
    grads->d_bias = std::move(p);
  }
  return loss;
}

double reposter_similarity(const InfluenceModel& model, UserId i, UserId j) {
  return model.reposters.row(i).dot(model.reposters.row(j));
}

InfluenceModel train_influence(const std::vector<Cascade>& cascades, int node_count,
                               const InfluenceConfig& cfg, InfluenceTrainLog* log) {
  if (cfg.g2 <= 0) throw config_error("g2 must be positive");
  std::vector<UserId> influencers;
  {
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(node_count), 0);
    for (const auto& c : cascades) {
      if (!c.events.empty()) seen[static_cast<std::size_t>(c.initiator())] = 1;
    }
    for (int u = 0; u < node_count; ++u) {
      if (seen[static_cast<std::size_t>(u)]) influencers.push_back(u);
    }
  }
  bool has_reposter = false;
  for (const auto& c : cascades) has_reposter |= c.events.size() >= 2;
  if (influencers.empty() || !has_reposter) {
    throw error("influence training needs at least one cascade with a reposter");
  }

  InfluenceModel model = InfluenceModel::zeros(influencers, node_count, cfg.g2);
  {
    Rng rng(derive_seed(cfg.seed, 0x1f1u));
    const double r = 0.5 / static_cast<double>(cfg.g2);
    for (Eigen::Index i = 0; i < model.initiators.rows(); ++i) {
      for (Eigen::Index j = 0; j < model.initiators.cols(); ++j) {
        model.initiators(i, j) = rng.uniform(-r, r);
      }
    }
    for (Eigen::Index i = 0; i < model.reposters.rows(); ++i) {
      for (Eigen::Index j = 0; j < model.reposters.cols(); ++j) {
        model.reposters(i, j) = rng.uniform(-r, r);
      }
    }
  }

  Vec<double> logits(node_count);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::int64_t steps = 0;
    for (std::size_t ci = 0; ci < cascades.size(); ++ci) {
      const auto& cascade = cascades[ci];
      if (cascade.events.size() < 2) continue;
      const int reposters = static_cast<int>(cascade.events.size()) - 1;
      const int k = std::min(cfg.k, reposters);
      const std::uint64_t cascade_seed =
          derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), ci);
      const auto pairs = sample_context(cascade, k, cascade_seed);
      const int o_row = model.influencer_index.at(cascade.initiator());
      Rng neg_rng(derive_seed(cascade_seed, 0x5e6u));
      for (const auto& pair : pairs) {
        const Vec<double> o_vec = model.initiators.row(o_row).transpose();
        double loss;
        if (cfg.sampled_softmax) {
          // Softmax restricted to the target plus uniform negatives.
          std::vector<int> subset{pair.reposter};
          for (int s = 0; s < cfg.softmax_negatives; ++s) {
            const int j = static_cast<int>(neg_rng.index(static_cast<std::size_t>(node_count)));
            if (j != pair.reposter) subset.push_back(j);
          }
          Vec<double> z(static_cast<Eigen::Index>(subset.size()));
          for (std::size_t i = 0; i < subset.size(); ++i) {
            z[static_cast<Eigen::Index>(i)] =
                model.reposters.row(subset[i]).dot(o_vec) + model.bias[subset[i]];
          }
          const double lse = log_sum_exp(z);
          loss = lse - z[0];
          Vec<double> p = (z.array() - lse).exp();
          p[0] -= 1.0;
          Vec<double> d_o = Vec<double>::Zero(cfg.g2);
          for (std::size_t i = 0; i < subset.size(); ++i) {
            const double pi = p[static_cast<Eigen::Index>(i)];
            d_o.noalias() += pi * model.reposters.row(subset[i]).transpose();
            model.reposters.row(subset[i]).noalias() -= cfg.lr * pi * o_vec.transpose();
            model.bias[subset[i]] -= cfg.lr * pi;
          }
          model.initiators.row(o_row).noalias() -= cfg.lr * d_o.transpose();
        } else {
          logits.noalias() = model.reposters * o_vec + model.bias;
          const double lse = log_sum_exp(logits);
          loss = lse - logits[pair.reposter];
          Vec<double> p = (logits.array() - lse).exp();
          p[pair.reposter] -= 1.0;
          model.initiators.row(o_row).noalias() -=
              cfg.lr * (model.reposters.transpose() * p).transpose();
          model.reposters.noalias() -= cfg.lr * (p * o_vec.transpose());
          model.bias.noalias() -= cfg.lr * p;
        }
        if (!std::isfinite(loss)) {
          throw numeric_error("influence training diverged (non-finite loss; lower lr=" +
                              std::to_string(cfg.lr) + ")");
        }
        loss_sum += loss;
        ++steps;
      }
    }
    if (log != nullptr) {
      log->epoch_loss.push_back(steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0);
    }
  }
  return model;
}

void save_influence(const InfluenceModel& model, const std::string& path) {
  std::vector<std::int64_t> ids(model.influencer_ids.begin(), model.influencer_ids.end());
  std::vector<ArchiveTensor> tensors;
  tensors.push_back(pack_matrix<double>("influence.initiators", model.initiators, Dtype::f32));
  tensors.push_back(pack_matrix<double>("influence.reposters", model.reposters, Dtype::f32));
  tensors.push_back(pack_vector<double>("influence.bias", model.bias, Dtype::f32));
  tensors.push_back(pack_i64("influence.influencer_ids", ids));
  write_archive(path, tensors);
}

InfluenceModel load_influence(const std::string& path) {
  const auto tensors = read_archive(path);
  const ArchiveTensor* o = nullptr;
  const ArchiveTensor* t = nullptr;
  const ArchiveTensor* b = nullptr;
  const ArchiveTensor* ids = nullptr;
  for (const auto& tensor : tensors) {
    if (tensor.name == "influence.initiators") o = &tensor;
    if (tensor.name == "influence.reposters") t = &tensor;
    if (tensor.name == "influence.bias") b = &tensor;
    if (tensor.name == "influence.influencer_ids") ids = &tensor;
  }
  if (!o || !t || !b || !ids) throw parse_error(path + ": missing influence tensors");
  InfluenceModel model;
  model.initiators.resize(o->shape[0], o->shape[1]);
  unpack_matrix(*o, model.initiators);
  model.reposters.resize(t->shape[0], t->shape[1]);
  unpack_matrix(*t, model.reposters);
  model.bias.resize(b->shape[0]);
  unpack_vector(*b, model.bias);
  for (const auto id : unpack_i64(*ids)) {
    model.influencer_index.emplace(static_cast<UserId>(id),
                                   static_cast<int>(model.influencer_ids.size()));
    model.influencer_ids.push_back(static_cast<UserId>(id));
  }
  if (model.initiators.rows() != static_cast<Eigen::Index>(model.influencer_ids.size()) ||
      model.reposters.rows() != model.bias.size()) {
    throw parse_error(path + ": inconsistent influence tensor shapes");
  }
  return model;
}

}  // namespace igniter
