#include "igniter/eval.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

namespace igniter {

int rank_of_positive(const std::vector<double>& scores, int positive_index) {
  const double pos = scores[static_cast<std::size_t>(positive_index)];
  int rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (static_cast<int>(i) == positive_index) continue;
    if (scores[i] >= pos) ++rank;
  }
  return rank;
}

double auc_impression(const std::vector<double>& scores, int positive_index) {
  if (scores.size() < 2) throw error("AUC needs at least one negative");
  const double pos = scores[static_cast<std::size_t>(positive_index)];
  double wins = 0.0;
  int negatives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (static_cast<int>(i) == positive_index) continue;
    ++negatives;
    if (pos > scores[i]) {
      wins += 1.0;
    } else if (pos == scores[i]) {
      wins += 0.5;
    }
  }
  return wins / static_cast<double>(negatives);
}

double mrr_from_rank(int rank) { return 1.0 / static_cast<double>(rank); }

double ndcg_at_k(int rank, int k) {
  if (rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

namespace {

void accumulate(GroupMetrics& g, const std::vector<double>& scores) {
  const int rank = rank_of_positive(scores, 0);
  g.auc += auc_impression(scores, 0);
  g.mrr += mrr_from_rank(rank);
  g.ndcg5 += ndcg_at_k(rank, 5);
  g.ndcg10 += ndcg_at_k(rank, 10);
  ++g.impressions;
}

void finalize(GroupMetrics& g) {
  if (g.impressions == 0) return;
  const double n = static_cast<double>(g.impressions);
  g.auc /= n;
  g.mrr /= n;
  g.ndcg5 /= n;
  g.ndcg10 /= n;
}

/// Pooled AUC over all candidates of all impressions (rank-sum with ties).
double pooled_auc(const std::vector<ScoredImpression>& scored) {
  std::vector<std::pair<double, int>> labeled;  // (score, is_positive)
  for (const auto& s : scored) {
    for (std::size_t i = 0; i < s.scores.size(); ++i) {
      labeled.emplace_back(s.scores[i], i == 0 ? 1 : 0);
    }
  }
  std::sort(labeled.begin(), labeled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  // Average ranks across ties.
  const std::size_t n = labeled.size();
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && labeled[j + 1].first == labeled[i].first) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[t] = avg;
    i = j + 1;
  }
  double rank_sum = 0.0;
  std::int64_t n_pos = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (labeled[t].second) {
      rank_sum += rank[t];
      ++n_pos;
    }
  }
  const std::int64_t n_neg = static_cast<std::int64_t>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) return 0.0;
  const double u = rank_sum - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace

MetricReport aggregate_metrics(const std::vector<ScoredImpression>& scored, bool global_auc) {
  if (scored.empty()) throw error("aggregate_metrics: empty impression set");
  MetricReport report;
  static constexpr int kThresholds[4] = {5, 10, 15, 20};
  for (const int th : kThresholds) report.groups[">" + std::to_string(th)] = GroupMetrics{};
  for (const auto& s : scored) {
    accumulate(report.overall, s.scores);
    for (const int th : kThresholds) {
      if (s.user_total_adoptions > th) {
        accumulate(report.groups[">" + std::to_string(th)], s.scores);
      }
    }
  }
  finalize(report.overall);
  for (auto& [key, g] : report.groups) finalize(g);
  if (global_auc) {
    report.has_global_auc = true;
    report.global_auc = pooled_auc(scored);
  }
  return report;
}

template <class S>
MetricReport evaluate(const ModelParams<S>& params, const EncodingTables<S>& tables,
                      const std::vector<Impression>& impressions, const Corpus& corpus,
                      const EvalOptions& options) {
  if (impressions.empty()) throw error("evaluate: empty impression set");

  std::vector<ScoredImpression> scored(impressions.size());
  const int threads = std::max(1, options.threads);
  const auto score_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto fwd = forward_impression(impressions[i], params, tables);
      auto& s = scored[i];
      s.scores.resize(static_cast<std::size_t>(fwd.scores.size()));
      for (Eigen::Index c = 0; c < fwd.scores.size(); ++c) {
        s.scores[static_cast<std::size_t>(c)] = static_cast<double>(fwd.scores[c]);
      }
      s.user_total_adoptions =
          corpus.source_adoption_count[static_cast<std::size_t>(impressions[i].user)];
    }
  };
  if (threads == 1) {
    score_range(0, impressions.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (impressions.size() + static_cast<std::size_t>(threads) - 1) /
                              static_cast<std::size_t>(threads);
    for (int w = 0; w < threads; ++w) {
      const std::size_t lo = static_cast<std::size_t>(w) * chunk;
      const std::size_t hi = std::min(impressions.size(), lo + chunk);
      if (lo < hi) pool.emplace_back(score_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }

  return aggregate_metrics(scored, options.global_auc);
}

std::string metric_report_json(const MetricReport& report) {
  nlohmann::json j;
  const auto group_json = [](const GroupMetrics& g) {
    return nlohmann::json{{"auc", g.auc},
                          {"mrr", g.mrr},
                          {"ndcg5", g.ndcg5},
                          {"ndcg10", g.ndcg10},
                          {"impressions", g.impressions}};
  };
  j["overall"] = group_json(report.overall);
  nlohmann::json groups;
  for (const auto& [key, g] : report.groups) groups[key] = group_json(g);
  j["groups"] = std::move(groups);
  if (report.has_global_auc) j["global_auc"] = report.global_auc;
  return j.dump(2);
}

template <class S>
void dump_attention(const ModelParams<S>& params, const EncodingTables<S>& tables,
                    const std::vector<Impression>& impressions, std::ostream& out, int per_user) {
  std::map<UserId, int> emitted;
  for (const auto& imp : impressions) {
    auto& count = emitted[imp.user];
    if (count >= per_user) continue;
    ++count;
    const auto fwd = encode_news(imp.positive.state, imp.positive.view, tables, params.news,
                                 params.dims);
    nlohmann::json row;
    row["user"] = imp.user;
    row["news"] = imp.positive.state.news_id;
    std::vector<double> vw(3);
    for (int x = 0; x < 3; ++x) vw[static_cast<std::size_t>(x)] = static_cast<double>(fwd.out.view_weights[x]);
    std::vector<double> nw(static_cast<std::size_t>(fwd.out.node_weights.size()));
    for (Eigen::Index i = 0; i < fwd.out.node_weights.size(); ++i) {
      nw[static_cast<std::size_t>(i)] = static_cast<double>(fwd.out.node_weights[i]);
    }
    row["view_weights"] = vw;
    row["node_weights"] = nw;
    out << row.dump() << '\n';
  }
}

template MetricReport evaluate(const ModelParams<float>&, const EncodingTables<float>&,
                               const std::vector<Impression>&, const Corpus&, const EvalOptions&);
template MetricReport evaluate(const ModelParams<double>&, const EncodingTables<double>&,
                               const std::vector<Impression>&, const Corpus&, const EvalOptions&);
template void dump_attention(const ModelParams<float>&, const EncodingTables<float>&,
                             const std::vector<Impression>&, std::ostream&, int);
template void dump_attention(const ModelParams<double>&, const EncodingTables<double>&,
                             const std::vector<Impression>&, std::ostream&, int);

}  // namespace igniter
