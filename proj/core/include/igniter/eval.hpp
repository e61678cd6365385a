#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "igniter/training.hpp"

namespace igniter {

/// 1-based rank of the positive candidate; ties are pessimistic (tied
/// negatives are counted as ranked ahead of the positive).
int rank_of_positive(const std::vector<double>& scores, int positive_index);

/// Fraction of (positive, negative) pairs the positive wins; ties count 0.5.
double auc_impression(const std::vector<double>& scores, int positive_index);

double mrr_from_rank(int rank);

/// Single-relevant-item NDCG: 1/log2(1 + rank) when rank <= k, else 0.
double ndcg_at_k(int rank, int k);

struct GroupMetrics {
  double auc = 0.0;
  double mrr = 0.0;
  double ndcg5 = 0.0;
  double ndcg10 = 0.0;
  std::int64_t impressions = 0;
};

struct MetricReport {
  GroupMetrics overall;
  // Keys ">5", ">10", ">15", ">20": impressions whose user has more than that
  // many adoptions overall (before windowing).
  std::map<std::string, GroupMetrics> groups;
  bool has_global_auc = false;
  double global_auc = 0.0;  // pooled over all candidates of all impressions
};

struct EvalOptions {
  int threads = 1;
  bool global_auc = false;
};

/// One scored impression: candidate scores with the positive at index 0, plus
/// the user's overall adoption count for the history-length grouping.
struct ScoredImpression {
  std::vector<double> scores;
  std::int64_t user_total_adoptions = 0;
};

/// Metric aggregation over pre-computed scores (evaluate() feeds this after
/// running the encoders; tests feed it stub scores).
MetricReport aggregate_metrics(const std::vector<ScoredImpression>& scored, bool global_auc);

template <class S>
MetricReport evaluate(const ModelParams<S>& params, const EncodingTables<S>& tables,
                      const std::vector<Impression>& impressions, const Corpus& corpus,
                      const EvalOptions& options = {});

std::string metric_report_json(const MetricReport& report);

/// JSON-lines attention export: one row per (user, news) with the fused view
/// weights and the m node weights; up to `per_user` positives per user.
template <class S>
void dump_attention(const ModelParams<S>& params, const EncodingTables<S>& tables,
                    const std::vector<Impression>& impressions, std::ostream& out,
                    int per_user = 5);

}  // namespace igniter
