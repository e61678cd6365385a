#include <benchmark/benchmark.h>

#include "igniter/cascade_view.hpp"
#include "igniter/eval.hpp"
#include "igniter/rng.hpp"
#include "igniter/training.hpp"

using namespace igniter;

namespace {

ModelDims bench_dims() {
  ModelDims d;  // production-scale defaults, smaller vocabulary
  d.g = 128;
  d.g1 = 100;
  d.g2 = 50;
  d.u = 128;
  d.gamma = 120;
  d.l = 3;
  d.m = 30;
  d.n_max = 20;
  d.d_max = 120;
  d.s_max = 20;
  return d;
}

template <class S>
EncodingTables<S> bench_tables(const ModelDims& d, int vocab, int nodes) {
  EncodingTables<S> t;
  Rng rng(1);
  t.words = Mat<S>::Zero(vocab + 2, d.g1);
  for (Eigen::Index i = 0; i < vocab * d.g1; ++i) {
    t.words.data()[i] = static_cast<S>(rng.uniform(-1, 1));
  }
  t.nodes = Mat<S>::Zero(nodes, d.g2);
  for (Eigen::Index i = 0; i < t.nodes.size(); ++i) {
    t.nodes.data()[i] = static_cast<S>(rng.uniform(-1, 1));
  }
  return t;
}

Impression bench_impression(const ModelDims& d, int history, int lambda, int vocab, int nodes,
                            std::uint64_t seed) {
  Rng rng(seed);
  const auto candidate = [&]() {
    CandidateState c;
    c.state.news_id = static_cast<NewsId>(rng.index(100000));
    for (int i = 0; i < d.n_max; ++i) {
      c.state.title_tokens.push_back(static_cast<std::int32_t>(rng.index(
          static_cast<std::size_t>(vocab))));
    }
    c.state.hist.t0 = 0;
    c.state.hist.unit_seconds = 3600;
    for (int i = 0; i < d.d_max; ++i) {
      c.state.hist.bucket_counts.push_back(static_cast<std::int64_t>(rng.index(30)));
    }
    c.state.observe_until = static_cast<Timestamp>(d.d_max) * 3600;
    for (int i = 0; i < d.m; ++i) {
      c.view.nodes.push_back(static_cast<UserId>(rng.index(static_cast<std::size_t>(nodes))));
    }
    c.view.real_length = d.m;
    return c;
  };
  Impression imp;
  for (int j = 0; j < history; ++j) imp.history.push_back(candidate());
  imp.positive = candidate();
  for (int c = 0; c < lambda; ++c) imp.negatives.push_back(candidate());
  return imp;
}

void BM_NewsEncodeForward(benchmark::State& state) {
  const ModelDims d = bench_dims();
  const auto params = init_model<float>(d, 3);
  const auto tables = bench_tables<float>(d, 2000, 5000);
  const auto imp = bench_impression(d, 0, 0, 2000, 5000, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        encode_news(imp.positive.state, imp.positive.view, tables, params.news, d));
  }
}
BENCHMARK(BM_NewsEncodeForward);

void BM_ImpressionForwardBackward(benchmark::State& state) {
  const ModelDims d = bench_dims();
  const auto params = init_model<float>(d, 3);
  auto grads = ModelParams<float>::sized(d);
  const auto tables = bench_tables<float>(d, 2000, 5000);
  const auto imp = bench_impression(d, static_cast<int>(state.range(0)), 4, 2000, 5000, 7);
  for (auto _ : state) {
    const auto fwd = forward_impression(imp, params, tables);
    backward_impression(imp, params, tables, fwd, grads);
    benchmark::DoNotOptimize(grads.news.cnn_bias.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ImpressionForwardBackward)->Arg(5)->Arg(19);

void BM_InfluenceStep(benchmark::State& state) {
  const int nodes = static_cast<int>(state.range(0));
  InfluenceModel model = InfluenceModel::zeros({0}, nodes, 50);
  Rng rng(5);
  for (Eigen::Index i = 0; i < model.reposters.size(); ++i) {
    model.reposters.data()[i] = rng.uniform(-0.1, 0.1);
  }
  InfluenceStepGrads grads;
  for (auto _ : state) {
    benchmark::DoNotOptimize(influence_step(model, 0, nodes / 2, &grads));
  }
}
BENCHMARK(BM_InfluenceStep)->Arg(1000)->Arg(10000);

void BM_SelectLocalInfluence(benchmark::State& state) {
  const int nodes = 5000;
  Rng rng(9);
  FollowerGraph graph;
  graph.node_count = nodes;
  for (int u = 0; u < nodes; ++u) {
    graph.external_ids.push_back(u);
    graph.user_id_index.emplace(u, u);
  }
  for (int e = 0; e < 20 * nodes; ++e) {
    graph.edges.emplace_back(static_cast<UserId>(rng.index(nodes)),
                             static_cast<UserId>(rng.index(nodes)));
  }
  graph.finalize();
  InfluenceModel model = InfluenceModel::zeros({}, nodes, 50);
  for (Eigen::Index i = 0; i < model.reposters.size(); ++i) {
    model.reposters.data()[i] = rng.uniform(-1, 1);
  }
  std::vector<std::uint8_t> influencers(nodes, 0);
  for (auto& f : influencers) f = rng.uniform01() < 0.05 ? 1 : 0;
  std::vector<UserId> diffusion;
  for (int i = 0; i < static_cast<int>(state.range(0)); ++i) {
    diffusion.push_back(static_cast<UserId>(rng.index(nodes)));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        select_local_influence(diffusion, graph, model, influencers, 17, 30));
  }
}
BENCHMARK(BM_SelectLocalInfluence)->Arg(100)->Arg(1000);

void BM_MetricAggregation(benchmark::State& state) {
  Rng rng(11);
  std::vector<ScoredImpression> scored(10000);
  for (auto& s : scored) {
    s.scores.resize(11);
    for (auto& v : s.scores) v = rng.uniform(-1, 1);
    s.user_total_adoptions = static_cast<std::int64_t>(rng.index(40));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(aggregate_metrics(scored, true));
  }
}
BENCHMARK(BM_MetricAggregation);

}  // namespace

BENCHMARK_MAIN();
