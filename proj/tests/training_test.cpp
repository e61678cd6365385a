#include <doctest.h>

#include <cmath>
#include <cstring>

#include "gradcheck.hpp"
#include "toys.hpp"
#include "igniter/training.hpp"
#include "igniter/rng.hpp"
#include "synthetic.hpp"

using namespace igniter;
using igniter::testing::corpus_from_parts;
using igniter::testing::random_tables;
using igniter::testing::toy_impression;

namespace {

ModelDims toy_dims() {
  ModelDims d;
  d.g = 6;
  d.g1 = 3;
  d.g2 = 3;
  d.u = 4;
  d.gamma = 3;
  d.l = 2;
  d.m = 3;
  d.n_max = 4;
  d.d_max = 4;
  d.s_max = 6;
  return d;
}

/// Corpus for impression-building tests: user 0 adopts `n_positive` news in one
/// window; `n_pool` extra news (initiated by user 1) are negative candidates.
Corpus impression_corpus(int n_positive, int n_pool) {
  const Timestamp base = 1'000'000;
  std::vector<NewsItem> news;
  std::vector<Cascade> cascades;
  const auto add_news = [&news](NewsId id, Timestamp t) {
    NewsItem item;
    item.news_id = id;
    item.publish_time = t;
    item.title_tokens = {0, 1, 2, 3};
    news.push_back(item);
  };
  for (int j = 0; j < n_positive; ++j) {
    const Timestamp t0 = base + static_cast<Timestamp>(j) * 7200;
    add_news(j, t0);
    Cascade c;
    c.news_id = j;
    c.events = {{2, t0}, {0, t0 + 3000}, {3, t0 + 90'000}};  // user 3 adopts later
    cascades.push_back(std::move(c));
  }
  // Pool news publish right at the user's first adoption so every impression
  // sees the full pool inside its window.
  for (int j = 0; j < n_pool; ++j) {
    const NewsId id = n_positive + j;
    add_news(id, base + 3000);
    Cascade c;
    c.news_id = id;
    c.events = {{1, base + 3000}};
    cascades.push_back(std::move(c));
  }
  return corpus_from_parts(5, {}, std::move(news), std::move(cascades), 90, 0);
}

InfluenceModel toy_influence(int nodes, int g2, std::uint64_t seed) {
  std::vector<UserId> influencers{1, 2};
  InfluenceModel m = InfluenceModel::zeros(influencers, nodes, g2);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < m.reposters.size(); ++i) {
    m.reposters.data()[i] = rng.uniform(-1, 1);
  }
  return m;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("impression builder") {
  const ModelDims d = toy_dims();

  SUBCASE("a 20-adoption history yields 20 impressions of 1+4 candidates") {
    const Corpus corpus = impression_corpus(20, 30);
    const InfluenceModel influence = toy_influence(5, d.g2, 1);
    const ImpressionBuilder builder(corpus, influence, d, 3600);
    REQUIRE(corpus.histories.size() >= 1);
    std::vector<AdoptionRef> positives;
    for (std::size_t h = 0; h < corpus.histories.size(); ++h) {
      if (corpus.histories[h].user_id != 0) continue;
      for (std::size_t a = 0; a < corpus.histories[h].adoptions.size(); ++a) {
        positives.push_back(AdoptionRef{static_cast<std::int32_t>(h),
                                        static_cast<std::int32_t>(a),
                                        corpus.histories[h].adoptions[a].t});
      }
    }
    REQUIRE(positives.size() == 20);
    ImpressionBuildStats stats;
    const auto impressions = builder.build(positives, 4, false, 99, &stats);
    CHECK(impressions.size() == 20);
    CHECK(stats.built == 20);
    for (const auto& imp : impressions) {
      CHECK(imp.negatives.size() == 4);
      CHECK(imp.history.size() == 19);
      CHECK(imp.user == 0);
      const auto& window = corpus.histories[static_cast<std::size_t>(imp.history_index)];
      for (const auto& neg : imp.negatives) {
        // Published inside the window, no later than the impression, and
        // never adopted by this user.
        const Timestamp start = corpus.cascade_for(neg.state.news_id)->start_time();
        CHECK(start >= window.window_start);
        CHECK(start < window.window_end);
        CHECK(start <= imp.timestamp);
        CHECK(neg.state.news_id >= 20);  // pool ids; user 0 adopted 0..19
      }
    }
  }

  SUBCASE("a pool smaller than lambda skips the impression") {
    const Corpus corpus = impression_corpus(4, 3);
    const InfluenceModel influence = toy_influence(5, d.g2, 1);
    const ImpressionBuilder builder(corpus, influence, d, 3600);
    std::vector<AdoptionRef> positives;
    for (std::size_t h = 0; h < corpus.histories.size(); ++h) {
      if (corpus.histories[h].user_id != 0) continue;
      for (std::size_t a = 0; a < corpus.histories[h].adoptions.size(); ++a) {
        positives.push_back(AdoptionRef{static_cast<std::int32_t>(h),
                                        static_cast<std::int32_t>(a),
                                        corpus.histories[h].adoptions[a].t});
      }
    }
    ImpressionBuildStats stats;
    const auto impressions = builder.build(positives, 4, false, 99, &stats);
    CHECK(impressions.empty());
    CHECK(stats.skipped_small_pool == 4);

    // Test mode takes what exists instead.
    ImpressionBuildStats test_stats;
    const auto test_impressions = builder.build(positives, 10, true, 99, &test_stats);
    CHECK(test_impressions.size() == 4);
    for (const auto& imp : test_impressions) CHECK(imp.negatives.size() == 3);
  }

  SUBCASE("snapshots exclude events after the impression timestamp") {
    const Corpus corpus = impression_corpus(6, 10);
    const InfluenceModel influence = toy_influence(5, d.g2, 1);
    const ImpressionBuilder builder(corpus, influence, d, 3600);
    std::vector<AdoptionRef> positives;
    const auto& h0 = corpus.histories;
    for (std::size_t h = 0; h < h0.size(); ++h) {
      if (h0[h].user_id != 0) continue;
      positives.push_back(AdoptionRef{static_cast<std::int32_t>(h), 0, h0[h].adoptions[0].t});
    }
    const auto impressions = builder.build(positives, 2, false, 5);
    REQUIRE(impressions.size() == 1);
    const auto& imp = impressions[0];
    // Positive cascade has an event from user 3 at t0+90000, after adoption.
    for (const auto u : imp.positive.state.diffusion) CHECK(u != 3);
    // The target user is excluded from candidate diffusion sequences.
    for (const auto u : imp.positive.state.diffusion) CHECK(u != 0);
    std::int64_t total = 0;
    for (const auto b : imp.positive.state.hist.bucket_counts) total += b;
    CHECK(total == 2);  // initiator + the user's own adoption, not the later event
  }

  SUBCASE("single-adoption pseudo-users are skipped (empty history)") {
    const Corpus corpus = impression_corpus(1, 10);
    const InfluenceModel influence = toy_influence(5, d.g2, 1);
    const ImpressionBuilder builder(corpus, influence, d, 3600);
    std::vector<AdoptionRef> positives;
    for (std::size_t h = 0; h < corpus.histories.size(); ++h) {
      if (corpus.histories[h].user_id != 0) continue;
      positives.push_back(AdoptionRef{static_cast<std::int32_t>(h), 0,
                                      corpus.histories[h].adoptions[0].t});
    }
    ImpressionBuildStats stats;
    const auto impressions = builder.build(positives, 2, false, 5, &stats);
    CHECK(impressions.empty());
    CHECK(stats.skipped_empty_history == 1);
  }
}

TEST_CASE("score, impression probability, and loss") {
  SUBCASE("score is the inner product") {
    Vec<double> u(3), n(3);
    u << 1, 0, 0;
    n << 1, 0, 0;
    CHECK(score(u, n) == doctest::Approx(1.0));
    n << 0, 1, 0;
    CHECK(score(u, n) == doctest::Approx(0.0));
    u << 2, 4, -1;
    n << 0.5, -1, 3;
    CHECK(score((2.0 * u).eval(), n) == doctest::Approx(2.0 * score(u, n)));
    Vec<double> bad(2);
    CHECK_THROWS_AS(score(u, bad), error);
  }

  SUBCASE("uniform scores with lambda=4 give p = 0.2") {
    Vec<double> s = Vec<double>::Constant(5, 1.7);
    CHECK(impression_probability(s) == doctest::Approx(0.2));
  }

  SUBCASE("a dominant positive drives p to 1") {
    Vec<double> s(5);
    s << 60.0, 0.0, -2.0, 1.0, 0.5;
    CHECK(impression_probability(s) == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("scores (1,0,0,0,0) give p = e/(e+4)") {
    Vec<double> s(5);
    s << 1, 0, 0, 0, 0;
    const double e = std::exp(1.0);
    CHECK(impression_probability(s) == doctest::Approx(e / (e + 4.0)).epsilon(1e-12));
    CHECK(impression_probability(s) == doctest::Approx(0.4046).epsilon(1e-3));
  }

  SUBCASE("shift invariance") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
      Vec<double> s(4);
      for (int i = 0; i < 4; ++i) s[i] = rng.uniform(-5, 5);
      const double p = impression_probability(s);
      const Vec<double> shifted = (s.array() + rng.uniform(-100, 100)).matrix();
      CHECK(impression_probability(shifted) == doctest::Approx(p).epsilon(1e-9));
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  }

  SUBCASE("loss: all-perfect batch is 0; uniform impression is ln 5") {
    std::vector<Vec<double>> perfect;
    Vec<double> dominant(3);
    dominant << 80.0, 0.0, 0.0;
    perfect.push_back(dominant);
    CHECK(batch_loss(perfect) == doctest::Approx(0.0).epsilon(1e-9));

    std::vector<Vec<double>> uniform{Vec<double>::Zero(5)};
    CHECK(batch_loss(uniform) == doctest::Approx(std::log(5.0)).epsilon(1e-12));

    // Equal scores within every impression: loss = batch_size * ln(1+lambda).
    std::vector<Vec<double>> batch;
    for (int i = 0; i < 7; ++i) batch.push_back(Vec<double>::Constant(4, 0.3 * i));
    CHECK(batch_loss(batch) == doctest::Approx(7.0 * std::log(4.0)).epsilon(1e-12));
  }

  SUBCASE("loss strictly decreases as the positive score rises") {
    Vec<double> s(4);
    s << 0.0, 0.3, -0.7, 1.1;
    double prev = batch_loss(std::vector<Vec<double>>{s});
    for (int step = 0; step < 10; ++step) {
      s[0] += 0.5;
      const double now = batch_loss(std::vector<Vec<double>>{s});
      CHECK(now < prev);
      prev = now;
    }
  }
}

TEST_CASE("full-model gradients match finite differences (toy config)") {
  const ModelDims d = toy_dims();
  ModelParams<double> model = ModelParams<double>::sized(d);
  igniter::testing::randomize_model(model, 777);
  const auto tables = random_tables<double>(d, 9, 7, 778);

  std::vector<Impression> batch;
  batch.push_back(toy_impression(d, 3, 2, 9, 7, 1001));
  batch.push_back(toy_impression(d, 2, 2, 9, 7, 1002));

  ModelParams<double> grads = ModelParams<double>::sized(d);
  for (const auto& imp : batch) {
    const auto fwd = forward_impression(imp, model, tables);
    backward_impression(imp, model, tables, fwd, grads);
  }
  const auto loss = [&]() {
    double total = 0.0;
    for (const auto& imp : batch) {
      total += forward_impression(imp, model, tables).loss;
    }
    return total;
  };
  const auto report = igniter::testing::finite_difference_check(model, grads, loss, 1e-4);
  CAPTURE(report.worst_tensor);
  CAPTURE(report.checked);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("gradients are keyed by tensor name and cover exactly the trainables") {
  const ModelDims d = toy_dims();
  ModelParams<double> model = ModelParams<double>::sized(d);
  igniter::testing::randomize_model(model, 5);
  const auto tables = random_tables<double>(d, 9, 7, 6);
  const auto imp = toy_impression(d, 2, 2, 9, 7, 7);
  const auto grads = gradients_by_name(imp, model, tables);
  CHECK(grads.size() == 45);
  for (const auto& [name, g] : grads) {
    CHECK(name.find("words") == std::string::npos);
    CHECK(name.find("nodes") == std::string::npos);
    CHECK(name.find("influence") == std::string::npos);
  }
}

TEST_CASE("an exactly-confident batch produces zero gradients") {
  const ModelDims d = toy_dims();
  ModelParams<double> model = ModelParams<double>::sized(d);
  igniter::testing::randomize_model(model, 15);
  const auto tables = random_tables<double>(d, 9, 7, 16);
  const auto imp = toy_impression(d, 2, 2, 9, 7, 17);

  auto fwd = forward_impression(imp, model, tables);
  // p == 1 exactly: the softmax-backward signal p - onehot vanishes.
  fwd.probs.setZero();
  fwd.probs[0] = 1.0;
  fwd.loss = 0.0;
  ModelParams<double> grads = ModelParams<double>::sized(d);
  backward_impression(imp, model, tables, fwd, grads);
  double total = 0.0;
  visit_tensors(grads, [&total](const std::string&, const auto& t) {
    total += static_cast<double>(t.cwiseAbs().sum());
  });
  CHECK(total == 0.0);
}

TEST_CASE("overfit sanity run: loss collapses on a tiny planted corpus") {
  // 12 users, 40 news; enough signal to drive the train loss well below the
  // initial uniform-softmax level.
  igniter::testing::PlantedConfig pcfg;
  pcfg.users = 12;
  pcfg.news = 40;
  pcfg.adopt_prob = 0.8;
  pcfg.span_days = 30;
  pcfg.seed = 77;
  pcfg.g1 = 6;

  igniter::testing::TempCorpus tc = igniter::testing::make_planted_corpus(pcfg, 45, 8, 6);

  ModelDims d;
  d.g = 12;
  d.g1 = 6;
  d.g2 = 5;
  d.u = 6;
  d.gamma = 6;
  d.l = 2;
  d.m = 4;
  d.n_max = 8;
  d.d_max = 12;
  d.s_max = 8;

  InfluenceConfig icfg;
  icfg.g2 = 5;
  icfg.epochs = 2;
  icfg.lr = 0.05;
  const InfluenceModel influence =
      train_influence(tc.corpus.cascades, tc.corpus.graph.node_count, icfg);

  const DatasetSplit split = split_timeline(tc.corpus.histories, 0.85, 0.10);

  TrainConfig cfg;
  cfg.lambda = 2;
  cfg.lr = 0.2;
  cfg.epochs = 25;
  cfg.batch = 8;
  cfg.seed = 3;
  const auto result = train_model<double>(cfg, d, tc.corpus, split, influence, tc.words, 3600,
                                          10);
  REQUIRE(result.log.size() == 25);
  const double initial = result.log.front().train_loss;
  const double final_loss = result.log.back().train_loss;
  CHECK(final_loss < 0.1 * initial);
}

TEST_CASE("momentum and sharded gradients run and stay deterministic") {
  igniter::testing::PlantedConfig pcfg;
  pcfg.users = 10;
  pcfg.news = 24;
  pcfg.adopt_prob = 0.7;
  pcfg.span_days = 20;
  pcfg.seed = 5;
  pcfg.g1 = 6;
  igniter::testing::TempCorpus tc = igniter::testing::make_planted_corpus(pcfg, 30, 8, 6);

  ModelDims d;
  d.g = 8;
  d.g1 = 6;
  d.g2 = 4;
  d.u = 5;
  d.gamma = 4;
  d.l = 2;
  d.m = 3;
  d.n_max = 8;
  d.d_max = 8;
  d.s_max = 6;

  InfluenceConfig icfg;
  icfg.g2 = 4;
  icfg.epochs = 1;
  const InfluenceModel influence =
      train_influence(tc.corpus.cascades, tc.corpus.graph.node_count, icfg);
  const DatasetSplit split = split_timeline(tc.corpus.histories, 0.85, 0.10);

  TrainConfig cfg;
  cfg.lambda = 2;
  cfg.lr = 0.05;
  cfg.epochs = 2;
  cfg.batch = 6;
  cfg.seed = 31;
  cfg.momentum = 0.9;
  cfg.threads = 2;

  const auto a = train_model<float>(cfg, d, tc.corpus, split, influence, tc.words, 3600, 10);
  const auto b = train_model<float>(cfg, d, tc.corpus, split, influence, tc.words, 3600, 10);
  REQUIRE(a.log.size() == 2);
  CHECK(std::isfinite(a.log.back().train_loss));
  for (std::size_t e = 0; e < a.log.size(); ++e) {
    CHECK(a.log[e].train_loss == b.log[e].train_loss);  // fixed reduction order
  }
}

TEST_CASE("training is bitwise deterministic for a fixed seed") {
  igniter::testing::PlantedConfig pcfg;
  pcfg.users = 10;
  pcfg.news = 24;
  pcfg.adopt_prob = 0.7;
  pcfg.span_days = 20;
  pcfg.seed = 5;
  pcfg.g1 = 6;
  igniter::testing::TempCorpus tc = igniter::testing::make_planted_corpus(pcfg, 30, 8, 6);

  ModelDims d;
  d.g = 8;
  d.g1 = 6;
  d.g2 = 4;
  d.u = 5;
  d.gamma = 4;
  d.l = 2;
  d.m = 3;
  d.n_max = 8;
  d.d_max = 8;
  d.s_max = 6;

  InfluenceConfig icfg;
  icfg.g2 = 4;
  icfg.epochs = 1;
  const InfluenceModel influence =
      train_influence(tc.corpus.cascades, tc.corpus.graph.node_count, icfg);
  const DatasetSplit split = split_timeline(tc.corpus.histories, 0.85, 0.10);

  TrainConfig cfg;
  cfg.lambda = 2;
  cfg.lr = 0.05;
  cfg.epochs = 3;
  cfg.batch = 4;
  cfg.seed = 99;

  auto a = train_model<float>(cfg, d, tc.corpus, split, influence, tc.words, 3600, 10);
  auto b = train_model<float>(cfg, d, tc.corpus, split, influence, tc.words, 3600, 10);
  auto va = tensor_views(a.params);
  auto vb = tensor_views(b.params);
  bool identical = true;
  for (std::size_t t = 0; t < va.size(); ++t) {
    for (Eigen::Index i = 0; i < va[t].size; ++i) {
      identical &= std::memcmp(&va[t].data[i], &vb[t].data[i], sizeof(float)) == 0;
    }
  }
  CHECK(identical);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t e = 0; e < a.log.size(); ++e) {
    CHECK(a.log[e].train_loss == b.log[e].train_loss);
  }
}

}  // TEST_SUITE
