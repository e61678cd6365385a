#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "igniter/model.hpp"
#include "igniter/news_encoder.hpp"
#include "igniter/rng.hpp"

using namespace igniter;

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
  d.s_max = 5;
  return d;
}

template <class S>
EncodingTables<S> random_tables(const ModelDims& d, int vocab, int nodes, std::uint64_t seed) {
  EncodingTables<S> t;
  Rng rng(seed);
  t.words = Mat<S>::Zero(vocab + 2, d.g1);
  for (Eigen::Index i = 0; i < vocab; ++i) {
    for (int j = 0; j < d.g1; ++j) t.words(i, j) = static_cast<S>(rng.uniform(-1, 1));
  }
  t.nodes = Mat<S>::Zero(nodes, d.g2);
  for (Eigen::Index i = 0; i < t.nodes.size(); ++i) {
    t.nodes.data()[i] = static_cast<S>(rng.uniform(-1, 1));
  }
  return t;
}

NewsState state_with(std::vector<std::int32_t> tokens, std::vector<std::int64_t> buckets,
                     Timestamp t0, Timestamp observe, std::int64_t unit = 3600) {
  NewsState s;
  s.news_id = 0;
  s.title_tokens = std::move(tokens);
  s.hist.bucket_counts = std::move(buckets);
  s.hist.t0 = t0;
  s.hist.unit_seconds = unit;
  s.observe_until = observe;
  return s;
}

void randomize_news_params(NewsEncoderParams<double>& p, std::uint64_t seed) {
  Rng rng(seed);
  const auto fill = [&rng](auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-0.5, 0.5);
  };
  fill(p.cnn_filters);
  fill(p.cnn_bias);
  for (Mat<double>* w : {&p.diff_lstm.w_f, &p.diff_lstm.w_i, &p.diff_lstm.w_o, &p.diff_lstm.w_c}) {
    fill(*w);
  }
  for (Vec<double>* b : {&p.diff_lstm.b_f, &p.diff_lstm.b_i, &p.diff_lstm.b_o, &p.diff_lstm.b_c}) {
    fill(*b);
  }
  for (AttnParams<double>* a :
       {&p.diff_attn, &p.view_attn_s, &p.view_attn_v, &p.view_attn_a}) {
    fill(a->w);
    fill(a->b);
    fill(a->q);
  }
  fill(p.proj_s);
  fill(p.proj_s_bias);
  fill(p.proj_v);
  fill(p.proj_v_bias);
}

}  // namespace

TEST_SUITE("news-encoder") {

TEST_CASE("title CNN") {
  SUBCASE("hand-computed single-filter example") {
    // g1=2, l=1, filter [1,0], bias 0, word vectors (3,5) and (1,7).
    ModelDims d = toy_dims();
    d.g1 = 2;
    d.l = 1;
    d.gamma = 1;
    d.n_max = 2;
    d.g = 6;
    d.d_max = 4;
    auto p = NewsEncoderParams<double>::sized(d);
    p.cnn_filters << 1.0, 0.0;
    Mat<double> words = Mat<double>::Zero(4, 2);
    words.row(0) << 3.0, 5.0;
    words.row(1) << 1.0, 7.0;
    CnnTrace<double> trace;
    const auto pooled = encode_semantics<double>({0, 1}, words, p, d, &trace);
    REQUIRE(pooled.size() == 1);
    CHECK(pooled[0] == doctest::Approx(3.0));
    CHECK(trace.feat(0, 0) == doctest::Approx(3.0));
    CHECK(trace.feat(0, 1) == doctest::Approx(1.0));
    CHECK(trace.argmax[0] == 0);
  }

  SUBCASE("zero filters and bias pool to zero") {
    const ModelDims d = toy_dims();
    auto p = NewsEncoderParams<double>::sized(d);
    Mat<double> words = Mat<double>::Ones(8, d.g1);
    const auto pooled = encode_semantics<double>({0, 1, 2, 3}, words, p, d, nullptr);
    CHECK(pooled.norm() == 0.0);
  }

  SUBCASE("permuting filters permutes the output") {
    const ModelDims d = toy_dims();
    Rng rng(5);
    auto p = NewsEncoderParams<double>::sized(d);
    for (Eigen::Index i = 0; i < p.cnn_filters.size(); ++i) {
      p.cnn_filters.data()[i] = rng.uniform(-1, 1);
    }
    p.cnn_bias << 0.1, -0.2, 0.3;
    auto tables = random_tables<double>(d, 6, 4, 6);
    const std::vector<std::int32_t> tokens{0, 3, 1, 2};
    const auto base = encode_semantics<double>(tokens, tables.words, p, d, nullptr);

    auto swapped = p;
    swapped.cnn_filters.row(0).swap(swapped.cnn_filters.row(2));
    std::swap(swapped.cnn_bias[0], swapped.cnn_bias[2]);
    const auto out = encode_semantics<double>(tokens, tables.words, swapped, d, nullptr);
    CHECK(out[0] == doctest::Approx(base[2]));
    CHECK(out[2] == doctest::Approx(base[0]));
    CHECK(out[1] == doctest::Approx(base[1]));
  }
}

TEST_CASE("diffusion LSTM") {
  SUBCASE("zero parameters: gates 0.5, hidden states 0") {
    auto p = LstmParams<double>::sized(3, 4);
    Mat<double> inputs = Mat<double>::Random(3, 5);
    const auto trace = lstm_forward(p, inputs);
    CHECK(trace.h.norm() == 0.0);
    CHECK((trace.f.array() == 0.5).all());
    CHECK((trace.i.array() == 0.5).all());
    CHECK((trace.o.array() == 0.5).all());
    CHECK(trace.g.norm() == 0.0);
  }

  SUBCASE("gates stay in (0,1) for random parameters") {
    Rng rng(8);
    auto p = LstmParams<double>::sized(3, 4);
    for (Mat<double>* w : {&p.w_f, &p.w_i, &p.w_o, &p.w_c}) {
      for (Eigen::Index i = 0; i < w->size(); ++i) w->data()[i] = rng.uniform(-2, 2);
    }
    Mat<double> inputs = Mat<double>::Random(3, 6);
    const auto trace = lstm_forward(p, inputs);
    CHECK((trace.f.array() > 0.0).all());
    CHECK((trace.f.array() < 1.0).all());
    CHECK((trace.i.array() > 0.0).all());
    CHECK((trace.o.array() < 1.0).all());
  }

  SUBCASE("single step matches a scalar transcription of the cell equations") {
    auto p = LstmParams<double>::sized(1, 2);
    Rng rng(12);
    for (Mat<double>* w : {&p.w_f, &p.w_i, &p.w_o, &p.w_c}) {
      for (Eigen::Index i = 0; i < w->size(); ++i) w->data()[i] = rng.uniform(-1, 1);
    }
    for (Vec<double>* b : {&p.b_f, &p.b_i, &p.b_o, &p.b_c}) {
      for (Eigen::Index i = 0; i < b->size(); ++i) (*b)[i] = rng.uniform(-1, 1);
    }
    const double x = 0.7;
    Mat<double> inputs(1, 1);
    inputs(0, 0) = x;
    const auto trace = lstm_forward(p, inputs);

    const auto sigma = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (int unit = 0; unit < 2; ++unit) {
      // z = [h_prev; x] with h_prev = 0, so only the input row contributes.
      const double f = sigma(p.w_f(2, unit) * x + p.b_f[unit]);
      const double i = sigma(p.w_i(2, unit) * x + p.b_i[unit]);
      const double o = sigma(p.w_o(2, unit) * x + p.b_o[unit]);
      const double g = std::tanh(p.w_c(2, unit) * x + p.b_c[unit]);
      const double c = i * g;  // f * C_{-1} = 0
      const double h = o * std::tanh(c);
      CHECK(trace.f(unit, 0) == doctest::Approx(f).epsilon(1e-12));
      CHECK(trace.i(unit, 0) == doctest::Approx(i).epsilon(1e-12));
      CHECK(trace.o(unit, 0) == doctest::Approx(o).epsilon(1e-12));
      CHECK(trace.c(unit, 0) == doctest::Approx(c).epsilon(1e-12));
      CHECK(trace.h(unit, 0) == doctest::Approx(h).epsilon(1e-12));
      (void)f;
    }
  }
}

TEST_CASE("additive attention") {
  SUBCASE("identical hidden states: uniform weights, output equals the state") {
    auto p = AttnParams<double>::sized(3);
    Rng rng(3);
    for (Eigen::Index i = 0; i < p.w.size(); ++i) p.w.data()[i] = rng.uniform(-1, 1);
    for (Eigen::Index i = 0; i < 3; ++i) {
      p.b[i] = rng.uniform(-1, 1);
      p.q[i] = rng.uniform(-1, 1);
    }
    Vec<double> state(3);
    state << 0.2, -0.5, 1.0;
    Mat<double> hiddens(3, 4);
    for (int j = 0; j < 4; ++j) hiddens.col(j) = state;
    const auto r = attend_sequence(p, hiddens, Mask(4, 1));
    for (int j = 0; j < 4; ++j) CHECK(r.trace.weights[j] == doctest::Approx(0.25));
    CHECK((r.context - state).norm() == doctest::Approx(0.0));
  }

  SUBCASE("zero query vector gives uniform weights") {
    auto p = AttnParams<double>::sized(2);
    p.w.setRandom();
    p.b.setRandom();
    Mat<double> hiddens = Mat<double>::Random(2, 5);
    const auto r = attend_sequence(p, hiddens, Mask(5, 1));
    for (int j = 0; j < 5; ++j) CHECK(r.trace.weights[j] == doctest::Approx(0.2));
  }

  SUBCASE("hand-computed two-term softmax: scores (0,2) -> (0.1192, 0.8808)") {
    auto p = AttnParams<double>::sized(1);
    p.w(0, 0) = 1.0;
    p.b[0] = 0.0;
    p.q[0] = 4.0;
    Mat<double> hiddens(1, 2);
    hiddens(0, 0) = 0.0;                 // score 0
    hiddens(0, 1) = std::atanh(0.5);     // tanh -> 0.5, score 2
    const auto r = attend_sequence(p, hiddens, Mask(2, 1));
    CHECK(r.trace.weights[0] == doctest::Approx(0.1192029220).epsilon(1e-6));
    CHECK(r.trace.weights[1] == doctest::Approx(0.8807970780).epsilon(1e-6));
  }

  SUBCASE("fully masked sequence is an error") {
    auto p = AttnParams<double>::sized(2);
    Mat<double> hiddens = Mat<double>::Random(2, 3);
    CHECK_THROWS_AS(attend_sequence(p, hiddens, Mask(3, 0)), error);
  }
}

TEST_CASE("adoption featurization") {
  SUBCASE("counts [1,3] over two elapsed units") {
    AdoptionHistogram hist;
    hist.t0 = 0;
    hist.unit_seconds = 3600;
    hist.bucket_counts = {1, 3};
    const auto v = featurize_adoptions(hist, 7200, 4);
    REQUIRE(v.size() == 4);
    CHECK(v[0] == doctest::Approx(std::log1p(std::log(2.0)) / 2.0).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(std::log1p(std::log(4.0)) / 2.0).epsilon(1e-12));
    CHECK(v[2] == 0.0);
    CHECK(v[3] == 0.0);
    CHECK(v[0] == doctest::Approx(0.2634).epsilon(1e-3));
    CHECK(v[1] == doctest::Approx(0.4358).epsilon(1e-3));
  }

  SUBCASE("zero counts map to the zero vector") {
    AdoptionHistogram hist;
    hist.t0 = 0;
    hist.unit_seconds = 60;
    hist.bucket_counts = {0, 0, 0};
    CHECK(featurize_adoptions(hist, 1800, 5).norm() == 0.0);
  }

  SUBCASE("doubling the elapsed time halves every entry") {
    AdoptionHistogram hist;
    hist.t0 = 0;
    hist.unit_seconds = 60;
    hist.bucket_counts = {2, 7, 1};
    const auto a = featurize_adoptions(hist, 600, 8);
    const auto b = featurize_adoptions(hist, 1200, 8);
    for (int i = 0; i < 8; ++i) CHECK(b[i] == doctest::Approx(a[i] / 2.0));
  }

  SUBCASE("elapsed time below one unit is floored at one") {
    AdoptionHistogram hist;
    hist.t0 = 0;
    hist.unit_seconds = 3600;
    hist.bucket_counts = {5};
    const auto v = featurize_adoptions(hist, 0, 2);
    CHECK(v[0] == doctest::Approx(std::log1p(std::log1p(5.0))));
  }
}

TEST_CASE("view fusion") {
  const ModelDims d = toy_dims();

  SUBCASE("three equal aligned views reproduce the view regardless of weights") {
    auto p = NewsEncoderParams<double>::sized(d);
    Rng rng(4);
    // Random attention heads so the weights are not uniform.
    for (AttnParams<double>* a : {&p.view_attn_s, &p.view_attn_v, &p.view_attn_a}) {
      for (Eigen::Index i = 0; i < a->w.size(); ++i) a->w.data()[i] = rng.uniform(-1, 1);
      for (Eigen::Index i = 0; i < a->b.size(); ++i) a->b[i] = rng.uniform(-1, 1);
      for (Eigen::Index i = 0; i < a->q.size(); ++i) a->q[i] = rng.uniform(-1, 1);
    }
    Vec<double> v = Vec<double>::Zero(d.g);
    v.head(d.d_max) << 0.3, -0.1, 0.7, 0.2;  // zero past d_max so padding matches
    p.proj_s_bias = v;
    p.proj_v_bias = v;
    const Vec<double> e_s = Vec<double>::Zero(d.gamma);
    const Vec<double> e_v = Vec<double>::Zero(d.u);
    const Vec<double> e_a = v.head(d.d_max);
    const auto r = fuse_views(e_s, e_v, e_a, p, {true, true, true});
    CHECK((r.e_n - v).norm() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.trace.weights.sum() == doctest::Approx(1.0));
    CHECK(r.trace.weights.minCoeff() > 0.0);
  }

  SUBCASE("equal scores give weights (1/3, 1/3, 1/3)") {
    auto p = NewsEncoderParams<double>::sized(d);
    Vec<double> e_s = Vec<double>::Random(d.gamma);
    Vec<double> e_v = Vec<double>::Random(d.u);
    Vec<double> e_a = Vec<double>::Random(d.d_max);
    const auto r = fuse_views(e_s, e_v, e_a, p, {true, true, true});
    for (int x = 0; x < 3; ++x) CHECK(r.trace.weights[x] == doctest::Approx(1.0 / 3.0));
  }

  SUBCASE("output norm is bounded by the largest aligned view") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto p = NewsEncoderParams<double>::sized(d);
      randomize_news_params(p, 100 + seed);
      Rng rng(seed);
      Vec<double> e_s(d.gamma), e_v(d.u), e_a(d.d_max);
      for (Eigen::Index i = 0; i < e_s.size(); ++i) e_s[i] = rng.uniform(-2, 2);
      for (Eigen::Index i = 0; i < e_v.size(); ++i) e_v[i] = rng.uniform(-2, 2);
      for (Eigen::Index i = 0; i < e_a.size(); ++i) e_a[i] = rng.uniform(-2, 2);
      const auto r = fuse_views(e_s, e_v, e_a, p, {true, true, true});
      const double bound = std::max({r.trace.aligned_s.norm(), r.trace.aligned_v.norm(),
                                     r.trace.aligned_a.norm()});
      CHECK(r.e_n.norm() <= bound + 1e-12);
    }
  }
}

TEST_CASE("encode_news composition") {
  const ModelDims d = toy_dims();

  SUBCASE("zero parameters and zero inputs produce the zero encoding") {
    auto p = NewsEncoderParams<double>::sized(d);
    EncodingTables<double> tables;
    tables.words = Mat<double>::Zero(6, d.g1);
    tables.nodes = Mat<double>::Zero(5, d.g2);
    const NewsState state = state_with({0, 1, 2, 3}, {0, 0}, 0, 3600);
    PersonalizedView view;
    view.nodes = {0, 1, kPadUser};
    view.real_length = 2;
    const auto fwd = encode_news(state, view, tables, p, d);
    CHECK(fwd.out.e_n.norm() == 0.0);
    CHECK(fwd.out.e_s.norm() == 0.0);
    CHECK(fwd.out.e_v.norm() == 0.0);
    CHECK(fwd.out.e_a.norm() == 0.0);
  }

  SUBCASE("purity: identical inputs give identical outputs") {
    auto p = NewsEncoderParams<double>::sized(d);
    randomize_news_params(p, 21);
    auto tables = random_tables<double>(d, 6, 5, 22);
    const NewsState state = state_with({0, 2, 1, 3}, {2, 1}, 0, 7200);
    PersonalizedView view;
    view.nodes = {3, 1, 0};
    view.real_length = 3;
    const auto a = encode_news(state, view, tables, p, d);
    const auto b = encode_news(state, view, tables, p, d);
    CHECK(a.out.e_n == b.out.e_n);
    CHECK(a.out.view_weights == b.out.view_weights);
  }

  SUBCASE("appending PAD nodes never changes e_v; PAD weights are exactly zero") {
    ModelDims wide = d;
    wide.m = 6;
    auto p = NewsEncoderParams<double>::sized(wide);
    randomize_news_params(p, 31);
    auto tables = random_tables<double>(wide, 6, 5, 32);
    const NewsState state = state_with({0, 2, 1, 3}, {2, 1}, 0, 7200);

    ModelDims narrow = wide;
    narrow.m = 3;
    PersonalizedView small;
    small.nodes = {3, 1, 0};
    small.real_length = 3;
    PersonalizedView padded;
    padded.nodes = {3, 1, 0, kPadUser, kPadUser, kPadUser};
    padded.real_length = 3;

    const auto a = encode_news(state, small, tables, p, narrow);
    const auto b = encode_news(state, padded, tables, p, wide);
    CHECK((a.out.e_v - b.out.e_v).norm() == 0.0);
    for (int j = 3; j < 6; ++j) CHECK(b.out.node_weights[j] == 0.0);
    double sum = 0.0;
    for (int j = 0; j < 3; ++j) sum += b.out.node_weights[j];
    CHECK(sum == doctest::Approx(1.0));
  }

  SUBCASE("gradients of e_n match finite differences for every parameter") {
    ModelParams<double> model = ModelParams<double>::sized(d);
    igniter::testing::randomize_model(model, 51);
    EncodingTables<double> tables = random_tables<double>(d, 6, 5, 52);
    const NewsState state = state_with({0, 2, 1, 3}, {2, 1, 4}, 0, 9000);
    PersonalizedView view;
    view.nodes = {3, 1, kPadUser};
    view.real_length = 2;
    Vec<double> probe = Vec<double>::Random(d.g);

    ModelParams<double> grads = ModelParams<double>::sized(d);
    {
      const auto fwd = encode_news(state, view, tables, model.news, d);
      news_backward(model.news, fwd, probe, grads.news);
    }
    const auto loss = [&]() {
      return probe.dot(encode_news(state, view, tables, model.news, d).out.e_n);
    };
    const auto report = igniter::testing::finite_difference_check(model, grads, loss, 1e-5);
    CAPTURE(report.worst_tensor);
    CHECK(report.max_rel_error < 1e-4);
  }

  SUBCASE("empty view drops the diffusion channel instead of failing") {
    auto p = NewsEncoderParams<double>::sized(d);
    randomize_news_params(p, 41);
    auto tables = random_tables<double>(d, 6, 5, 42);
    const NewsState state = state_with({0, 1, 2, 3}, {1}, 0, 3600);
    PersonalizedView view;
    view.nodes = {kPadUser, kPadUser, kPadUser};
    view.real_length = 0;
    const auto fwd = encode_news(state, view, tables, p, d);
    CHECK(fwd.out.view_weights[kViewDiffusion] == 0.0);
    CHECK(fwd.out.view_weights[kViewSemantic] + fwd.out.view_weights[kViewAdoption] ==
          doctest::Approx(1.0));
    CHECK(fwd.out.e_v.norm() == 0.0);
  }
}

}  // TEST_SUITE
