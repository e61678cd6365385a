#include "igniter/news_encoder.hpp"

#include <cmath>

namespace igniter {

template <class S>
NewsEncoderParams<S> NewsEncoderParams<S>::sized(const ModelDims& d) {
  NewsEncoderParams<S> p;
  p.cnn_filters = Mat<S>::Zero(d.gamma, d.g1 * d.l);
  p.cnn_bias = Vec<S>::Zero(d.gamma);
  p.diff_lstm = LstmParams<S>::sized(d.g2, d.u);
  p.diff_attn = AttnParams<S>::sized(d.u);
  p.proj_s = Mat<S>::Zero(d.gamma, d.g);
  p.proj_s_bias = Vec<S>::Zero(d.g);
  p.proj_v = Mat<S>::Zero(d.u, d.g);
  p.proj_v_bias = Vec<S>::Zero(d.g);
  p.view_attn_s = AttnParams<S>::sized(d.g);
  p.view_attn_v = AttnParams<S>::sized(d.g);
  p.view_attn_a = AttnParams<S>::sized(d.g);
  return p;
}

template <class S>
Vec<S> encode_semantics(const std::vector<std::int32_t>& tokens, const Mat<S>& words,
                        const NewsEncoderParams<S>& p, const ModelDims& dims, CnnTrace<S>* trace) {
  const int n = static_cast<int>(tokens.size());
  const int l = dims.l;
  const int g1 = dims.g1;
  const int positions = n - l + 1;

  Mat<S> windows(g1 * l, positions);
  for (int pos = 0; pos < positions; ++pos) {
    for (int c = 0; c < l; ++c) {
      windows.col(pos).segment(c * g1, g1) =
          words.row(tokens[static_cast<std::size_t>(pos + c)]).transpose();
    }
  }
  Mat<S> feat = ((p.cnn_filters * windows).colwise() + p.cnn_bias).cwiseMax(S(0));

  Vec<S> pooled(dims.gamma);
  std::vector<int> argmax(static_cast<std::size_t>(dims.gamma));
  for (int r = 0; r < dims.gamma; ++r) {
    Eigen::Index best = 0;
    pooled[r] = feat.row(r).maxCoeff(&best);
    argmax[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  if (trace != nullptr) {
    trace->windows = std::move(windows);
    trace->feat = std::move(feat);
    trace->argmax = std::move(argmax);
  }
  return pooled;
}

Vec<double> featurize_adoptions(const AdoptionHistogram& hist, Timestamp observe_until,
                                int d_max) {
  if (observe_until < hist.t0) throw error("observe_until precedes histogram origin");
  const double elapsed_units = static_cast<double>(observe_until - hist.t0) /
                               static_cast<double>(hist.unit_seconds);
  const double delta = std::max(1.0, elapsed_units);
  Vec<double> out = Vec<double>::Zero(d_max);
  const int n = std::min<int>(d_max, static_cast<int>(hist.bucket_counts.size()));
  for (int i = 0; i < n; ++i) {
    const double a = static_cast<double>(hist.bucket_counts[static_cast<std::size_t>(i)]);
    out[i] = std::log1p(std::log1p(a)) / delta;
  }
  return out;
}

namespace {

template <class S>
struct ViewHead {
  const AttnParams<S>* params;
  const Vec<S>* aligned;
  Vec<S>* tanh_cache;
};

}  // namespace

template <class S>
FuseResult<S> fuse_views(const Vec<S>& e_s, const Vec<S>& e_v, const Vec<S>& e_a,
                         const NewsEncoderParams<S>& p, const std::array<bool, 3>& active) {
  const int g = static_cast<int>(p.proj_s_bias.size());
  FuseResult<S> r;
  r.trace.active = active;
  r.trace.aligned_s = p.proj_s.transpose() * e_s + p.proj_s_bias;
  r.trace.aligned_v = p.proj_v.transpose() * e_v + p.proj_v_bias;
  r.trace.aligned_a = Vec<S>::Zero(g);
  r.trace.aligned_a.head(e_a.size()) = e_a;

  const std::array<ViewHead<S>, 3> heads = {
      ViewHead<S>{&p.view_attn_s, &r.trace.aligned_s, &r.trace.tanh_s},
      ViewHead<S>{&p.view_attn_v, &r.trace.aligned_v, &r.trace.tanh_v},
      ViewHead<S>{&p.view_attn_a, &r.trace.aligned_a, &r.trace.tanh_a}};

  Vec<S> scores = Vec<S>::Zero(3);
  Mask keep(3, 0);
  for (int x = 0; x < 3; ++x) {
    if (!active[static_cast<std::size_t>(x)]) continue;
    const auto& head = heads[static_cast<std::size_t>(x)];
    *head.tanh_cache = (head.params->w * (*head.aligned) + head.params->b).array().tanh().matrix();
    scores[x] = head.params->q.dot(*head.tanh_cache);
    keep[static_cast<std::size_t>(x)] = 1;
  }
  r.trace.weights = masked_softmax(scores, keep);

  r.e_n = Vec<S>::Zero(g);
  for (int x = 0; x < 3; ++x) {
    if (active[static_cast<std::size_t>(x)]) {
      r.e_n += r.trace.weights[x] * (*heads[static_cast<std::size_t>(x)].aligned);
    }
  }
  return r;
}

template <class S>
NewsForward<S> encode_news(const NewsState& state, const PersonalizedView& view,
                           const EncodingTables<S>& tables, const NewsEncoderParams<S>& p,
                           const ModelDims& dims) {
  NewsForward<S> fwd;
  fwd.out.e_s = encode_semantics(state.title_tokens, tables.words, p, dims, &fwd.cnn);

  fwd.has_diffusion = dims.use_diffusion && view.real_length > 0;
  fwd.out.node_weights = Vec<S>::Zero(dims.m);
  if (fwd.has_diffusion) {
    fwd.node_inputs = Mat<S>::Zero(dims.g2, dims.m);
    fwd.node_mask.assign(static_cast<std::size_t>(dims.m), 0);
    for (int j = 0; j < view.real_length; ++j) {
      fwd.node_inputs.col(j) = tables.nodes.row(view.nodes[static_cast<std::size_t>(j)]).transpose();
      fwd.node_mask[static_cast<std::size_t>(j)] = 1;
    }
    fwd.lstm = lstm_forward(p.diff_lstm, fwd.node_inputs);
    auto attn = attend_sequence(p.diff_attn, fwd.lstm.h, fwd.node_mask);
    fwd.out.e_v = std::move(attn.context);
    fwd.out.node_weights = attn.trace.weights;
    fwd.diff_attn = std::move(attn.trace);
  } else {
    fwd.out.e_v = Vec<S>::Zero(dims.u);
  }

  fwd.out.e_a = Vec<S>::Zero(dims.d_max);
  if (dims.use_adoption) {
    fwd.out.e_a = featurize_adoptions(state.hist, state.observe_until, dims.d_max).template cast<S>();
  }

  const std::array<bool, 3> active = {true, fwd.has_diffusion, dims.use_adoption};
  auto fused = fuse_views(fwd.out.e_s, fwd.out.e_v, fwd.out.e_a, p, active);
  fwd.out.e_n = std::move(fused.e_n);
  fwd.out.view_weights = fused.trace.weights;
  fwd.fuse = std::move(fused.trace);
  return fwd;
}

template <class S>
void news_backward(const NewsEncoderParams<S>& p, const NewsForward<S>& fwd, const Vec<S>& d_e_n,
                   NewsEncoderParams<S>& grads) {
  // --- fusion ---
  const FuseTrace<S>& ft = fwd.fuse;
  const std::array<const Vec<S>*, 3> aligned = {&ft.aligned_s, &ft.aligned_v, &ft.aligned_a};
  const std::array<const Vec<S>*, 3> tanh_cache = {&ft.tanh_s, &ft.tanh_v, &ft.tanh_a};
  const std::array<const AttnParams<S>*, 3> heads = {&p.view_attn_s, &p.view_attn_v,
                                                     &p.view_attn_a};
  const std::array<AttnParams<S>*, 3> head_grads = {&grads.view_attn_s, &grads.view_attn_v,
                                                    &grads.view_attn_a};

  Vec<S> d_alpha = Vec<S>::Zero(3);
  S dot = S(0);
  for (int x = 0; x < 3; ++x) {
    if (!ft.active[static_cast<std::size_t>(x)]) continue;
    d_alpha[x] = d_e_n.dot(*aligned[static_cast<std::size_t>(x)]);
    dot += ft.weights[x] * d_alpha[x];
  }

  std::array<Vec<S>, 3> d_aligned;
  for (int x = 0; x < 3; ++x) {
    if (!ft.active[static_cast<std::size_t>(x)]) continue;
    d_aligned[static_cast<std::size_t>(x)] = ft.weights[x] * d_e_n;
    const S d_score = ft.weights[x] * (d_alpha[x] - dot);
    const auto& t = *tanh_cache[static_cast<std::size_t>(x)];
    head_grads[static_cast<std::size_t>(x)]->q.noalias() += d_score * t;
    const Vec<S> d_pre =
        (d_score * heads[static_cast<std::size_t>(x)]->q.array() * (S(1) - t.array().square()))
            .matrix();
    head_grads[static_cast<std::size_t>(x)]->w.noalias() +=
        d_pre * aligned[static_cast<std::size_t>(x)]->transpose();
    head_grads[static_cast<std::size_t>(x)]->b += d_pre;
    d_aligned[static_cast<std::size_t>(x)].noalias() +=
        heads[static_cast<std::size_t>(x)]->w.transpose() * d_pre;
  }

  // --- semantic projection + CNN ---
  {
    const Vec<S>& da = d_aligned[kViewSemantic];
    grads.proj_s.noalias() += fwd.out.e_s * da.transpose();
    grads.proj_s_bias += da;
    const Vec<S> d_e_s = p.proj_s * da;
    for (int r = 0; r < d_e_s.size(); ++r) {
      const int pos = fwd.cnn.argmax[static_cast<std::size_t>(r)];
      if (fwd.cnn.feat(r, pos) > S(0)) {  // ReLU subgradient: 0 at 0
        grads.cnn_filters.row(r).noalias() += d_e_s[r] * fwd.cnn.windows.col(pos).transpose();
        grads.cnn_bias[r] += d_e_s[r];
      }
    }
  }

  // --- diffusion projection + attention + LSTM ---
  if (ft.active[kViewDiffusion]) {
    const Vec<S>& da = d_aligned[kViewDiffusion];
    grads.proj_v.noalias() += fwd.out.e_v * da.transpose();
    grads.proj_v_bias += da;
    const Vec<S> d_e_v = p.proj_v * da;
    Mat<S> d_hidden = Mat<S>::Zero(fwd.lstm.h.rows(), fwd.lstm.h.cols());
    attend_backward(p.diff_attn, fwd.lstm.h, fwd.diff_attn, d_e_v, grads.diff_attn, d_hidden);
    lstm_backward(p.diff_lstm, fwd.lstm, d_hidden, grads.diff_lstm,
                  static_cast<Mat<S>*>(nullptr));
  }
  // Adoption view: e_a is an input feature, nothing upstream to update.
}

template struct NewsEncoderParams<float>;
template struct NewsEncoderParams<double>;
template Vec<float> encode_semantics(const std::vector<std::int32_t>&, const Mat<float>&,
                                     const NewsEncoderParams<float>&, const ModelDims&,
                                     CnnTrace<float>*);
template Vec<double> encode_semantics(const std::vector<std::int32_t>&, const Mat<double>&,
                                      const NewsEncoderParams<double>&, const ModelDims&,
                                      CnnTrace<double>*);
template FuseResult<float> fuse_views(const Vec<float>&, const Vec<float>&, const Vec<float>&,
                                      const NewsEncoderParams<float>&, const std::array<bool, 3>&);
template FuseResult<double> fuse_views(const Vec<double>&, const Vec<double>&, const Vec<double>&,
                                       const NewsEncoderParams<double>&,
                                       const std::array<bool, 3>&);
template NewsForward<float> encode_news(const NewsState&, const PersonalizedView&,
                                        const EncodingTables<float>&,
                                        const NewsEncoderParams<float>&, const ModelDims&);
template NewsForward<double> encode_news(const NewsState&, const PersonalizedView&,
                                         const EncodingTables<double>&,
                                         const NewsEncoderParams<double>&, const ModelDims&);
template void news_backward(const NewsEncoderParams<float>&, const NewsForward<float>&,
                            const Vec<float>&, NewsEncoderParams<float>&);
template void news_backward(const NewsEncoderParams<double>&, const NewsForward<double>&,
                            const Vec<double>&, NewsEncoderParams<double>&);

}  // namespace igniter
