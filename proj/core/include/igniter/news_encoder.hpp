#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "igniter/cascade_view.hpp"
#include "igniter/corpus.hpp"
#include "igniter/dims.hpp"
#include "igniter/nn.hpp"

namespace igniter {

/// Frozen lookup tables used by the encoders: pre-trained word vectors and the
/// reposter embeddings from the influence model, both cast to the working
/// scalar type. PAD rows are all-zero.
template <class S>
struct EncodingTables {
  Mat<S> words;  // (vocab + 2) x g1
  Mat<S> nodes;  // |V| x g2
};

template <class S>
struct NewsEncoderParams {
  Mat<S> cnn_filters;  // gamma x (g1 * l); row r is filter r, token-major blocks
  Vec<S> cnn_bias;     // gamma
  LstmParams<S> diff_lstm;
  AttnParams<S> diff_attn;
  Mat<S> proj_s;       // gamma x g, applied transposed
  Vec<S> proj_s_bias;  // g
  Mat<S> proj_v;       // u x g, applied transposed
  Vec<S> proj_v_bias;  // g
  AttnParams<S> view_attn_s, view_attn_v, view_attn_a;

  static NewsEncoderParams sized(const ModelDims& d);
};

enum ViewChannel { kViewSemantic = 0, kViewDiffusion = 1, kViewAdoption = 2 };

template <class S>
struct NewsEncoding {
  Vec<S> e_s;           // gamma
  Vec<S> e_v;           // u (zero when the diffusion channel is absent)
  Vec<S> e_a;           // d_max
  Vec<S> e_n;           // g
  Vec<S> view_weights;  // 3, zero for absent channels, active entries sum to 1
  Vec<S> node_weights;  // m, exactly zero on padding
};

template <class S>
struct CnnTrace {
  Mat<S> windows;           // (g1*l) x (n - l + 1)
  Mat<S> feat;              // gamma x (n - l + 1), post-ReLU
  std::vector<int> argmax;  // winning position per filter
};

template <class S>
struct FuseTrace {
  std::array<bool, 3> active = {true, true, true};
  Vec<S> aligned_s, aligned_v, aligned_a;  // g each
  Vec<S> tanh_s, tanh_v, tanh_a;           // g each
  Vec<S> weights;                          // 3
};

/// Full forward record of one news encoding, kept for backpropagation.
template <class S>
struct NewsForward {
  NewsEncoding<S> out;
  CnnTrace<S> cnn;
  bool has_diffusion = false;
  Mat<S> node_inputs;  // g2 x m
  Mask node_mask;
  LstmTrace<S> lstm;
  AttnTrace<S> diff_attn;
  FuseTrace<S> fuse;
};

/// Title CNN: per-filter ReLU feature map over l-token windows, max-pooled.
template <class S>
Vec<S> encode_semantics(const std::vector<std::int32_t>& tokens, const Mat<S>& words,
                        const NewsEncoderParams<S>& p, const ModelDims& dims,
                        CnnTrace<S>* trace = nullptr);

/// Calibrated adoption vector: f(a)/delta with f(a) = ln(1 + ln(1 + a)) and
/// delta = elapsed units floored at 1; zero-padded to d_max.
Vec<double> featurize_adoptions(const AdoptionHistogram& hist, Timestamp observe_until, int d_max);

template <class S>
struct FuseResult {
  Vec<S> e_n;
  FuseTrace<S> trace;
};

/// Aligns the three views to R^g (affine for e_s/e_v, zero-padding for e_a),
/// scores each active view with its own additive-attention head, and returns
/// the softmax-weighted combination.
template <class S>
FuseResult<S> fuse_views(const Vec<S>& e_s, const Vec<S>& e_v, const Vec<S>& e_a,
                         const NewsEncoderParams<S>& p, const std::array<bool, 3>& active);

template <class S>
NewsForward<S> encode_news(const NewsState& state, const PersonalizedView& view,
                           const EncodingTables<S>& tables, const NewsEncoderParams<S>& p,
                           const ModelDims& dims);

/// Reverse-mode of encode_news for upstream gradient d_e_n. Parameter
/// gradients accumulate into `grads`; frozen tables receive none.
template <class S>
void news_backward(const NewsEncoderParams<S>& p, const NewsForward<S>& fwd, const Vec<S>& d_e_n,
                   NewsEncoderParams<S>& grads);

}  // namespace igniter
