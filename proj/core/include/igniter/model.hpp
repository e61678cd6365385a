#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "igniter/dims.hpp"
#include "igniter/news_encoder.hpp"
#include "igniter/user_encoder.hpp"

namespace igniter {

/// All trainable tensors. Frozen inputs (word vectors, node embeddings) live
/// in EncodingTables and never receive gradients.
template <class S>
struct ModelParams {
  ModelDims dims;
  NewsEncoderParams<S> news;
  UserEncoderParams<S> user;

  static ModelParams sized(const ModelDims& d) {
    d.validate();
    ModelParams p;
    p.dims = d;
    p.news = NewsEncoderParams<S>::sized(d);
    p.user = UserEncoderParams<S>::sized(d);
    return p;
  }
};

namespace detail {

template <class P, class V>
void visit_lstm(P& p, const std::string& prefix, V&& v) {
  v(prefix + ".w_f", p.w_f);
  v(prefix + ".w_i", p.w_i);
  v(prefix + ".w_o", p.w_o);
  v(prefix + ".w_c", p.w_c);
  v(prefix + ".b_f", p.b_f);
  v(prefix + ".b_i", p.b_i);
  v(prefix + ".b_o", p.b_o);
  v(prefix + ".b_c", p.b_c);
}

template <class P, class V>
void visit_attn(P& p, const std::string& prefix, V&& v) {
  v(prefix + ".w", p.w);
  v(prefix + ".b", p.b);
  v(prefix + ".q", p.q);
}

}  // namespace detail

/// Visits every trainable tensor in a fixed order with stable names. The
/// visitor is called as v(name, Mat<S>&) or v(name, Vec<S>&) (const-qualified
/// when the model is const).
template <class M, class V>
void visit_tensors(M& model, V&& v) {
  v("news.cnn.filters", model.news.cnn_filters);
  v("news.cnn.bias", model.news.cnn_bias);
  detail::visit_lstm(model.news.diff_lstm, "news.diff_lstm", v);
  detail::visit_attn(model.news.diff_attn, "news.diff_attn", v);
  v("news.proj_s", model.news.proj_s);
  v("news.proj_s_bias", model.news.proj_s_bias);
  v("news.proj_v", model.news.proj_v);
  v("news.proj_v_bias", model.news.proj_v_bias);
  detail::visit_attn(model.news.view_attn_s, "news.view_attn_s", v);
  detail::visit_attn(model.news.view_attn_v, "news.view_attn_v", v);
  detail::visit_attn(model.news.view_attn_a, "news.view_attn_a", v);
  detail::visit_lstm(model.user.fwd_lstm, "user.fwd_lstm", v);
  detail::visit_lstm(model.user.bwd_lstm, "user.bwd_lstm", v);
  detail::visit_attn(model.user.hist_attn, "user.hist_attn", v);
}

/// Flat view of one tensor's storage (column-major for matrices).
template <class S>
struct TensorView {
  std::string name;
  S* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;  // 0 marks a vector
  Eigen::Index size = 0;
};

template <class S>
std::vector<TensorView<S>> tensor_views(ModelParams<S>& model) {
  std::vector<TensorView<S>> views;
  visit_tensors(model, [&views](const std::string& name, auto& t) {
    using T = std::decay_t<decltype(t)>;
    TensorView<S> v;
    v.name = name;
    v.data = t.data();
    v.size = t.size();
    v.rows = t.rows();
    v.cols = std::is_same_v<T, Vec<S>> ? 0 : t.cols();
    views.push_back(std::move(v));
  });
  return views;
}

template <class S>
void set_zero(ModelParams<S>& model) {
  visit_tensors(model, [](const std::string&, auto& t) { t.setZero(); });
}

template <class S>
std::int64_t parameter_count(const ModelParams<S>& model) {
  std::int64_t n = 0;
  visit_tensors(model, [&n](const std::string&, const auto& t) { n += t.size(); });
  return n;
}

/// Glorot-uniform matrices, zero biases, +-1/sqrt(d) attention queries.
template <class S>
ModelParams<S> init_model(const ModelDims& dims, std::uint64_t seed);

void save_checkpoint(const ModelParams<float>& model, const std::string& path);
void save_checkpoint(const ModelParams<double>& model, const std::string& path);

ModelDims read_checkpoint_dims(const std::string& path);

/// Fills a pre-sized model from the archive. Throws with the full list of
/// offending tensor names on any shape or name mismatch.
template <class S>
void load_checkpoint_into(ModelParams<S>& model, const std::string& path);

template <class S>
ModelParams<S> load_checkpoint(const std::string& path);

}  // namespace igniter
