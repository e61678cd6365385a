#include "igniter/user_encoder.hpp"

#include "igniter/errors.hpp"

namespace igniter {

template <class S>
BiLstmForward<S> bilstm_forward(const UserEncoderParams<S>& p, const Mat<S>& history,
                                int s_real) {
  if (s_real < 1) throw error("user encoder needs a non-empty history");
  const int s_total = static_cast<int>(history.cols());
  const int u_b = p.fwd_lstm.units();

  BiLstmForward<S> r;
  r.s_real = s_real;
  r.s_total = s_total;

  const Mat<S> prefix = history.leftCols(s_real);
  Mat<S> reversed(history.rows(), s_real);
  for (int j = 0; j < s_real; ++j) reversed.col(j) = history.col(s_real - 1 - j);

  r.fwd = lstm_forward(p.fwd_lstm, prefix);
  r.bwd = lstm_forward(p.bwd_lstm, reversed);

  r.stacked = Mat<S>::Zero(u_b, 2 * s_total);
  r.mask.assign(static_cast<std::size_t>(2 * s_total), 0);
  for (int j = 0; j < s_real; ++j) {
    r.stacked.col(j) = r.fwd.h.col(j);
    r.stacked.col(s_total + j) = r.bwd.h.col(s_real - 1 - j);  // time order
    r.mask[static_cast<std::size_t>(j)] = 1;
    r.mask[static_cast<std::size_t>(s_total + j)] = 1;
  }
  return r;
}

template <class S>
UserForward<S> encode_user(const UserEncoderParams<S>& p, const Mat<S>& history, int s_real) {
  UserForward<S> r;
  r.bilstm = bilstm_forward(p, history, s_real);
  auto attn = attend_sequence(p.hist_attn, r.bilstm.stacked, r.bilstm.mask);
  r.out.e_u = std::move(attn.context);
  r.out.history_weights = attn.trace.weights;
  r.attn = std::move(attn.trace);
  return r;
}

template <class S>
Mat<S> user_backward(const UserEncoderParams<S>& p, const UserForward<S>& fwd,
                     const Vec<S>& d_e_u, UserEncoderParams<S>& grads) {
  const int s_real = fwd.bilstm.s_real;
  const int s_total = fwd.bilstm.s_total;
  const int g = p.fwd_lstm.input_dim();

  Mat<S> d_stacked = Mat<S>::Zero(fwd.bilstm.stacked.rows(), fwd.bilstm.stacked.cols());
  attend_backward(p.hist_attn, fwd.bilstm.stacked, fwd.attn, d_e_u, grads.hist_attn, d_stacked);

  Mat<S> d_fwd_h = d_stacked.leftCols(s_real);
  Mat<S> d_bwd_h(d_stacked.rows(), s_real);
  for (int j = 0; j < s_real; ++j) {
    d_bwd_h.col(j) = d_stacked.col(s_total + (s_real - 1 - j));
  }

  Mat<S> d_fwd_in;
  Mat<S> d_bwd_in;
  lstm_backward(p.fwd_lstm, fwd.bilstm.fwd, d_fwd_h, grads.fwd_lstm, &d_fwd_in);
  lstm_backward(p.bwd_lstm, fwd.bilstm.bwd, d_bwd_h, grads.bwd_lstm, &d_bwd_in);

  Mat<S> d_history = Mat<S>::Zero(g, s_total);
  for (int j = 0; j < s_real; ++j) {
    d_history.col(j) = d_fwd_in.col(j) + d_bwd_in.col(s_real - 1 - j);
  }
  return d_history;
}

template struct UserEncoderParams<float>;
template struct UserEncoderParams<double>;
template BiLstmForward<float> bilstm_forward(const UserEncoderParams<float>&, const Mat<float>&,
                                             int);
template BiLstmForward<double> bilstm_forward(const UserEncoderParams<double>&,
                                              const Mat<double>&, int);
template UserForward<float> encode_user(const UserEncoderParams<float>&, const Mat<float>&, int);
template UserForward<double> encode_user(const UserEncoderParams<double>&, const Mat<double>&,
                                         int);
template Mat<float> user_backward(const UserEncoderParams<float>&, const UserForward<float>&,
                                  const Vec<float>&, UserEncoderParams<float>&);
template Mat<double> user_backward(const UserEncoderParams<double>&, const UserForward<double>&,
                                   const Vec<double>&, UserEncoderParams<double>&);

}  // namespace igniter
