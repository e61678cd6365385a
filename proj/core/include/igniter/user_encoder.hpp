#pragma once

#include "igniter/dims.hpp"
#include "igniter/nn.hpp"

namespace igniter {

template <class S>
struct UserEncoderParams {
  LstmParams<S> fwd_lstm;  // input g, units u_b
  LstmParams<S> bwd_lstm;
  AttnParams<S> hist_attn;  // u_b

  static UserEncoderParams sized(const ModelDims& d) {
    UserEncoderParams p;
    p.fwd_lstm = LstmParams<S>::sized(d.g, d.u_b());
    p.bwd_lstm = LstmParams<S>::sized(d.g, d.u_b());
    p.hist_attn = AttnParams<S>::sized(d.u_b());
    return p;
  }
};

template <class S>
struct UserEncoding {
  Vec<S> e_u;              // u_b
  Vec<S> history_weights;  // 2 * s_total; exactly zero on padded slots
};

/// Both direction traces plus the stacked 2s hidden-state sequence
/// [h_fwd(0..s-1), h_bwd(0..s-1)] with columns for padded slots zeroed.
template <class S>
struct BiLstmForward {
  LstmTrace<S> fwd, bwd;  // bwd runs over the reversed real prefix
  Mat<S> stacked;         // u_b x (2 * s_total)
  Mask mask;              // 2 * s_total
  int s_real = 0;
  int s_total = 0;
};

/// Runs the forward LSTM over columns [0, s_real) of `history` and the
/// backward LSTM over the same columns reversed; trailing padded columns are
/// never fed through either recurrence. Throws on s_real == 0.
template <class S>
BiLstmForward<S> bilstm_forward(const UserEncoderParams<S>& p, const Mat<S>& history, int s_real);

template <class S>
struct UserForward {
  BiLstmForward<S> bilstm;
  AttnTrace<S> attn;
  UserEncoding<S> out;
};

/// Additive attention over the 2s BiLSTM states.
template <class S>
UserForward<S> encode_user(const UserEncoderParams<S>& p, const Mat<S>& history, int s_real);

/// Returns gradients w.r.t. the history encodings (g x s_total, zero columns
/// past s_real); parameter gradients accumulate into `grads`.
template <class S>
Mat<S> user_backward(const UserEncoderParams<S>& p, const UserForward<S>& fwd,
                     const Vec<S>& d_e_u, UserEncoderParams<S>& grads);

}  // namespace igniter
