#pragma once

#include "igniter/linalg.hpp"

namespace igniter {

/// Additive attention: score_i = q . tanh(w h_i + b).
template <class S>
struct AttnParams {
  Mat<S> w;  // d x d
  Vec<S> b;  // d
  Vec<S> q;  // d

  static AttnParams sized(int d) {
    AttnParams p;
    p.w = Mat<S>::Zero(d, d);
    p.b = Vec<S>::Zero(d);
    p.q = Vec<S>::Zero(d);
    return p;
  }
};

/// Gate weights are (units + input_dim) x units and applied as
/// gate = w^T [h_prev; x] + b.
template <class S>
struct LstmParams {
  Mat<S> w_f, w_i, w_o, w_c;
  Vec<S> b_f, b_i, b_o, b_c;

  int units() const { return static_cast<int>(b_f.size()); }
  int input_dim() const { return static_cast<int>(w_f.rows()) - units(); }

  static LstmParams sized(int input_dim, int units) {
    LstmParams p;
    for (Mat<S>* w : {&p.w_f, &p.w_i, &p.w_o, &p.w_c}) *w = Mat<S>::Zero(units + input_dim, units);
    for (Vec<S>* b : {&p.b_f, &p.b_i, &p.b_o, &p.b_c}) *b = Vec<S>::Zero(units);
    return p;
  }
};

/// Per-step activations kept for backpropagation. Columns are time steps.
template <class S>
struct LstmTrace {
  Mat<S> inputs;             // input_dim x T
  Mat<S> f, i, o, g;         // units x T (post-activation gates, g = block input)
  Mat<S> c, tc, h;           // cell, tanh(cell), hidden
};

template <class S>
struct AttnTrace {
  Mat<S> proj_tanh;  // d x T: tanh(w h_i + b)
  Vec<S> weights;    // T; exactly zero at masked positions
  Mask mask;
};

/// Runs the gated recurrence over every column of `inputs` from zero state.
template <class S>
LstmTrace<S> lstm_forward(const LstmParams<S>& p, const Mat<S>& inputs);

/// Accumulates parameter gradients for upstream gradients d_hidden (units x T,
/// one column per h_t). If d_inputs is non-null it receives the input
/// gradients.
template <class S>
void lstm_backward(const LstmParams<S>& p, const LstmTrace<S>& trace, const Mat<S>& d_hidden,
                   LstmParams<S>& grads, Mat<S>* d_inputs);

template <class S>
struct AttnResult {
  Vec<S> context;  // d
  AttnTrace<S> trace;
};

/// Additive attention over the columns of `hiddens`; masked positions carry
/// exactly zero weight. Throws if every position is masked.
template <class S>
AttnResult<S> attend_sequence(const AttnParams<S>& p, const Mat<S>& hiddens, const Mask& mask);

/// Accumulates parameter gradients and adds the hidden-state gradients into
/// d_hiddens (which must be pre-sized d x T).
template <class S>
void attend_backward(const AttnParams<S>& p, const Mat<S>& hiddens, const AttnTrace<S>& trace,
                     const Vec<S>& d_context, AttnParams<S>& grads, Mat<S>& d_hiddens);

}  // namespace igniter
