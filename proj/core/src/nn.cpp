#include "igniter/nn.hpp"

#include <cmath>

#include "igniter/errors.hpp"

namespace igniter {

template <class S>
LstmTrace<S> lstm_forward(const LstmParams<S>& p, const Mat<S>& inputs) {
  const int u = p.units();
  const int in = p.input_dim();
  const Eigen::Index steps = inputs.cols();
  LstmTrace<S> t;
  t.inputs = inputs;
  for (Mat<S>* m : {&t.f, &t.i, &t.o, &t.g, &t.c, &t.tc, &t.h}) {
    m->resize(u, steps);
  }
  Vec<S> z(u + in);
  for (Eigen::Index step = 0; step < steps; ++step) {
    if (step == 0) {
      z.head(u).setZero();
    } else {
      z.head(u) = t.h.col(step - 1);
    }
    z.tail(in) = inputs.col(step);
    t.f.col(step) = (p.w_f.transpose() * z + p.b_f).unaryExpr([](S x) { return logistic(x); });
    t.i.col(step) = (p.w_i.transpose() * z + p.b_i).unaryExpr([](S x) { return logistic(x); });
    t.o.col(step) = (p.w_o.transpose() * z + p.b_o).unaryExpr([](S x) { return logistic(x); });
    t.g.col(step) = (p.w_c.transpose() * z + p.b_c).array().tanh().matrix();
    if (step == 0) {
      t.c.col(step) = t.i.col(step).cwiseProduct(t.g.col(step));
    } else {
      t.c.col(step) = t.f.col(step).cwiseProduct(t.c.col(step - 1)) +
                      t.i.col(step).cwiseProduct(t.g.col(step));
    }
    t.tc.col(step) = t.c.col(step).array().tanh().matrix();
    t.h.col(step) = t.o.col(step).cwiseProduct(t.tc.col(step));
  }
  return t;
}

template <class S>
void lstm_backward(const LstmParams<S>& p, const LstmTrace<S>& trace, const Mat<S>& d_hidden,
                   LstmParams<S>& grads, Mat<S>* d_inputs) {
  const int u = p.units();
  const int in = p.input_dim();
  const Eigen::Index steps = trace.inputs.cols();
  if (d_inputs != nullptr) d_inputs->setZero(in, steps);

  Vec<S> dh_next = Vec<S>::Zero(u);
  Vec<S> dc_next = Vec<S>::Zero(u);
  Vec<S> z(u + in);
  for (Eigen::Index step = steps - 1; step >= 0; --step) {
    const Vec<S> dh = d_hidden.col(step) + dh_next;
    const auto f = trace.f.col(step);
    const auto i = trace.i.col(step);
    const auto o = trace.o.col(step);
    const auto g = trace.g.col(step);
    const auto tc = trace.tc.col(step);

    const Vec<S> d_o = dh.cwiseProduct(tc);
    Vec<S> dc = dc_next + (dh.cwiseProduct(o).array() * (S(1) - tc.array().square())).matrix();
    const Vec<S> d_i = dc.cwiseProduct(g);
    const Vec<S> d_g = dc.cwiseProduct(i);
    Vec<S> d_f;
    if (step == 0) {
      d_f = Vec<S>::Zero(u);
    } else {
      d_f = dc.cwiseProduct(trace.c.col(step - 1));
    }

    const Vec<S> dz_f = (d_f.array() * f.array() * (S(1) - f.array())).matrix();
    const Vec<S> dz_i = (d_i.array() * i.array() * (S(1) - i.array())).matrix();
    const Vec<S> dz_o = (d_o.array() * o.array() * (S(1) - o.array())).matrix();
    const Vec<S> dz_g = (d_g.array() * (S(1) - g.array().square())).matrix();

    if (step == 0) {
      z.head(u).setZero();
    } else {
      z.head(u) = trace.h.col(step - 1);
    }
    z.tail(in) = trace.inputs.col(step);

    grads.w_f.noalias() += z * dz_f.transpose();
    grads.w_i.noalias() += z * dz_i.transpose();
    grads.w_o.noalias() += z * dz_o.transpose();
    grads.w_c.noalias() += z * dz_g.transpose();
    grads.b_f += dz_f;
    grads.b_i += dz_i;
    grads.b_o += dz_o;
    grads.b_c += dz_g;

    const Vec<S> dz = p.w_f * dz_f + p.w_i * dz_i + p.w_o * dz_o + p.w_c * dz_g;
    dh_next = dz.head(u);
    if (d_inputs != nullptr) d_inputs->col(step) = dz.tail(in);
    dc_next = dc.cwiseProduct(f);
  }
}

template <class S>
AttnResult<S> attend_sequence(const AttnParams<S>& p, const Mat<S>& hiddens, const Mask& mask) {
  const Eigen::Index steps = hiddens.cols();
  bool any = false;
  for (Eigen::Index i = 0; i < steps; ++i) any |= mask[static_cast<std::size_t>(i)] != 0;
  if (!any) throw error("attention over a fully masked sequence");

  AttnResult<S> r;
  r.trace.mask = mask;
  r.trace.proj_tanh = ((p.w * hiddens).colwise() + p.b).array().tanh().matrix();
  Vec<S> scores = r.trace.proj_tanh.transpose() * p.q;
  r.trace.weights = masked_softmax(scores, mask);
  r.context = hiddens * r.trace.weights;
  return r;
}

template <class S>
void attend_backward(const AttnParams<S>& p, const Mat<S>& hiddens, const AttnTrace<S>& trace,
                     const Vec<S>& d_context, AttnParams<S>& grads, Mat<S>& d_hiddens) {
  const Eigen::Index steps = hiddens.cols();
  const Vec<S>& w = trace.weights;

  d_hiddens.noalias() += d_context * w.transpose();
  Vec<S> d_w = hiddens.transpose() * d_context;

  // Softmax backward restricted to unmasked positions.
  S dot = S(0);
  for (Eigen::Index i = 0; i < steps; ++i) dot += w[i] * d_w[i];
  Vec<S> d_scores(steps);
  for (Eigen::Index i = 0; i < steps; ++i) {
    d_scores[i] = trace.mask[static_cast<std::size_t>(i)] ? w[i] * (d_w[i] - dot) : S(0);
  }

  grads.q.noalias() += trace.proj_tanh * d_scores;
  Mat<S> d_pre = ((p.q * d_scores.transpose()).array() *
                  (S(1) - trace.proj_tanh.array().square()))
                     .matrix();
  grads.w.noalias() += d_pre * hiddens.transpose();
  grads.b += d_pre.rowwise().sum();
  d_hiddens.noalias() += p.w.transpose() * d_pre;
}

template LstmTrace<float> lstm_forward(const LstmParams<float>&, const Mat<float>&);
template LstmTrace<double> lstm_forward(const LstmParams<double>&, const Mat<double>&);
template void lstm_backward(const LstmParams<float>&, const LstmTrace<float>&, const Mat<float>&,
                            LstmParams<float>&, Mat<float>*);
template void lstm_backward(const LstmParams<double>&, const LstmTrace<double>&,
                            const Mat<double>&, LstmParams<double>&, Mat<double>*);
template AttnResult<float> attend_sequence(const AttnParams<float>&, const Mat<float>&,
                                           const Mask&);
template AttnResult<double> attend_sequence(const AttnParams<double>&, const Mat<double>&,
                                            const Mask&);
template void attend_backward(const AttnParams<float>&, const Mat<float>&,
                              const AttnTrace<float>&, const Vec<float>&, AttnParams<float>&,
                              Mat<float>&);
template void attend_backward(const AttnParams<double>&, const Mat<double>&,
                              const AttnTrace<double>&, const Vec<double>&, AttnParams<double>&,
                              Mat<double>&);

}  // namespace igniter
