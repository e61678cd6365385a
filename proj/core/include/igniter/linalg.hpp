#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <vector>

namespace igniter {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Mask = std::vector<std::uint8_t>;  // 1 = real position, 0 = padding

template <class S>
inline S logistic(S x) {
  if (x >= S(0)) {
    return S(1) / (S(1) + std::exp(-x));
  }
  const S e = std::exp(x);
  return e / (S(1) + e);
}

/// Numerically stable softmax (max subtraction), in place.
template <class S>
inline void softmax_inplace(Vec<S>& v) {
  const S m = v.maxCoeff();
  v = (v.array() - m).exp();
  v /= v.sum();
}

/// Softmax over unmasked entries; masked entries get exactly zero weight.
template <class S>
inline Vec<S> masked_softmax(const Vec<S>& scores, const Mask& keep) {
  Vec<S> out = Vec<S>::Zero(scores.size());
  S m = -std::numeric_limits<S>::infinity();
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (keep[static_cast<std::size_t>(i)] && scores[i] > m) m = scores[i];
  }
  S sum = S(0);
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (keep[static_cast<std::size_t>(i)]) {
      out[i] = std::exp(scores[i] - m);
      sum += out[i];
    }
  }
  out /= sum;
  return out;
}

template <class S>
inline S log_sum_exp(const Vec<S>& v) {
  const S m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace igniter
