#pragma once

#include "igniter/errors.hpp"

namespace igniter {

/// Model dimensions and channel switches. The fused dimension g doubles as the
/// user-encoder hidden width so user and news encodings share a space.
struct ModelDims {
  int g = 128;       // fused news/user encoding dimension
  int g1 = 100;      // word embedding dimension
  int g2 = 50;       // node embedding dimension
  int u = 128;       // diffusion LSTM units
  int gamma = 120;   // CNN filter count
  int l = 3;         // CNN filter length
  int m = 30;        // personalized view size
  int n_max = 20;    // title length
  int d_max = 120;   // adoption histogram length
  int s_max = 20;    // max history length per window
  bool use_diffusion = true;  // false = drop the V_t channel
  bool use_adoption = true;   // false = drop the A_t channel

  int u_b() const { return g; }

  void validate() const {
    if (g < d_max) {
      throw config_error("g (" + std::to_string(g) + ") must be >= d_max (" +
                         std::to_string(d_max) + ") so adoption vectors can be zero-padded");
    }
    for (const int v : {g, g1, g2, u, gamma, l, m, n_max, d_max, s_max}) {
      if (v <= 0) throw config_error("all model dimensions must be positive");
    }
    if (n_max < l) throw config_error("n_max must be >= CNN filter length l");
  }
};

}  // namespace igniter
