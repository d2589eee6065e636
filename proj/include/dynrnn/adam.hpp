#pragma once

#include <cmath>

#include "dynrnn/rnn.hpp"

namespace dynrnn {

struct AdamState {
  RnnParams m;  // first-moment accumulator
  RnnParams v;  // second-moment accumulator
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState fresh(const RnnConfig& c) {
    AdamState s;
    s.m = RnnParams::zeros(c);
    s.v = RnnParams::zeros(c);
    s.beta1 = c.adam_beta1;
    s.beta2 = c.adam_beta2;
    s.epsilon = c.adam_epsilon;
    return s;
  }
};

// Standard bias-corrected ADAM update, epsilon outside the square root:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,  t <- t+1,
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps).
inline void adam_step(RnnParams& params, const RnnParams& grads, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw ConfigError("adam_step: lr must be > 0");
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double eps = state.epsilon;

  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v.array() = b2 * v.array() + (1.0 - b2) * g.array().square();
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  };

  update(params.w_in, grads.w_in, state.m.w_in, state.v.w_in);
  for (std::size_t i = 0; i < params.w_rec.size(); ++i)
    update(params.w_rec[i], grads.w_rec[i], state.m.w_rec[i], state.v.w_rec[i]);
  for (std::size_t i = 0; i < params.w_stack.size(); ++i)
    update(params.w_stack[i], grads.w_stack[i], state.m.w_stack[i], state.v.w_stack[i]);
  update(params.w_out, grads.w_out, state.m.w_out, state.v.w_out);
  update(params.b_in, grads.b_in, state.m.b_in, state.v.b_in);
  for (std::size_t i = 0; i < params.b_rec.size(); ++i)
    update(params.b_rec[i], grads.b_rec[i], state.m.b_rec[i], state.v.b_rec[i]);
  for (std::size_t i = 0; i < params.b_stack.size(); ++i)
    update(params.b_stack[i], grads.b_stack[i], state.m.b_stack[i], state.v.b_stack[i]);
  update(params.b_out, grads.b_out, state.m.b_out, state.v.b_out);
}

}  // namespace dynrnn
