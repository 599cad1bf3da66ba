#pragma once

#include "emev/autodiff.hpp"
#include "emev/rng.hpp"

namespace emev {

// Parameters of one multi-head attention layer. Projections map
// d_model -> heads*key_dim (q, k, v) and heads*key_dim -> d_model (out).
struct AttentionParams {
    Parameter wq, wk, wv, wo;
};

// x: [L_in] or [B, L_in]; weights [L_in, L_out]; bias [L_out].
Var dense_forward(Tape& tape, Var x, Parameter& weights, Parameter& bias,
                  Activation act, float leaky_slope = 0.01f);

Var conv2d_forward(Tape& tape, Var x, Parameter& filters, Parameter& bias,
                   Activation act, float leaky_slope = 0.01f);

Var conv3d_forward(Tape& tape, Var x, Parameter& filters, Parameter& bias,
                   Activation act, float leaky_slope = 0.01f);

// Scaled dot-product attention: per head softmax(Q K^T / sqrt(key_dim)) V,
// heads concatenated and output-projected. query [L_q, d_model],
// key/value [L_k, d_model].
Var multi_head_attention(Tape& tape, Var query, Var key, Var value,
                         int heads, int key_dim, AttentionParams& params);

// w_v * mean((V - Vhat)^2) + w_s * mean((S - Shat)^2); weights must be
// non-negative and sum to 1.
Var mse_joint_loss(Tape& tape, Var v_hat, const Tensor& v, Var s_hat,
                   const Tensor& s, double w_v, double w_s);

// Uniform fan-in init: entries ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_uniform_fan_in(Parameter& p, int64_t fan_in, Rng& rng);

}  // namespace emev
