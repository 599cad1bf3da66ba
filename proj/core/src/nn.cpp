#include "emev/nn.hpp"

#include <cmath>

#include "emev/errors.hpp"

namespace emev {

Var dense_forward(Tape& tape, Var x, Parameter& weights, Parameter& bias,
                  Activation act, float leaky_slope) {
    const Tensor& tx = tape.value(x);
    bool vec = tx.rank() == 1;
    if (tx.rank() > 2) {
        throw DimensionError("dense_forward: input must be rank-1 or rank-2, got " + tx.shape_str());
    }
    if (weights.value.rank() != 2) {
        throw DimensionError("dense_forward: weights '" + weights.name + "' must be rank-2, got " +
                             weights.value.shape_str());
    }
    int64_t l_in = vec ? tx.shape[0] : tx.shape[1];
    if (weights.value.shape[0] != l_in) {
        throw DimensionError("dense_forward: weights '" + weights.name + "' " +
                             weights.value.shape_str() + " incompatible with input length " +
                             std::to_string(l_in));
    }
    if (bias.value.rank() != 1 || bias.value.shape[0] != weights.value.shape[1]) {
        throw DimensionError("dense_forward: bias '" + bias.name + "' " + bias.value.shape_str() +
                             " incompatible with weights " + weights.value.shape_str());
    }
    Var xm = vec ? tape.reshape(x, {1, l_in}) : x;
    Var y = tape.matmul(xm, tape.param(weights));
    y = tape.add_rowvec(y, tape.param(bias));
    y = tape.activation(y, act, leaky_slope);
    if (vec) y = tape.reshape(y, {weights.value.shape[1]});
    return y;
}

Var conv2d_forward(Tape& tape, Var x, Parameter& filters, Parameter& bias,
                   Activation act, float leaky_slope) {
    Var y = tape.conv2d(x, tape.param(filters), tape.param(bias));
    return tape.activation(y, act, leaky_slope);
}

Var conv3d_forward(Tape& tape, Var x, Parameter& filters, Parameter& bias,
                   Activation act, float leaky_slope) {
    Var y = tape.conv3d(x, tape.param(filters), tape.param(bias));
    return tape.activation(y, act, leaky_slope);
}

Var multi_head_attention(Tape& tape, Var query, Var key, Var value,
                         int heads, int key_dim, AttentionParams& params) {
    if (heads <= 0 || key_dim <= 0) {
        throw ConfigError("multi_head_attention: heads and key_dim must be positive");
    }
    const Tensor& tq = tape.value(query);
    const Tensor& tk = tape.value(key);
    const Tensor& tv = tape.value(value);
    if (tq.rank() != 2 || tk.rank() != 2 || tv.rank() != 2) {
        throw DimensionError("multi_head_attention: inputs must be rank-2 sequences");
    }
    if (tk.shape[0] != tv.shape[0]) {
        throw DimensionError("multi_head_attention: key length " + std::to_string(tk.shape[0]) +
                             " != value length " + std::to_string(tv.shape[0]));
    }
    int64_t d_model = tq.shape[1];
    int64_t proj = static_cast<int64_t>(heads) * key_dim;
    if (params.wq.value.shape != std::vector<int64_t>{d_model, proj}) {
        throw DimensionError("multi_head_attention: wq " + params.wq.value.shape_str() +
                             " incompatible with d_model " + std::to_string(d_model));
    }
    Var q = tape.matmul(query, tape.param(params.wq));
    Var k = tape.matmul(key, tape.param(params.wk));
    Var v = tape.matmul(value, tape.param(params.wv));
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(key_dim));
    std::vector<Var> head_outs;
    head_outs.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        int64_t c0 = static_cast<int64_t>(h) * key_dim;
        Var qh = tape.slice_cols(q, c0, c0 + key_dim);
        Var kh = tape.slice_cols(k, c0, c0 + key_dim);
        Var vh = tape.slice_cols(v, c0, c0 + key_dim);
        Var scores = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt);
        Var attn = tape.softmax_rows(scores);
        head_outs.push_back(tape.matmul(attn, vh));
    }
    Var z = heads == 1 ? head_outs[0] : tape.concat_cols(head_outs);
    return tape.matmul(z, tape.param(params.wo));
}

Var mse_joint_loss(Tape& tape, Var v_hat, const Tensor& v, Var s_hat,
                   const Tensor& s, double w_v, double w_s) {
    if (w_v < 0.0 || w_s < 0.0 || std::abs(w_v + w_s - 1.0) > 1e-9) {
        throw ConfigError("mse_joint_loss: weights must be non-negative and sum to 1");
    }
    Var lv = tape.mse_to_target(v_hat, v);
    Var ls = tape.mse_to_target(s_hat, s);
    return tape.add_scaled(lv, w_v, ls, w_s);
}

void init_uniform_fan_in(Parameter& p, int64_t fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
    for (float& v : p.value.data) v = static_cast<float>(rng.uniform(-bound, bound));
}

}  // namespace emev
