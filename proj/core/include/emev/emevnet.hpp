#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "emev/config.hpp"
#include "emev/nn.hpp"
#include "emev/serialize.hpp"

namespace emev {

// Architecture knobs for one autoencoder. Defaults are the desk-scale
// configuration; paper-scale is expressible through the same fields.
struct EmevConfig {
    int n_rb = 4, n_t = 8, n_r = 2;
    int l_xi_v = 128, l_xi_s = 32, l_eps = 16;
    int heads = 2, key_dim = 3;
    int attention_depth = 5;  // 1 cross + (depth-1) self blocks
    int d_model = 8;          // sequence width for the attention view
    int enc_width1 = 2, enc_width2 = 8;
    std::vector<int> dec_res_widths{2, 8, 2};
    float leaky_slope = 0.01f;
    float s_scale = 1.0f;
    double w_v = 0.5, w_s = 0.5;

    int64_t v_elems() const { return static_cast<int64_t>(n_rb) * n_t * n_t * 2; }
    int64_t s_elems() const { return static_cast<int64_t>(n_rb) * n_r; }
    int64_t h_elems() const { return static_cast<int64_t>(n_rb) * n_r * n_t * 2; }

    void validate() const;
    KvConfig to_kv() const;
    static EmevConfig from_kv(const KvConfig& kv);
};

struct CodewordLength {
    int length = 0;
    bool floored = false;  // beta_h did not divide the H element count
};

// L_eps = floor(2 N_RB N_r N_t / beta_h); the channel id travels out of band.
CodewordLength codeword_length(double beta_h, int n_rb, int n_r, int n_t);

// beta_emev = [N_RB (2 N_t^2 + N_r)] / [2 N_RB N_r N_t] * beta_h.
double emev_ratio(double beta_h, int n_rb, int n_r, int n_t);

struct LayerCost {
    std::string layer;
    int64_t params = 0;
    int64_t flops = 0;
};

// Per-layer parameter/FLOP table evaluated exactly at the config dims.
std::vector<LayerCost> complexity_report(const EmevConfig& cfg);

// Dual-input attention autoencoder. All forward passes are deterministic
// and tape-registered; weights are seeded uniform fan-in.
class EmevNet {
   public:
    EmevNet(EmevConfig cfg, uint64_t seed);

    // v: (n_rb, n_t, n_t, 2) with entries in [-1,1]; s: (n_rb, n_r, 1)
    // already divided by s_scale.
    std::pair<Var, Var> feature_extract(Tape& tape, const Tensor& v, const Tensor& s);
    Var transcode(Tape& tape, Var xi_v, Var xi_s);
    // Returns (v_hat (n_rb,n_t,n_t,2) in [-1,1], s_hat (n_rb,n_r) normalized).
    std::pair<Var, Var> decode(Tape& tape, Var payload);
    std::pair<Var, Var> forward(Tape& tape, const Tensor& v, const Tensor& s);

    const EmevConfig& config() const { return cfg_; }
    EmevConfig& mutable_config() { return cfg_; }
    std::vector<Parameter*> parameters();
    Parameter* find_parameter(const std::string& name);

    // Block counts from the most recent transcode (test instrumentation).
    int last_cross_blocks() const { return last_cross_; }
    int last_self_blocks() const { return last_self_; }

   private:
    EmevConfig cfg_;
    std::vector<std::unique_ptr<Parameter>> store_;
    std::vector<AttentionParams*> att_;  // views into store_, depth entries

    Parameter& add(const std::string& name, std::vector<int64_t> shape, int64_t fan_in, Rng& rng);
    Parameter& get(const std::string& name);
    std::vector<std::unique_ptr<AttentionParams>> att_store_;
    int last_cross_ = 0, last_self_ = 0;
};

// Per-sample (V, S) pairs derived from a dataset by per-RB SVD.
struct EmevSample {
    Tensor v;      // (n_rb, n_t, n_t, 2)
    Tensor s_raw;  // (n_rb, n_r), un-normalized singular values
    uint8_t label = 0;
};

std::vector<EmevSample> decompose_dataset(const Dataset& ds);

// Normalized S view of a sample: (n_rb, n_r, 1) divided by s_scale.
Tensor normalize_s(const Tensor& s_raw, float s_scale);

}  // namespace emev
