#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "emev/config.hpp"
#include "emev/nn.hpp"
#include "emev/serialize.hpp"

namespace emev {

// Full-CSI autoencoder used as the equal-overhead comparison codec: dense
// encoder to l_eps, dense + one conv residual block decoder over the raw
// (n_rb, n_r, n_t, 2) channel tensor.
struct BaselineConfig {
    int n_rb = 4, n_t = 8, n_r = 2;
    int l_eps = 16;
    int res_width = 8;
    float leaky_slope = 0.01f;
    float h_scale = 1.0f;  // max |entry| over the training split

    int64_t h_elems() const { return static_cast<int64_t>(n_rb) * n_r * n_t * 2; }

    void validate() const;
    KvConfig to_kv() const;
    static BaselineConfig from_kv(const KvConfig& kv);
};

class BaselineNet {
   public:
    BaselineNet(BaselineConfig cfg, uint64_t seed);

    // h_norm: (n_rb, n_r, n_t, 2) divided by h_scale; returns same shape.
    Var forward(Tape& tape, const Tensor& h_norm);

    const BaselineConfig& config() const { return cfg_; }
    BaselineConfig& mutable_config() { return cfg_; }
    std::vector<Parameter*> parameters();
    Parameter* find_parameter(const std::string& name);

   private:
    BaselineConfig cfg_;
    std::vector<std::unique_ptr<Parameter>> store_;

    Parameter& add(const std::string& name, std::vector<int64_t> shape, int64_t fan_in, Rng& rng);
    Parameter& get(const std::string& name);
};

// (n_rb, n_r, n_t, 2) f32 view of one dataset sample.
Tensor sample_h_tensor(const Dataset& ds, int i);

// Rebuilds a ChannelTensor from a (possibly reconstructed) f32 view,
// multiplying by h_scale.
ChannelTensor h_tensor_to_channel(const Tensor& t, float h_scale);

}  // namespace emev
