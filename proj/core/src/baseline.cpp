#include "emev/baseline.hpp"

#include "emev/errors.hpp"

namespace emev {

void BaselineConfig::validate() const {
    if (n_rb < 1 || n_t < 1 || n_r < 1) {
        throw ConfigError("baseline config: dims must be positive");
    }
    if (l_eps < 1 || l_eps > h_elems()) {
        throw ConfigError("baseline config: l_eps must be in [1, h element count]");
    }
    if (res_width < 1) throw ConfigError("baseline config: res_width must be positive");
    if (h_scale <= 0.0f) throw ConfigError("baseline config: h_scale must be positive");
}

KvConfig BaselineConfig::to_kv() const {
    KvConfig kv;
    kv["n_rb"] = std::to_string(n_rb);
    kv["n_t"] = std::to_string(n_t);
    kv["n_r"] = std::to_string(n_r);
    kv["l_eps"] = std::to_string(l_eps);
    kv["res_width"] = std::to_string(res_width);
    kv["leaky_slope"] = std::to_string(leaky_slope);
    kv["h_scale"] = std::to_string(h_scale);
    return kv;
}

BaselineConfig BaselineConfig::from_kv(const KvConfig& kv) {
    BaselineConfig c;
    c.n_rb = kv_get_int(kv, "n_rb", c.n_rb);
    c.n_t = kv_get_int(kv, "n_t", c.n_t);
    c.n_r = kv_get_int(kv, "n_r", c.n_r);
    c.l_eps = kv_get_int(kv, "l_eps", c.l_eps);
    c.res_width = kv_get_int(kv, "res_width", c.res_width);
    c.leaky_slope = static_cast<float>(kv_get_double(kv, "leaky_slope", c.leaky_slope));
    c.h_scale = static_cast<float>(kv_get_double(kv, "h_scale", c.h_scale));
    c.validate();
    return c;
}

Parameter& BaselineNet::add(const std::string& name, std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
    store_.push_back(std::make_unique<Parameter>(name, Tensor::zeros(std::move(shape))));
    init_uniform_fan_in(*store_.back(), fan_in, rng);
    return *store_.back();
}

Parameter& BaselineNet::get(const std::string& name) {
    Parameter* p = find_parameter(name);
    if (!p) throw ConfigError("baseline: unknown parameter '" + name + "'");
    return *p;
}

Parameter* BaselineNet::find_parameter(const std::string& name) {
    for (auto& p : store_) {
        if (p->name == name) return p.get();
    }
    return nullptr;
}

BaselineNet::BaselineNet(BaselineConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    const int64_t flat = cfg_.h_elems();
    const int64_t w = cfg_.res_width;
    add("enc.fc.w", {flat, cfg_.l_eps}, flat, rng);
    add("enc.fc.b", {cfg_.l_eps}, flat, rng);
    add("dec.fc.w", {cfg_.l_eps, flat}, cfg_.l_eps, rng);
    add("dec.fc.b", {flat}, cfg_.l_eps, rng);
    add("dec.res.conv0.w", {3, 3, 3, 2, w}, 27 * 2, rng);
    add("dec.res.conv0.b", {w}, 27 * 2, rng);
    add("dec.res.conv1.w", {3, 3, 3, w, 2}, 27 * w, rng);
    add("dec.res.conv1.b", {2}, 27 * w, rng);
    add("dec.out.w", {3, 3, 3, 2, 2}, 27 * 2, rng);
    add("dec.out.b", {2}, 27 * 2, rng);
}

std::vector<Parameter*> BaselineNet::parameters() {
    std::vector<Parameter*> out;
    out.reserve(store_.size());
    for (auto& p : store_) out.push_back(p.get());
    return out;
}

Var BaselineNet::forward(Tape& tape, const Tensor& h_norm) {
    const int64_t n_rb = cfg_.n_rb, n_r = cfg_.n_r, n_t = cfg_.n_t;
    if (h_norm.shape != std::vector<int64_t>{n_rb, n_r, n_t, 2}) {
        throw DimensionError("baseline forward: input " + h_norm.shape_str() + " does not match config");
    }
    float slope = cfg_.leaky_slope;
    Var x = tape.reshape(tape.input(h_norm), {cfg_.h_elems()});
    Var code = dense_forward(tape, x, get("enc.fc.w"), get("enc.fc.b"), Activation::kLinear);
    Var y = dense_forward(tape, code, get("dec.fc.w"), get("dec.fc.b"), Activation::kLinear);
    y = tape.reshape(y, {n_rb, n_r, n_t, 2});
    Var r = conv3d_forward(tape, y, get("dec.res.conv0.w"), get("dec.res.conv0.b"),
                           Activation::kLeakyRelu, slope);
    r = conv3d_forward(tape, r, get("dec.res.conv1.w"), get("dec.res.conv1.b"), Activation::kLinear);
    y = tape.add(y, r);
    return conv3d_forward(tape, y, get("dec.out.w"), get("dec.out.b"), Activation::kLinear);
}

Tensor sample_h_tensor(const Dataset& ds, int i) {
    Tensor t = Tensor::zeros({ds.n_rb, ds.n_r, ds.n_t, 2});
    const float* p = ds.sample(i);
    std::copy(p, p + t.size(), t.data.begin());
    return t;
}

ChannelTensor h_tensor_to_channel(const Tensor& t, float h_scale) {
    if (t.rank() != 4 || t.shape[3] != 2) {
        throw DimensionError("h_tensor_to_channel: expected rank-4 (.., 2) tensor, got " + t.shape_str());
    }
    ChannelTensor ct;
    ct.n_rb = static_cast<int>(t.shape[0]);
    ct.n_r = static_cast<int>(t.shape[1]);
    ct.n_t = static_cast<int>(t.shape[2]);
    ct.h.resize(static_cast<size_t>(t.size() / 2));
    for (size_t k = 0; k < ct.h.size(); ++k) {
        ct.h[k] = cd(static_cast<double>(t.data[2 * k]) * h_scale,
                     static_cast<double>(t.data[2 * k + 1]) * h_scale);
    }
    return ct;
}

}  // namespace emev
