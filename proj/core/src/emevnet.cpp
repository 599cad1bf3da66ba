#include "emev/emevnet.hpp"

#include <cmath>

#include "emev/errors.hpp"
#include "emev/svd.hpp"

namespace emev {

void EmevConfig::validate() const {
    if (n_rb < 1 || n_t < 1 || n_r < 1 || n_t < n_r) {
        throw ConfigError("emev config: need n_t >= n_r >= 1 and n_rb >= 1");
    }
    if (l_xi_v < 1 || l_xi_s < 1 || l_eps < 1) {
        throw ConfigError("emev config: feature and codeword lengths must be positive");
    }
    if (l_eps > l_xi_v) {
        throw ConfigError("emev config: l_eps must not exceed l_xi_v");
    }
    if (heads < 1 || key_dim < 1 || attention_depth < 1 || d_model < 1) {
        throw ConfigError("emev config: attention hyper-parameters must be positive");
    }
    if (l_xi_v % d_model != 0 || l_xi_s % d_model != 0) {
        throw ConfigError("emev config: l_xi_v and l_xi_s must be divisible by d_model");
    }
    if (dec_res_widths.size() != 3) {
        throw ConfigError("emev config: dec_res_widths must have 3 entries");
    }
    if (s_scale <= 0.0f) {
        throw ConfigError("emev config: s_scale must be positive");
    }
    if (w_v < 0.0 || w_s < 0.0 || std::abs(w_v + w_s - 1.0) > 1e-9) {
        throw ConfigError("emev config: loss weights must be non-negative and sum to 1");
    }
}

KvConfig EmevConfig::to_kv() const {
    KvConfig kv;
    kv["n_rb"] = std::to_string(n_rb);
    kv["n_t"] = std::to_string(n_t);
    kv["n_r"] = std::to_string(n_r);
    kv["l_xi_v"] = std::to_string(l_xi_v);
    kv["l_xi_s"] = std::to_string(l_xi_s);
    kv["l_eps"] = std::to_string(l_eps);
    kv["heads"] = std::to_string(heads);
    kv["key_dim"] = std::to_string(key_dim);
    kv["attention_depth"] = std::to_string(attention_depth);
    kv["d_model"] = std::to_string(d_model);
    kv["enc_width1"] = std::to_string(enc_width1);
    kv["enc_width2"] = std::to_string(enc_width2);
    kv["dec_res_widths"] = std::to_string(dec_res_widths[0]) + "," +
                           std::to_string(dec_res_widths[1]) + "," +
                           std::to_string(dec_res_widths[2]);
    kv["leaky_slope"] = std::to_string(leaky_slope);
    kv["s_scale"] = std::to_string(s_scale);
    kv["w_v"] = std::to_string(w_v);
    kv["w_s"] = std::to_string(w_s);
    return kv;
}

EmevConfig EmevConfig::from_kv(const KvConfig& kv) {
    EmevConfig c;
    c.n_rb = kv_get_int(kv, "n_rb", c.n_rb);
    c.n_t = kv_get_int(kv, "n_t", c.n_t);
    c.n_r = kv_get_int(kv, "n_r", c.n_r);
    c.l_xi_v = kv_get_int(kv, "l_xi_v", c.l_xi_v);
    c.l_xi_s = kv_get_int(kv, "l_xi_s", c.l_xi_s);
    c.l_eps = kv_get_int(kv, "l_eps", c.l_eps);
    c.heads = kv_get_int(kv, "heads", c.heads);
    c.key_dim = kv_get_int(kv, "key_dim", c.key_dim);
    c.attention_depth = kv_get_int(kv, "attention_depth", c.attention_depth);
    c.d_model = kv_get_int(kv, "d_model", c.d_model);
    c.enc_width1 = kv_get_int(kv, "enc_width1", c.enc_width1);
    c.enc_width2 = kv_get_int(kv, "enc_width2", c.enc_width2);
    std::string widths = kv_get_string(kv, "dec_res_widths", "2,8,2");
    c.dec_res_widths.clear();
    size_t pos = 0;
    while (pos != std::string::npos) {
        size_t comma = widths.find(',', pos);
        try {
            c.dec_res_widths.push_back(std::stoi(widths.substr(pos, comma - pos)));
        } catch (const std::exception&) {
            throw ConfigError("emev config: bad dec_res_widths entry in '" + widths + "'");
        }
        pos = comma == std::string::npos ? comma : comma + 1;
    }
    c.leaky_slope = static_cast<float>(kv_get_double(kv, "leaky_slope", c.leaky_slope));
    c.s_scale = static_cast<float>(kv_get_double(kv, "s_scale", c.s_scale));
    c.w_v = kv_get_double(kv, "w_v", c.w_v);
    c.w_s = kv_get_double(kv, "w_s", c.w_s);
    c.validate();
    return c;
}

CodewordLength codeword_length(double beta_h, int n_rb, int n_r, int n_t) {
    if (beta_h <= 0.0) throw ConfigError("codeword_length: beta_h must be positive");
    double exact = static_cast<double>(2LL * n_rb * n_r * n_t) / beta_h;
    CodewordLength out;
    out.length = static_cast<int>(std::floor(exact + 1e-9));
    out.floored = std::abs(exact - static_cast<double>(out.length)) > 1e-9;
    if (out.length < 1) throw ConfigError("codeword_length: beta_h exceeds the H element count");
    return out;
}

double emev_ratio(double beta_h, int n_rb, int n_r, int n_t) {
    double num = static_cast<double>(n_rb) * (2.0 * n_t * n_t + n_r);
    double den = 2.0 * n_rb * n_r * n_t;
    return num / den * beta_h;
}

std::vector<LayerCost> complexity_report(const EmevConfig& cfg) {
    cfg.validate();
    const int64_t n_rb = cfg.n_rb, n_t = cfg.n_t, n_r = cfg.n_r;
    const int64_t f1 = cfg.enc_width1, f2 = cfg.enc_width2;
    const int64_t k2 = 9, lv = cfg.l_xi_v, ls = cfg.l_xi_s, le = cfg.l_eps;
    std::vector<LayerCost> rows;
    rows.push_back({"Conv3D_1", f1 * 2 * k2, (n_rb * n_t * n_t * f1) * (2 * k2)});
    rows.push_back({"Conv2D_1", f1 * 2 * k2, (n_rb * n_r * f1) * (2 * k2)});
    rows.push_back({"Conv3D_2", f2 * 2 * k2, (n_rb * n_t * n_t * f2) * (f1 * k2)});
    rows.push_back({"Conv2D_2", f2 * 2 * k2, (n_rb * n_r * f2) * (f1 * k2)});
    rows.push_back({"FCLayer_1(V)", n_rb * n_t * n_t * f2 * lv, 2 * n_rb * n_t * n_t * f2 * lv});
    rows.push_back({"FCLayer_1(S)", n_rb * n_r * f2 * ls, 2 * n_rb * n_r * f2 * ls});
    rows.push_back({"Attention_res(V,S)", 2 * (lv * lv + ls * ls), 8 * (lv * lv + ls * ls)});
    for (int i = 1; i < cfg.attention_depth; ++i) {
        rows.push_back({"Attention_res(V,V)", 2 * (lv * lv + lv * lv), 8 * (lv * lv + lv * lv)});
    }
    rows.push_back({"FCLayer_codewords", le * le, 2 * le * le});
    rows.push_back({"FCLayer_2(V)", le * n_rb * n_t * n_t * 2, 2 * le * n_rb * n_t * n_t * 2});
    rows.push_back({"FCLayer_2(S)", le * n_rb * n_r, 2 * le * n_rb * n_r});
    int64_t wsum_v = 0;
    for (int w : cfg.dec_res_widths) wsum_v += w;
    int64_t wsum_s = 1 + cfg.dec_res_widths[1] + cfg.dec_res_widths[2];
    rows.push_back({"Conv3D_res", wsum_v * 2 * k2, (n_rb * n_t * n_t * wsum_v) * (wsum_v * k2)});
    rows.push_back({"Conv2D_res", wsum_s * 2 * k2, (n_rb * n_r * wsum_s) * (wsum_s * k2)});
    rows.push_back({"Conv3D_3", 2 * 2 * k2, (n_rb * n_t * n_t * 2) * (2 * k2)});
    rows.push_back({"Conv2D_3", 1 * 2 * k2, (n_rb * n_r * 1) * (2 * k2)});
    return rows;
}

Parameter& EmevNet::add(const std::string& name, std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
    store_.push_back(std::make_unique<Parameter>(name, Tensor::zeros(std::move(shape))));
    init_uniform_fan_in(*store_.back(), fan_in, rng);
    return *store_.back();
}

Parameter& EmevNet::get(const std::string& name) {
    Parameter* p = find_parameter(name);
    if (!p) throw ConfigError("emevnet: unknown parameter '" + name + "'");
    return *p;
}

Parameter* EmevNet::find_parameter(const std::string& name) {
    for (auto& p : store_) {
        if (p->name == name) return p.get();
    }
    return nullptr;
}

EmevNet::EmevNet(EmevConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    const int64_t n_rb = cfg_.n_rb, n_t = cfg_.n_t, n_r = cfg_.n_r;
    const int64_t w1 = cfg_.enc_width1, w2 = cfg_.enc_width2;
    // Encoder, V branch (3D) and S branch (2D).
    add("enc.v.conv1.w", {3, 3, 3, 2, w1}, 27 * 2, rng);
    add("enc.v.conv1.b", {w1}, 27 * 2, rng);
    add("enc.v.conv2.w", {3, 3, 3, w1, w2}, 27 * w1, rng);
    add("enc.v.conv2.b", {w2}, 27 * w1, rng);
    add("enc.v.fc.w", {n_rb * n_t * n_t * w2, cfg_.l_xi_v}, n_rb * n_t * n_t * w2, rng);
    add("enc.v.fc.b", {cfg_.l_xi_v}, n_rb * n_t * n_t * w2, rng);
    add("enc.s.conv1.w", {3, 3, 1, w1}, 9, rng);
    add("enc.s.conv1.b", {w1}, 9, rng);
    add("enc.s.conv2.w", {3, 3, w1, w2}, 9 * w1, rng);
    add("enc.s.conv2.b", {w2}, 9 * w1, rng);
    add("enc.s.fc.w", {n_rb * n_r * w2, cfg_.l_xi_s}, n_rb * n_r * w2, rng);
    add("enc.s.fc.b", {cfg_.l_xi_s}, n_rb * n_r * w2, rng);
    // Attention blocks: block 0 is the cross block.
    int64_t proj = static_cast<int64_t>(cfg_.heads) * cfg_.key_dim;
    for (int i = 0; i < cfg_.attention_depth; ++i) {
        std::string prefix = "enc.att" + std::to_string(i) + ".";
        auto ap = std::make_unique<AttentionParams>();
        ap->wq = Parameter(prefix + "wq", Tensor::zeros({cfg_.d_model, proj}));
        ap->wk = Parameter(prefix + "wk", Tensor::zeros({cfg_.d_model, proj}));
        ap->wv = Parameter(prefix + "wv", Tensor::zeros({cfg_.d_model, proj}));
        ap->wo = Parameter(prefix + "wo", Tensor::zeros({proj, cfg_.d_model}));
        init_uniform_fan_in(ap->wq, cfg_.d_model, rng);
        init_uniform_fan_in(ap->wk, cfg_.d_model, rng);
        init_uniform_fan_in(ap->wv, cfg_.d_model, rng);
        init_uniform_fan_in(ap->wo, proj, rng);
        att_store_.push_back(std::move(ap));
        att_.push_back(att_store_.back().get());
    }
    add("enc.code.w", {cfg_.l_xi_v, cfg_.l_eps}, cfg_.l_xi_v, rng);
    add("enc.code.b", {cfg_.l_eps}, cfg_.l_xi_v, rng);
    // Decoder.
    add("dec.v.fc.w", {cfg_.l_eps, n_rb * n_t * n_t * 2}, cfg_.l_eps, rng);
    add("dec.v.fc.b", {n_rb * n_t * n_t * 2}, cfg_.l_eps, rng);
    add("dec.s.fc.w", {cfg_.l_eps, n_rb * n_r}, cfg_.l_eps, rng);
    add("dec.s.fc.b", {n_rb * n_r}, cfg_.l_eps, rng);
    const auto& wds = cfg_.dec_res_widths;
    for (int r = 0; r < 3; ++r) {
        std::string pv = "dec.v.res" + std::to_string(r) + ".";
        int64_t in0 = 2, in1 = wds[0], in2 = wds[1];
        add(pv + "conv0.w", {3, 3, 3, in0, wds[0]}, 27 * in0, rng);
        add(pv + "conv0.b", {wds[0]}, 27 * in0, rng);
        add(pv + "conv1.w", {3, 3, 3, in1, wds[1]}, 27 * in1, rng);
        add(pv + "conv1.b", {wds[1]}, 27 * in1, rng);
        add(pv + "conv2.w", {3, 3, 3, in2, 2}, 27 * in2, rng);
        add(pv + "conv2.b", {2}, 27 * in2, rng);
        std::string ps = "dec.s.res" + std::to_string(r) + ".";
        add(ps + "conv0.w", {3, 3, 1, wds[0]}, 9, rng);
        add(ps + "conv0.b", {wds[0]}, 9, rng);
        add(ps + "conv1.w", {3, 3, wds[0], wds[1]}, 9 * wds[0], rng);
        add(ps + "conv1.b", {wds[1]}, 9 * wds[0], rng);
        add(ps + "conv2.w", {3, 3, wds[1], 1}, 9 * wds[1], rng);
        add(ps + "conv2.b", {1}, 9 * wds[1], rng);
    }
    add("dec.v.out.w", {3, 3, 3, 2, 2}, 27 * 2, rng);
    add("dec.v.out.b", {2}, 27 * 2, rng);
    add("dec.s.out.w", {3, 3, 1, 1}, 9, rng);
    add("dec.s.out.b", {1}, 9, rng);
}

std::vector<Parameter*> EmevNet::parameters() {
    std::vector<Parameter*> out;
    out.reserve(store_.size() + att_store_.size() * 4);
    for (auto& p : store_) out.push_back(p.get());
    for (auto& a : att_store_) {
        out.push_back(&a->wq);
        out.push_back(&a->wk);
        out.push_back(&a->wv);
        out.push_back(&a->wo);
    }
    return out;
}

std::pair<Var, Var> EmevNet::feature_extract(Tape& tape, const Tensor& v, const Tensor& s) {
    const int64_t n_rb = cfg_.n_rb, n_t = cfg_.n_t, n_r = cfg_.n_r;
    if (v.shape != std::vector<int64_t>{n_rb, n_t, n_t, 2}) {
        throw DimensionError("feature_extract: V input " + v.shape_str() + " does not match config");
    }
    if (s.shape != std::vector<int64_t>{n_rb, n_r, 1}) {
        throw DimensionError("feature_extract: S input " + s.shape_str() + " does not match config");
    }
    float slope = cfg_.leaky_slope;
    Var xv = tape.input(v);
    xv = conv3d_forward(tape, xv, get("enc.v.conv1.w"), get("enc.v.conv1.b"), Activation::kLeakyRelu, slope);
    xv = conv3d_forward(tape, xv, get("enc.v.conv2.w"), get("enc.v.conv2.b"), Activation::kLeakyRelu, slope);
    xv = tape.reshape(xv, {n_rb * n_t * n_t * cfg_.enc_width2});
    Var xi_v = dense_forward(tape, xv, get("enc.v.fc.w"), get("enc.v.fc.b"), Activation::kRelu);
    Var xs = tape.input(s);
    xs = conv2d_forward(tape, tape.reshape(xs, {n_rb, n_r, 1}), get("enc.s.conv1.w"), get("enc.s.conv1.b"),
                        Activation::kLeakyRelu, slope);
    xs = conv2d_forward(tape, xs, get("enc.s.conv2.w"), get("enc.s.conv2.b"), Activation::kLeakyRelu, slope);
    xs = tape.reshape(xs, {n_rb * n_r * cfg_.enc_width2});
    Var xi_s = dense_forward(tape, xs, get("enc.s.fc.w"), get("enc.s.fc.b"), Activation::kRelu);
    return {xi_v, xi_s};
}

Var EmevNet::transcode(Tape& tape, Var xi_v, Var xi_s) {
    if (tape.value(xi_v).size() != cfg_.l_xi_v || tape.value(xi_s).size() != cfg_.l_xi_s) {
        throw DimensionError("transcode: feature lengths do not match config");
    }
    last_cross_ = 0;
    last_self_ = 0;
    Var x = tape.reshape(xi_v, {cfg_.l_xi_v / cfg_.d_model, cfg_.d_model});
    Var x_key = tape.reshape(xi_s, {cfg_.l_xi_s / cfg_.d_model, cfg_.d_model});
    for (int i = 0; i < cfg_.attention_depth; ++i) {
        Var key = i == 0 ? x_key : x;
        Var z = multi_head_attention(tape, x, key, key, cfg_.heads, cfg_.key_dim, *att_[static_cast<size_t>(i)]);
        x = tape.add(x, z);
        if (i == 0) {
            ++last_cross_;
        } else {
            ++last_self_;
        }
    }
    Var flat = tape.reshape(x, {cfg_.l_xi_v});
    return dense_forward(tape, flat, get("enc.code.w"), get("enc.code.b"), Activation::kLinear);
}

std::pair<Var, Var> EmevNet::decode(Tape& tape, Var payload) {
    if (tape.value(payload).size() != cfg_.l_eps) {
        throw DimensionError("decode: payload length " +
                             std::to_string(tape.value(payload).size()) + " != l_eps " +
                             std::to_string(cfg_.l_eps));
    }
    const int64_t n_rb = cfg_.n_rb, n_t = cfg_.n_t, n_r = cfg_.n_r;
    float slope = cfg_.leaky_slope;
    // V branch.
    Var v = dense_forward(tape, payload, get("dec.v.fc.w"), get("dec.v.fc.b"), Activation::kLinear);
    v = tape.reshape(v, {n_rb, n_t, n_t, 2});
    for (int r = 0; r < 3; ++r) {
        std::string p = "dec.v.res" + std::to_string(r) + ".";
        Var y = conv3d_forward(tape, v, get(p + "conv0.w"), get(p + "conv0.b"), Activation::kLeakyRelu, slope);
        y = conv3d_forward(tape, y, get(p + "conv1.w"), get(p + "conv1.b"), Activation::kLeakyRelu, slope);
        y = conv3d_forward(tape, y, get(p + "conv2.w"), get(p + "conv2.b"), Activation::kLinear);
        v = tape.add(v, y);
    }
    Var v_hat = conv3d_forward(tape, v, get("dec.v.out.w"), get("dec.v.out.b"), Activation::kTanh);
    // S branch.
    Var s = dense_forward(tape, payload, get("dec.s.fc.w"), get("dec.s.fc.b"), Activation::kLinear);
    s = tape.reshape(s, {n_rb, n_r, 1});
    for (int r = 0; r < 3; ++r) {
        std::string p = "dec.s.res" + std::to_string(r) + ".";
        Var y = conv2d_forward(tape, s, get(p + "conv0.w"), get(p + "conv0.b"), Activation::kLeakyRelu, slope);
        y = conv2d_forward(tape, y, get(p + "conv1.w"), get(p + "conv1.b"), Activation::kLeakyRelu, slope);
        y = conv2d_forward(tape, y, get(p + "conv2.w"), get(p + "conv2.b"), Activation::kLinear);
        s = tape.add(s, y);
    }
    Var s_hat = conv2d_forward(tape, s, get("dec.s.out.w"), get("dec.s.out.b"), Activation::kLinear);
    s_hat = tape.reshape(s_hat, {n_rb, n_r});
    return {v_hat, s_hat};
}

std::pair<Var, Var> EmevNet::forward(Tape& tape, const Tensor& v, const Tensor& s) {
    auto [xi_v, xi_s] = feature_extract(tape, v, s);
    Var payload = transcode(tape, xi_v, xi_s);
    return decode(tape, payload);
}

std::vector<EmevSample> decompose_dataset(const Dataset& ds) {
    std::vector<EmevSample> out;
    out.reserve(static_cast<size_t>(ds.n_samples()));
    const int64_t n_rb = ds.n_rb, n_t = ds.n_t, n_r = ds.n_r;
    for (int i = 0; i < ds.n_samples(); ++i) {
        ChannelTensor h = ds.sample_tensor(i);
        EigenDecomposition d = svd_transform(h);
        EmevSample smp;
        smp.v = Tensor::zeros({n_rb, n_t, n_t, 2});
        smp.s_raw = Tensor::zeros({n_rb, n_r});
        for (int rb = 0; rb < ds.n_rb; ++rb) {
            for (int a = 0; a < ds.n_t; ++a) {
                for (int b = 0; b < ds.n_t; ++b) {
                    const cd& val = d.v_at(rb, a, b);
                    size_t base = static_cast<size_t>(((rb * n_t + a) * n_t + b) * 2);
                    smp.v.data[base] = static_cast<float>(val.real());
                    smp.v.data[base + 1] = static_cast<float>(val.imag());
                }
            }
            for (int k = 0; k < ds.n_r; ++k) {
                smp.s_raw.data[static_cast<size_t>(rb * n_r + k)] = static_cast<float>(d.s_at(rb, k));
            }
        }
        smp.label = ds.labels[static_cast<size_t>(i)];
        out.push_back(std::move(smp));
    }
    return out;
}

Tensor normalize_s(const Tensor& s_raw, float s_scale) {
    if (s_scale <= 0.0f) throw ConfigError("normalize_s: s_scale must be positive");
    Tensor out = Tensor::zeros({s_raw.shape[0], s_raw.shape[1], 1});
    for (int64_t i = 0; i < s_raw.size(); ++i) {
        out.data[static_cast<size_t>(i)] = s_raw.data[static_cast<size_t>(i)] / s_scale;
    }
    return out;
}

}  // namespace emev
