#include "emev/classifier.hpp"

#include <cmath>

#include "emev/errors.hpp"

namespace emev {

void ClassifierConfig::validate() const {
    if (n_rb < 1 || n_r < 1) throw ConfigError("classifier config: dims must be positive");
    if (n_classes < 2) throw ConfigError("classifier config: need at least 2 classes");
    if (width < 1) throw ConfigError("classifier config: width must be positive");
}

KvConfig ClassifierConfig::to_kv() const {
    KvConfig kv;
    kv["n_rb"] = std::to_string(n_rb);
    kv["n_r"] = std::to_string(n_r);
    kv["n_classes"] = std::to_string(n_classes);
    kv["width"] = std::to_string(width);
    kv["leaky_slope"] = std::to_string(leaky_slope);
    return kv;
}

ClassifierConfig ClassifierConfig::from_kv(const KvConfig& kv) {
    ClassifierConfig c;
    c.n_rb = kv_get_int(kv, "n_rb", c.n_rb);
    c.n_r = kv_get_int(kv, "n_r", c.n_r);
    c.n_classes = kv_get_int(kv, "n_classes", c.n_classes);
    c.width = kv_get_int(kv, "width", c.width);
    c.leaky_slope = static_cast<float>(kv_get_double(kv, "leaky_slope", c.leaky_slope));
    c.validate();
    return c;
}

ClassifierFeatures featurize_decomposition(const EigenDecomposition& d) {
    const int n_rb = d.n_rb, n_r = d.n_r;
    const int64_t cols = static_cast<int64_t>(n_r) * n_r + n_r;
    ClassifierFeatures out;
    out.map = Tensor::zeros({n_rb, cols, 1});
    double s_max = 0.0;
    for (double v : d.s) s_max = std::max(s_max, v);
    bool all_degenerate = !d.degenerate.empty();
    for (char flag : d.degenerate) {
        if (!flag) all_degenerate = false;
    }
    if (all_degenerate || s_max <= 0.0) {
        out.all_zero = true;
        return out;
    }
    for (int rb = 0; rb < n_rb; ++rb) {
        for (int i = 0; i < n_r; ++i) {
            for (int j = 0; j < n_r; ++j) {
                out.map.data[static_cast<size_t>(rb * cols + i * n_r + j)] =
                    static_cast<float>(std::abs(d.u_at(rb, i, j)));
            }
        }
        for (int k = 0; k < n_r; ++k) {
            double v = s_max > 0.0 ? d.s_at(rb, k) / s_max : 0.0;
            out.map.data[static_cast<size_t>(rb * cols + n_r * n_r + k)] = static_cast<float>(v);
        }
    }
    return out;
}

Parameter& Classifier::add(const std::string& name, std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
    store_.push_back(std::make_unique<Parameter>(name, Tensor::zeros(std::move(shape))));
    init_uniform_fan_in(*store_.back(), fan_in, rng);
    return *store_.back();
}

Parameter& Classifier::get(const std::string& name) {
    Parameter* p = find_parameter(name);
    if (!p) throw ConfigError("classifier: unknown parameter '" + name + "'");
    return *p;
}

Parameter* Classifier::find_parameter(const std::string& name) {
    for (auto& p : store_) {
        if (p->name == name) return p.get();
    }
    return nullptr;
}

Classifier::Classifier(ClassifierConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    const int64_t w = cfg_.width;
    add("conv1.w", {3, 3, 1, w}, 9, rng);
    add("conv1.b", {w}, 9, rng);
    add("conv2.w", {3, 3, w, w}, 9 * w, rng);
    add("conv2.b", {w}, 9 * w, rng);
    add("fc.w", {w, cfg_.n_classes}, w, rng);
    add("fc.b", {cfg_.n_classes}, w, rng);
}

std::vector<Parameter*> Classifier::parameters() {
    std::vector<Parameter*> out;
    out.reserve(store_.size());
    for (auto& p : store_) out.push_back(p.get());
    return out;
}

Var Classifier::logits(Tape& tape, const Tensor& features) {
    if (features.shape != std::vector<int64_t>{cfg_.n_rb, cfg_.feat_cols(), 1}) {
        throw DimensionError("classifier: feature map " + features.shape_str() + " does not match config");
    }
    float slope = cfg_.leaky_slope;
    Var x = tape.input(features);
    x = conv2d_forward(tape, x, get("conv1.w"), get("conv1.b"), Activation::kLeakyRelu, slope);
    x = conv2d_forward(tape, x, get("conv2.w"), get("conv2.b"), Activation::kLeakyRelu, slope);
    x = tape.global_avg_pool2d(x);
    return dense_forward(tape, x, get("fc.w"), get("fc.b"), Activation::kLinear);
}

ClassifyResult Classifier::classify(const ClassifierFeatures& feats) {
    ClassifyResult res;
    if (feats.all_zero) {
        res.channel_id = -1;
        return res;
    }
    Tape tape;
    Var lg = logits(tape, feats.map);
    const Tensor& z = tape.value(lg);
    double zmax = z.data[0];
    for (float v : z.data) zmax = std::max(zmax, static_cast<double>(v));
    double sum = 0.0;
    res.probs.resize(z.data.size());
    for (size_t i = 0; i < z.data.size(); ++i) {
        res.probs[i] = std::exp(static_cast<double>(z.data[i]) - zmax);
        sum += res.probs[i];
    }
    int best = 0;
    for (size_t i = 0; i < res.probs.size(); ++i) {
        res.probs[i] /= sum;
        // Ties break toward the lowest class index.
        if (res.probs[i] > res.probs[static_cast<size_t>(best)]) best = static_cast<int>(i);
    }
    res.channel_id = best;
    return res;
}

CodecRegistry::CodecRegistry(EmevNet* fallback) : fallback_(fallback) {
    if (!fallback_) throw ConfigError("codec registry: fallback codec is required");
}

void CodecRegistry::add(int channel_id, EmevNet* codec) {
    if (!codec) throw ConfigError("codec registry: null codec");
    if (codec->config().l_eps != fallback_->config().l_eps) {
        throw ConfigError("codec registry: l_eps mismatch for id " + std::to_string(channel_id) +
                          " (" + std::to_string(codec->config().l_eps) + " vs fallback " +
                          std::to_string(fallback_->config().l_eps) + ")");
    }
    by_id_[channel_id] = codec;
}

EmevNet* CodecRegistry::select(int channel_id) const {
    auto it = by_id_.find(channel_id);
    return it == by_id_.end() ? fallback_ : it->second;
}

}  // namespace emev
