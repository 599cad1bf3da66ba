#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "emev/emevnet.hpp"
#include "emev/nn.hpp"
#include "emev/svd.hpp"

namespace emev {

struct ClassifierConfig {
    int n_rb = 4, n_r = 2;
    int n_classes = 5;
    int width = 8;
    float leaky_slope = 0.01f;

    int64_t feat_cols() const { return static_cast<int64_t>(n_r) * n_r + n_r; }

    void validate() const;
    KvConfig to_kv() const;
    static ClassifierConfig from_kv(const KvConfig& kv);
};

// Per-RB rows of [|U| entries, S / max(S)]; (n_rb, n_r*n_r + n_r, 1).
// all_zero is set when the input carries no energy (unclassifiable).
struct ClassifierFeatures {
    Tensor map;
    bool all_zero = false;
};

ClassifierFeatures featurize_decomposition(const EigenDecomposition& d);

struct ClassifyResult {
    int channel_id = -1;  // -1 = unknown (all-zero input)
    std::vector<double> probs;
};

// Small conv+dense softmax head over the (|U|, S) feature map.
class Classifier {
   public:
    Classifier(ClassifierConfig cfg, uint64_t seed);

    Var logits(Tape& tape, const Tensor& features);
    ClassifyResult classify(const ClassifierFeatures& feats);

    const ClassifierConfig& config() const { return cfg_; }
    std::vector<Parameter*> parameters();
    Parameter* find_parameter(const std::string& name);

   private:
    ClassifierConfig cfg_;
    std::vector<std::unique_ptr<Parameter>> store_;

    Parameter& add(const std::string& name, std::vector<int64_t> shape, int64_t fan_in, Rng& rng);
    Parameter& get(const std::string& name);
};

// channel_id -> specialized codec; unknown ids fall back to the mixed model.
// All registered codecs (and the fallback) must share l_eps.
class CodecRegistry {
   public:
    CodecRegistry(EmevNet* fallback);

    void add(int channel_id, EmevNet* codec);
    EmevNet* select(int channel_id) const;
    EmevNet* fallback() const { return fallback_; }
    size_t size() const { return by_id_.size(); }

   private:
    EmevNet* fallback_;
    std::map<int, EmevNet*> by_id_;
};

}  // namespace emev
