#include <doctest.h>

#include <cmath>
#include <vector>

#include "emev/classifier.hpp"
#include "emev/errors.hpp"
#include "emev/serialize.hpp"
#include "emev/svd.hpp"

using namespace emev;

namespace {

EmevConfig tiny_emev(int l_eps) {
    EmevConfig cfg;
    cfg.n_rb = 2;
    cfg.n_t = 2;
    cfg.n_r = 2;
    cfg.l_xi_v = 8;
    cfg.l_xi_s = 4;
    cfg.l_eps = l_eps;
    cfg.heads = 1;
    cfg.key_dim = 2;
    cfg.attention_depth = 2;
    cfg.d_model = 4;
    return cfg;
}

EigenDecomposition sample_decomposition() {
    ChannelProfile p = ChannelProfile::builtin("cdl-b-like");
    p.n_rb = 2;
    p.n_t = 4;
    p.n_r = 2;
    return svd_transform(generate_channel(p, 55));
}

}  // namespace

TEST_CASE("featurize: shape, value ranges, s normalization") {
    EigenDecomposition d = sample_decomposition();
    ClassifierFeatures f = featurize_decomposition(d);
    CHECK_FALSE(f.all_zero);
    CHECK(f.map.shape == std::vector<int64_t>{2, 6, 1});  // n_r^2 + n_r = 6
    float s_top = 0.0f;
    for (float v : f.map.data) {
        CHECK(v >= 0.0f);
        s_top = std::max(s_top, v);
    }
    // the dominant normalized singular value is exactly 1
    bool saw_one = false;
    for (int rb = 0; rb < 2; ++rb)
        for (int k = 0; k < 2; ++k)
            if (f.map.data[static_cast<size_t>(rb * 6 + 4 + k)] == 1.0f) saw_one = true;
    CHECK(saw_one);
    // |U| entries are bounded by 1 for a unitary factor
    for (int rb = 0; rb < 2; ++rb)
        for (int i = 0; i < 4; ++i) CHECK(f.map.data[static_cast<size_t>(rb * 6 + i)] <= 1.0f + 1e-6f);
}

TEST_CASE("featurize flags an all-zero channel") {
    ChannelTensor h;
    h.n_rb = 2;
    h.n_r = 2;
    h.n_t = 3;
    h.h.assign(12, cd{0.0, 0.0});
    ClassifierFeatures f = featurize_decomposition(svd_transform(h));
    CHECK(f.all_zero);
}

TEST_CASE("classifier: probabilities sum to one and classify is deterministic") {
    ClassifierConfig cfg;
    cfg.n_rb = 2;
    cfg.n_r = 2;
    Classifier cls(cfg, 5);
    EigenDecomposition d = sample_decomposition();
    ClassifierFeatures f = featurize_decomposition(d);
    ClassifyResult a = cls.classify(f);
    ClassifyResult b = cls.classify(f);
    REQUIRE(a.probs.size() == 5);
    double sum = 0.0;
    for (double p : a.probs) {
        CHECK(p >= 0.0);
        sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(a.channel_id == b.channel_id);
    CHECK(a.probs == b.probs);
    CHECK(a.channel_id >= 0);
    CHECK(a.channel_id < 5);
    // the winning class carries the maximal probability
    for (double p : a.probs) CHECK(a.probs[static_cast<size_t>(a.channel_id)] >= p);
}

TEST_CASE("classify returns -1 (unknown) on the all-zero flag") {
    ClassifierConfig cfg;
    cfg.n_rb = 2;
    cfg.n_r = 2;
    Classifier cls(cfg, 5);
    ClassifierFeatures f;
    f.all_zero = true;
    CHECK(cls.classify(f).channel_id == -1);
}

TEST_CASE("classifier rejects wrongly shaped feature maps") {
    ClassifierConfig cfg;
    cfg.n_rb = 2;
    cfg.n_r = 2;
    Classifier cls(cfg, 1);
    Tape tape;
    CHECK_THROWS_AS(cls.logits(tape, Tensor::zeros({2, 5, 1})), DimensionError);
}

TEST_CASE("registry: fallback required, l_eps fairness, id dispatch") {
    EmevNet fallback(tiny_emev(4), 1);
    EmevNet special_a(tiny_emev(4), 2);
    EmevNet mismatched(tiny_emev(2), 3);

    CHECK_THROWS_AS(CodecRegistry(nullptr), ConfigError);
    CodecRegistry reg(&fallback);
    reg.add(0, &special_a);
    CHECK_THROWS_AS(reg.add(1, &mismatched), ConfigError);
    CHECK(reg.select(0) == &special_a);
    CHECK(reg.select(3) == &fallback);   // unregistered label
    CHECK(reg.select(-1) == &fallback);  // unknown channel
}

TEST_CASE("label permutation: selection follows the classifier output symbolically") {
    EmevNet fallback(tiny_emev(4), 1);
    EmevNet c0(tiny_emev(4), 10), c1(tiny_emev(4), 11), c2(tiny_emev(4), 12);
    CodecRegistry reg(&fallback);
    reg.add(0, &c0);
    reg.add(1, &c1);
    reg.add(2, &c2);
    // whatever id the classifier emits, the registry must return that codec
    EmevNet* by_id[3] = {&c0, &c1, &c2};
    for (int id = 0; id < 3; ++id) CHECK(reg.select(id) == by_id[id]);
}
