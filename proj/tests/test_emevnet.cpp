#include <doctest.h>

#include <cmath>

#include "emev/emevnet.hpp"
#include "emev/errors.hpp"
#include "emev/svd.hpp"

using namespace emev;

namespace {

EmevConfig tiny_config() {
    EmevConfig cfg;
    cfg.n_rb = 2;
    cfg.n_t = 2;
    cfg.n_r = 2;
    cfg.l_xi_v = 8;
    cfg.l_xi_s = 4;
    cfg.l_eps = 4;
    cfg.heads = 1;
    cfg.key_dim = 2;
    cfg.attention_depth = 2;
    cfg.d_model = 4;
    return cfg;
}

Tensor random_tensor(std::vector<int64_t> shape, Rng& rng, double scale = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (float& v : t.data) v = static_cast<float>(rng.uniform(-scale, scale));
    return t;
}

int64_t find_cost(const std::vector<LayerCost>& rows, const std::string& layer, bool flops) {
    int64_t acc = 0;
    bool found = false;
    for (const LayerCost& r : rows) {
        if (r.layer == layer) {
            acc += flops ? r.flops : r.params;
            found = true;
        }
    }
    REQUIRE(found);
    return acc;
}

}  // namespace

TEST_CASE("codeword_length reproduces the published list at (13, 4, 64)") {
    const double betas[] = {16, 32, 64, 128, 256, 512, 1024};
    const int want[] = {416, 208, 104, 52, 26, 13, 6};
    for (int i = 0; i < 7; ++i) {
        CodewordLength cl = codeword_length(betas[i], 13, 4, 64);
        CHECK(cl.length == want[i]);
        CHECK(cl.floored == (i == 6));  // only 6656/1024 = 6.5 floors
    }
    CHECK(codeword_length(6656.0, 13, 4, 64).length == 1);  // maximal compression
    CHECK_THROWS_AS(codeword_length(0.0, 13, 4, 64), ConfigError);
    CHECK_THROWS_AS(codeword_length(-4.0, 13, 4, 64), ConfigError);
}

TEST_CASE("emev_ratio algebra") {
    // paper dims: factor (2*64^2 + 4) / (2*4*64) = 8196/512
    CHECK(emev_ratio(1.0, 13, 4, 64) == doctest::Approx(8196.0 / 512.0).epsilon(1e-12));
    CHECK(emev_ratio(16.0, 13, 4, 64) == doctest::Approx(16.0 * 8196.0 / 512.0).epsilon(1e-12));
    CHECK(std::lround(emev_ratio(16.0, 13, 4, 64)) == 256);  // reported integer
    // square case n_t = n_r = n collapses to (2n+1)/(2n) * beta
    for (int n = 1; n <= 4; ++n) {
        CHECK(emev_ratio(3.0, 1, n, n) ==
              doctest::Approx(3.0 * (2.0 * n + 1.0) / (2.0 * n)).epsilon(1e-12));
    }
}

TEST_CASE("complexity report matches hand computation at paper dims") {
    EmevConfig cfg;
    cfg.n_rb = 13;
    cfg.n_t = 64;
    cfg.n_r = 4;
    cfg.l_xi_v = 512;
    cfg.l_xi_s = 64;
    cfg.l_eps = 416;
    cfg.d_model = 8;
    auto rows = complexity_report(cfg);
    CHECK(find_cost(rows, "Conv3D_1", true) == 1916928);  // (13*64*64*2)*(2*9)
    CHECK(find_cost(rows, "Conv3D_1", false) == 36);      // 2*2*9
    CHECK(find_cost(rows, "Conv2D_1", false) == 36);
    CHECK(find_cost(rows, "Conv2D_1", true) == 13 * 4 * 2 * 18);
    CHECK(find_cost(rows, "Conv3D_2", true) == 13LL * 64 * 64 * 8 * 18);
    CHECK(find_cost(rows, "FCLayer_1(V)", false) == 13LL * 64 * 64 * 8 * 512);
    CHECK(find_cost(rows, "FCLayer_1(S)", false) == 13LL * 4 * 8 * 64);
    CHECK(find_cost(rows, "Attention_res(V,S)", false) == 2 * (512LL * 512 + 64 * 64));
    CHECK(find_cost(rows, "Attention_res(V,S)", false) == 532480);
    CHECK(find_cost(rows, "Attention_res(V,V)", false) == 4 * 4 * 512LL * 512);  // 4 rows
    CHECK(find_cost(rows, "FCLayer_codewords", false) == 416LL * 416);
    CHECK(find_cost(rows, "FCLayer_2(V)", false) == 416LL * 13 * 64 * 64 * 2);
    CHECK(find_cost(rows, "FCLayer_2(S)", false) == 416LL * 13 * 4);
    CHECK(find_cost(rows, "Conv3D_res", false) == 12 * 2 * 9);
    CHECK(find_cost(rows, "Conv3D_res", true) == 13LL * 64 * 64 * 12 * 12 * 9);
    CHECK(find_cost(rows, "Conv2D_res", false) == 11 * 2 * 9);
    CHECK(find_cost(rows, "Conv2D_res", true) == 13LL * 4 * 11 * 11 * 9);
    CHECK(find_cost(rows, "Conv3D_3", true) == 13LL * 64 * 64 * 2 * 18);
    CHECK(find_cost(rows, "Conv2D_3", true) == 13LL * 4 * 1 * 18);
    CHECK(find_cost(rows, "Conv2D_3", false) == 18);
}

TEST_CASE("complexity report matches hand computation at toy dims") {
    EmevConfig cfg = tiny_config();
    auto rows = complexity_report(cfg);
    CHECK(find_cost(rows, "Conv3D_1", true) == 2LL * 2 * 2 * 2 * 18);
    CHECK(find_cost(rows, "FCLayer_codewords", false) == 16);
    CHECK(find_cost(rows, "Attention_res(V,S)", false) == 2 * (64 + 16));
    CHECK(find_cost(rows, "Attention_res(V,V)", false) == 2 * (64 + 64));  // depth-1 = 1 row
    CHECK(find_cost(rows, "FCLayer_2(S)", false) == 4LL * 2 * 2);
}

TEST_CASE("config validation and kv round trip") {
    EmevConfig cfg = tiny_config();
    CHECK_NOTHROW(cfg.validate());
    EmevConfig back = EmevConfig::from_kv(cfg.to_kv());
    CHECK(back.to_kv() == cfg.to_kv());

    EmevConfig bad = cfg;
    bad.l_eps = bad.l_xi_v + 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.l_xi_v = 7;  // not divisible by d_model
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.w_v = 0.4;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.s_scale = 0.0f;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.n_t = 1;  // n_t < n_r
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("forward pass: exact output shapes and tanh range") {
    EmevConfig cfg = tiny_config();
    EmevNet net(cfg, 42);
    Rng rng(1);
    Tensor v = random_tensor({2, 2, 2, 2}, rng);
    Tensor s = random_tensor({2, 2, 1}, rng, 0.5);
    Tape tape;
    auto [v_hat, s_hat] = net.forward(tape, v, s);
    CHECK(tape.value(v_hat).shape == std::vector<int64_t>{2, 2, 2, 2});
    CHECK(tape.value(s_hat).shape == std::vector<int64_t>{2, 2});
    for (float x : tape.value(v_hat).data) {
        CHECK(x >= -1.0f);
        CHECK(x <= 1.0f);
    }
    for (float x : tape.value(s_hat).data) CHECK(std::isfinite(x));
}

TEST_CASE("zero parameters: zero features, zero payload") {
    EmevConfig cfg = tiny_config();
    EmevNet net(cfg, 1);
    for (Parameter* p : net.parameters()) p->value.fill(0.0f);
    Rng rng(2);
    Tensor v = random_tensor({2, 2, 2, 2}, rng);
    Tensor s = random_tensor({2, 2, 1}, rng);
    Tape tape;
    auto [xi_v, xi_s] = net.feature_extract(tape, v, s);
    for (float x : tape.value(xi_v).data) CHECK(x == 0.0f);
    for (float x : tape.value(xi_s).data) CHECK(x == 0.0f);
    Var payload = net.transcode(tape, xi_v, xi_s);
    CHECK(tape.value(payload).shape == std::vector<int64_t>{4});
    for (float x : tape.value(payload).data) CHECK(x == 0.0f);
}

TEST_CASE("relu feature outputs are non-negative") {
    EmevConfig cfg = tiny_config();
    EmevNet net(cfg, 7);
    Rng rng(3);
    Tensor v = random_tensor({2, 2, 2, 2}, rng);
    Tensor s = random_tensor({2, 2, 1}, rng);
    Tape tape;
    auto [xi_v, xi_s] = net.feature_extract(tape, v, s);
    for (float x : tape.value(xi_v).data) CHECK(x >= 0.0f);
    for (float x : tape.value(xi_s).data) CHECK(x >= 0.0f);
}

TEST_CASE("attention depth instrumentation: 1 cross + depth-1 self blocks") {
    EmevConfig cfg = tiny_config();
    cfg.attention_depth = 5;
    EmevNet net(cfg, 9);
    Rng rng(4);
    Tensor v = random_tensor({2, 2, 2, 2}, rng);
    Tensor s = random_tensor({2, 2, 1}, rng);
    Tape tape;
    auto [xi_v, xi_s] = net.feature_extract(tape, v, s);
    net.transcode(tape, xi_v, xi_s);
    CHECK(net.last_cross_blocks() == 1);
    CHECK(net.last_self_blocks() == 4);
}

TEST_CASE("conv residual blocks contribute nothing once their last conv is zeroed") {
    EmevConfig cfg = tiny_config();
    EmevNet a(cfg, 11), b(cfg, 11);
    // a: whole res blocks zeroed; b: only the final conv of each block zeroed.
    for (int r = 0; r < 3; ++r) {
        for (const char* br : {"v", "s"}) {
            for (int c = 0; c < 3; ++c) {
                std::string base = std::string("dec.") + br + ".res" + std::to_string(r) +
                                   ".conv" + std::to_string(c);
                a.find_parameter(base + ".w")->value.fill(0.0f);
                a.find_parameter(base + ".b")->value.fill(0.0f);
                if (c == 2) {
                    b.find_parameter(base + ".w")->value.fill(0.0f);
                    b.find_parameter(base + ".b")->value.fill(0.0f);
                }
            }
        }
    }
    Rng rng(5);
    Tensor payload = random_tensor({4}, rng);
    Tape t1, t2;
    auto [v1, s1] = a.decode(t1, t1.input(payload));
    auto [v2, s2] = b.decode(t2, t2.input(payload));
    CHECK(t1.value(v1).data == t2.value(v2).data);
    CHECK(t1.value(s1).data == t2.value(s2).data);
}

TEST_CASE("decode rejects wrong payload length") {
    EmevConfig cfg = tiny_config();
    EmevNet net(cfg, 1);
    Tape tape;
    CHECK_THROWS_AS(net.decode(tape, tape.input(Tensor::zeros({5}))), DimensionError);
}

TEST_CASE("decompose_dataset matches svd_transform sample by sample") {
    ChannelProfile p = ChannelProfile::builtin("cdl-a-like");
    p.n_rb = 2;
    p.n_t = 4;
    p.n_r = 2;
    Dataset ds = make_dataset(p, 3, 99);
    auto samples = decompose_dataset(ds);
    REQUIRE(samples.size() == 3);
    for (int i = 0; i < 3; ++i) {
        EigenDecomposition d = svd_transform(ds.sample_tensor(i));
        const EmevSample& smp = samples[static_cast<size_t>(i)];
        CHECK(smp.v.shape == std::vector<int64_t>{2, 4, 4, 2});
        CHECK(smp.s_raw.shape == std::vector<int64_t>{2, 2});
        CHECK(smp.label == ds.labels[static_cast<size_t>(i)]);
        for (int rb = 0; rb < 2; ++rb) {
            for (int k = 0; k < 2; ++k)
                CHECK(smp.s_raw.data[static_cast<size_t>(rb * 2 + k)] ==
                      doctest::Approx(d.s_at(rb, k)).epsilon(1e-6));
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c) {
                    size_t base = static_cast<size_t>(((rb * 4 + r) * 4 + c) * 2);
                    CHECK(smp.v.data[base] ==
                          doctest::Approx(d.v_at(rb, r, c).real()).epsilon(1e-6));
                    // unitary entries stay inside the unit disc (tanh-compatible)
                    CHECK(std::abs(smp.v.data[base]) <= 1.0f + 1e-6f);
                }
        }
    }
}

TEST_CASE("normalize_s divides by s_scale and reshapes") {
    Tensor s({2, 2}, {2.0f, 4.0f, 6.0f, 8.0f});
    Tensor n = normalize_s(s, 2.0f);
    CHECK(n.shape == std::vector<int64_t>{2, 2, 1});
    CHECK(n.data == std::vector<float>{1.0f, 2.0f, 3.0f, 4.0f});
    CHECK_THROWS_AS(normalize_s(s, 0.0f), ConfigError);
}
