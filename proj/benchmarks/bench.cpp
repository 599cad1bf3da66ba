#include <benchmark/benchmark.h>

#include "emev/channel.hpp"
#include "emev/emevnet.hpp"
#include "emev/svd.hpp"

using namespace emev;

namespace {

ChannelProfile bench_profile(int n_rb, int n_t, int n_r) {
    ChannelProfile p = ChannelProfile::builtin("cdl-a-like");
    p.n_rb = n_rb;
    p.n_t = n_t;
    p.n_r = n_r;
    return p;
}

EmevConfig bench_config() {
    EmevConfig cfg;
    cfg.n_rb = 4;
    cfg.n_t = 8;
    cfg.n_r = 2;
    cfg.l_xi_v = 128;
    cfg.l_xi_s = 32;
    cfg.l_eps = 16;
    cfg.d_model = 8;
    return cfg;
}

void BM_GenerateChannel(benchmark::State& state) {
    ChannelProfile p = bench_profile(4, static_cast<int>(state.range(0)), 2);
    uint64_t seed = 0;
    for (auto _ : state) {
        ChannelTensor h = generate_channel(p, seed++);
        benchmark::DoNotOptimize(h.h.data());
    }
}
BENCHMARK(BM_GenerateChannel)->Arg(8)->Arg(32)->Arg(64);

void BM_SvdTransform(benchmark::State& state) {
    ChannelTensor h = generate_channel(bench_profile(4, static_cast<int>(state.range(0)), 2), 1);
    for (auto _ : state) {
        EigenDecomposition d = svd_transform(h);
        benchmark::DoNotOptimize(d.s.data());
    }
}
BENCHMARK(BM_SvdTransform)->Arg(8)->Arg(32)->Arg(64);

void BM_EmevForward(benchmark::State& state) {
    EmevConfig cfg = bench_config();
    EmevNet net(cfg, 1);
    Dataset ds = make_dataset(bench_profile(cfg.n_rb, cfg.n_t, cfg.n_r), 1, 2);
    auto samples = decompose_dataset(ds);
    Tensor s = normalize_s(samples[0].s_raw, 1.0f);
    for (auto _ : state) {
        Tape tape;
        auto [v_hat, s_hat] = net.forward(tape, samples[0].v, s);
        benchmark::DoNotOptimize(tape.value(v_hat).data.data());
        benchmark::DoNotOptimize(tape.value(s_hat).data.data());
    }
}
BENCHMARK(BM_EmevForward);

void BM_EmevForwardBackward(benchmark::State& state) {
    EmevConfig cfg = bench_config();
    EmevNet net(cfg, 1);
    Dataset ds = make_dataset(bench_profile(cfg.n_rb, cfg.n_t, cfg.n_r), 1, 2);
    auto samples = decompose_dataset(ds);
    Tensor s = normalize_s(samples[0].s_raw, 1.0f);
    for (auto _ : state) {
        Tape tape;
        auto [v_hat, s_hat] = net.forward(tape, samples[0].v, s);
        Var lv = tape.mse_to_target(v_hat, samples[0].v);
        Var ls = tape.mse_to_target(s_hat, samples[0].s_raw);
        Var loss = tape.add_scaled(lv, 0.5, ls, 0.5);
        tape.backward(loss);
        for (Parameter* p : net.parameters()) p->zero_grad();
        benchmark::DoNotOptimize(tape.value(loss).data.data());
    }
}
BENCHMARK(BM_EmevForwardBackward);

void BM_AttentionTranscode(benchmark::State& state) {
    EmevConfig cfg = bench_config();
    cfg.attention_depth = static_cast<int>(state.range(0));
    EmevNet net(cfg, 1);
    Dataset ds = make_dataset(bench_profile(cfg.n_rb, cfg.n_t, cfg.n_r), 1, 2);
    auto samples = decompose_dataset(ds);
    Tensor s = normalize_s(samples[0].s_raw, 1.0f);
    for (auto _ : state) {
        Tape tape;
        auto [xi_v, xi_s] = net.feature_extract(tape, samples[0].v, s);
        Var payload = net.transcode(tape, xi_v, xi_s);
        benchmark::DoNotOptimize(tape.value(payload).data.data());
    }
}
BENCHMARK(BM_AttentionTranscode)->Arg(2)->Arg(5);

}  // namespace

BENCHMARK_MAIN();
