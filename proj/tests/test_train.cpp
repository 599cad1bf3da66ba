#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "emev/errors.hpp"
#include "emev/serialize.hpp"
#include "emev/train.hpp"

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

std::vector<EmevSample> tiny_samples(int n, const EmevConfig& cfg) {
    ChannelProfile p = ChannelProfile::builtin("cdl-a-like");
    p.n_rb = cfg.n_rb;
    p.n_t = cfg.n_t;
    p.n_r = cfg.n_r;
    return decompose_dataset(make_dataset(p, n, 123));
}

float max_singular(const std::vector<EmevSample>& samples, const std::vector<int>& idx) {
    float m = 0.0f;
    for (int i : idx)
        for (float v : samples[static_cast<size_t>(i)].s_raw.data) m = std::max(m, v);
    return m;
}

}  // namespace

TEST_CASE("split_indices: ratios, disjointness, determinism") {
    SplitIndices s = split_indices(100, 7);
    CHECK(s.train.size() == 70);
    CHECK(s.val.size() == 15);
    CHECK(s.test.size() == 15);
    std::set<int> all;
    for (const auto* part : {&s.train, &s.val, &s.test})
        for (int i : *part) all.insert(i);
    CHECK(all.size() == 100);
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == 99);
    SplitIndices again = split_indices(100, 7);
    CHECK(again.train == s.train);
    CHECK(again.val == s.val);
    CHECK(again.test == s.test);
    SplitIndices other = split_indices(100, 8);
    CHECK(other.train != s.train);

    SplitIndices small = split_indices(3, 1);
    CHECK(small.train.size() >= 1);
    CHECK(small.val.size() >= 1);
    CHECK(small.test.size() >= 1);
    CHECK_THROWS_AS(split_indices(2, 0), ConfigError);
}

TEST_CASE("constant loss: lr decays at epochs 20 and 40, stop at exactly 50") {
    Parameter p("p", Tensor({1}, {1.0f}));
    std::vector<Parameter*> params{&p};
    // Loss independent of parameters: constant value, zero gradient.
    LossFn loss = [](Tape& tape, int) {
        Var x = tape.input(Tensor({1}, {2.0f}));
        return tape.mse_to_target(x, Tensor({1}, {1.0f}));
    };
    SplitIndices split = split_indices(10, 3);
    TrainHyper hy;
    hy.lr = 1e-3;
    hy.max_epochs = 500;
    hy.batch_size = 4;
    AdamState opt(hy.lr);
    opt.register_params(params);
    TrainState state;
    TrainResult res = train_loop(params, loss, split, hy, 5, opt, state);
    CHECK(res.early_stopped);
    CHECK(res.epochs_run == 50);
    REQUIRE(res.curve.size() == 50);
    for (const EpochLog& e : res.curve) CHECK(e.val_loss == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(res.curve[18].lr == 1e-3);                                       // epoch 19
    CHECK(res.curve[19].lr == doctest::Approx(0.7e-3).epsilon(1e-12));     // epoch 20
    CHECK(res.curve[38].lr == doctest::Approx(0.7e-3).epsilon(1e-12));     // epoch 39
    CHECK(res.curve[39].lr == doctest::Approx(0.49e-3).epsilon(1e-12));    // epoch 40
    CHECK(res.curve[49].lr == doctest::Approx(0.49e-3).epsilon(1e-12));
    CHECK(p.value.data[0] == 1.0f);  // zero gradients leave the parameter alone
}

TEST_CASE("nan loss raises NumericError naming the epoch") {
    Parameter p("p", Tensor({1}, {1.0f}));
    std::vector<Parameter*> params{&p};
    LossFn loss = [](Tape& tape, int) {
        Var x = tape.input(Tensor({1}, {std::nanf("")}));
        return tape.mse_to_target(x, Tensor({1}, {0.0f}));
    };
    SplitIndices split = split_indices(10, 3);
    TrainHyper hy;
    AdamState opt(hy.lr);
    opt.register_params(params);
    TrainState state;
    bool threw = false;
    try {
        train_loop(params, loss, split, hy, 5, opt, state);
    } catch (const NumericError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("emevnet training reduces the loss and snapshots the best epoch") {
    EmevConfig cfg = tiny_config();
    auto samples = tiny_samples(24, cfg);
    SplitIndices split = split_indices(24, 2);
    cfg.s_scale = max_singular(samples, split.train);
    EmevNet net(cfg, 7);
    TrainHyper hy;
    hy.max_epochs = 8;
    hy.batch_size = 4;
    hy.lr = 3e-3;
    AdamState opt(hy.lr);
    opt.register_params(net.parameters());
    TrainState state;
    TrainResult res = train_emevnet(net, samples, split, hy, 11, opt, state);
    REQUIRE(res.curve.size() == 8);
    CHECK(res.curve.back().train_loss < res.curve.front().train_loss);
    CHECK(res.best_val <= res.curve.front().val_loss + 1e-12);
    REQUIRE(res.best_values.size() == net.parameters().size());
    CHECK(state.next_epoch == 9);
}

TEST_CASE("resumed training is bit-identical to an uninterrupted run") {
    EmevConfig cfg = tiny_config();
    auto samples = tiny_samples(20, cfg);
    SplitIndices split = split_indices(20, 4);
    cfg.s_scale = max_singular(samples, split.train);
    TrainHyper hy;
    hy.batch_size = 4;
    hy.lr = 2e-3;

    // Reference: 6 epochs straight through.
    EmevNet ref(cfg, 99);
    AdamState opt_ref(hy.lr);
    opt_ref.register_params(ref.parameters());
    TrainState st_ref;
    TrainHyper hy6 = hy;
    hy6.max_epochs = 6;
    train_emevnet(ref, samples, split, hy6, 17, opt_ref, st_ref);

    // Interrupted: 3 epochs, round trip through a checkpoint, 3 more.
    EmevNet a(cfg, 99);
    AdamState opt_a(hy.lr);
    opt_a.register_params(a.parameters());
    TrainState st_a;
    TrainHyper hy3 = hy;
    hy3.max_epochs = 3;
    train_emevnet(a, samples, split, hy3, 17, opt_a, st_a);

    Checkpoint ck;
    ck.opt_state = dump_opt_state(opt_a, a.parameters());
    state_to_kv(st_a, opt_a, ck.config);
    std::string path = (std::filesystem::temp_directory_path() / "emev_resume_ck.bin").string();
    write_checkpoint(path, ck);
    Checkpoint back = read_checkpoint(path);
    std::remove(path.c_str());

    EmevNet b(cfg, 99);  // weights are overwritten by the opt-state cur.* load
    AdamState opt_b(hy.lr);
    opt_b.register_params(b.parameters());
    TrainState st_b;
    load_opt_state(back.opt_state, opt_b, b.parameters());
    state_from_kv(back.config, st_b, opt_b);
    CHECK(st_b.next_epoch == 4);
    TrainHyper hy_rest = hy;
    hy_rest.max_epochs = 6;
    train_emevnet(b, samples, split, hy_rest, 17, opt_b, st_b);

    auto pr = ref.parameters();
    auto pb = b.parameters();
    REQUIRE(pr.size() == pb.size());
    for (size_t i = 0; i < pr.size(); ++i) {
        CHECK(pr[i]->name == pb[i]->name);
        CHECK(pr[i]->value.data == pb[i]->value.data);
    }
    CHECK(st_b.best_val == st_ref.best_val);
    CHECK(st_b.stagnant_stop == st_ref.stagnant_stop);
}

TEST_CASE("dump/load params round trip and reject mismatches") {
    EmevConfig cfg = tiny_config();
    EmevNet a(cfg, 1), b(cfg, 2);
    auto stored = dump_params(a.parameters());
    load_params(stored, b.parameters());
    auto pa = a.parameters(), pb = b.parameters();
    for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value.data == pb[i]->value.data);

    stored[0].name = "bogus";
    CHECK_THROWS_AS(load_params(stored, b.parameters()), IoError);
    stored = dump_params(a.parameters());
    stored[0].tensor = Tensor::zeros({1});
    CHECK_THROWS_AS(load_params(stored, b.parameters()), IoError);
}

TEST_CASE("train state kv round trip keeps doubles exactly") {
    TrainState st;
    st.next_epoch = 42;
    st.best_val = 0.12345678901234567;
    st.best_set = true;
    st.stagnant_decay = 3;
    st.stagnant_stop = 17;
    AdamState opt(1e-3);
    opt.set_learning_rate(0.7e-3);
    KvConfig kv;
    state_to_kv(st, opt, kv);
    TrainState st2;
    AdamState opt2(1e-3);
    state_from_kv(kv, st2, opt2);
    CHECK(st2.next_epoch == 42);
    CHECK(st2.best_val == st.best_val);
    CHECK(st2.best_set);
    CHECK(st2.stagnant_decay == 3);
    CHECK(st2.stagnant_stop == 17);
    CHECK(opt2.learning_rate() == 0.7e-3);
}

TEST_CASE("curve csv has the manifest line and one row per epoch") {
    std::vector<EpochLog> curve{{1, 0.5, 0.6, 1e-3}, {2, 0.4, 0.55, 1e-3}};
    std::string path = (std::filesystem::temp_directory_path() / "emev_curve.csv").string();
    write_curve_csv(path, "emev 0.1.0 train test", curve);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("# emev 0.1.0 train test", 0) == 0);
    std::getline(in, line);
    CHECK(line == "epoch,train_loss,val_loss,lr");
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2);
    in.close();
    std::remove(path.c_str());
}
