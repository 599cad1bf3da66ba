#include "emev/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "emev/errors.hpp"
#include "emev/rng.hpp"

namespace emev {

SplitIndices split_indices(int n, uint64_t seed) {
    if (n < 3) throw ConfigError("split_indices: need at least 3 samples");
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(rng.uniform() * static_cast<double>(i + 1));
        if (j > i) j = i;
        std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }
    int n_train = (n * 70) / 100;
    int n_val = (n * 15) / 100;
    if (n_train < 1) n_train = 1;
    if (n_val < 1) n_val = 1;
    if (n_train + n_val >= n) n_train = n - n_val - 1;
    SplitIndices s;
    s.train.assign(order.begin(), order.begin() + n_train);
    s.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    s.test.assign(order.begin() + n_train + n_val, order.end());
    return s;
}

namespace {

double mean_loss_over(const LossFn& loss_fn, const std::vector<int>& indices) {
    double sum = 0.0;
    for (int idx : indices) {
        Tape tape;
        Var l = loss_fn(tape, idx);
        sum += static_cast<double>(tape.value(l).data.at(0));
    }
    return sum / static_cast<double>(indices.size());
}

}  // namespace

TrainResult train_loop(const std::vector<Parameter*>& params, const LossFn& loss_fn,
                       const SplitIndices& split, const TrainHyper& hyper,
                       uint64_t seed, AdamState& opt, TrainState& state) {
    if (split.train.empty() || split.val.empty()) {
        throw ConfigError("train_loop: empty train or validation split");
    }
    if (hyper.batch_size < 1 || hyper.max_epochs < 1) {
        throw ConfigError("train_loop: batch_size and max_epochs must be positive");
    }
    TrainResult result;
    result.best_values.reserve(params.size());
    for (Parameter* p : params) result.best_values.push_back(p->value);

    if (!state.best_set) {
        // Pre-training validation establishes the stagnation baseline, so a
        // run that never improves stops after exactly stop_patience epochs.
        state.best_val = mean_loss_over(loss_fn, split.val);
        if (!std::isfinite(state.best_val)) {
            throw NumericError("train_loop: non-finite validation loss before epoch 1");
        }
        state.best_set = true;
    } else {
        result.best_val = state.best_val;
    }
    result.best_val = state.best_val;

    std::vector<int> order;
    for (int epoch = state.next_epoch; epoch <= hyper.max_epochs; ++epoch) {
        // Rebuilt every epoch so the permutation depends only on (seed, epoch)
        // and resumed runs replay the same batches.
        order = split.train;
        Rng shuffle_rng(Rng::derive(seed, static_cast<uint64_t>(epoch)));
        for (size_t i = order.size() - 1; i > 0; --i) {
            size_t j = static_cast<size_t>(shuffle_rng.uniform() * static_cast<double>(i + 1));
            if (j > i) j = i;
            std::swap(order[i], order[j]);
        }
        double train_sum = 0.0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(hyper.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(hyper.batch_size));
            Tape tape;
            std::vector<Var> losses;
            losses.reserve(end - start);
            for (size_t k = start; k < end; ++k) losses.push_back(loss_fn(tape, order[k]));
            Var batch_loss = tape.mean_of(losses);
            double lv = static_cast<double>(tape.value(batch_loss).data.at(0));
            if (!std::isfinite(lv)) {
                throw NumericError("train_loop: loss diverged (NaN/inf) at epoch " +
                                   std::to_string(epoch));
            }
            train_sum += lv * static_cast<double>(end - start);
            tape.backward(batch_loss);
            opt.step(params);
        }
        double train_loss = train_sum / static_cast<double>(order.size());
        double val_loss = mean_loss_over(loss_fn, split.val);
        if (!std::isfinite(val_loss)) {
            throw NumericError("train_loop: validation loss diverged at epoch " +
                               std::to_string(epoch));
        }
        if (val_loss < state.best_val) {
            state.best_val = val_loss;
            state.stagnant_decay = 0;
            state.stagnant_stop = 0;
            for (size_t i = 0; i < params.size(); ++i) result.best_values[i] = params[i]->value;
        } else {
            ++state.stagnant_decay;
            ++state.stagnant_stop;
        }
        if (state.stagnant_decay >= hyper.decay_patience) {
            opt.set_learning_rate(opt.learning_rate() * hyper.decay);
            state.stagnant_decay = 0;
        }
        result.curve.push_back({epoch, train_loss, val_loss, opt.learning_rate()});
        result.epochs_run = epoch;
        state.next_epoch = epoch + 1;
        if (state.stagnant_stop >= hyper.stop_patience) {
            result.early_stopped = true;
            break;
        }
    }
    result.best_val = state.best_val;
    return result;
}

TrainResult train_emevnet(EmevNet& net, const std::vector<EmevSample>& samples,
                          const SplitIndices& split, const TrainHyper& hyper,
                          uint64_t seed, AdamState& opt, TrainState& state) {
    const EmevConfig& cfg = net.config();
    std::vector<Tensor> s_norm;
    s_norm.reserve(samples.size());
    for (const EmevSample& smp : samples) s_norm.push_back(normalize_s(smp.s_raw, cfg.s_scale));
    LossFn loss = [&](Tape& tape, int i) {
        const EmevSample& smp = samples.at(static_cast<size_t>(i));
        const Tensor& sn = s_norm.at(static_cast<size_t>(i));
        auto [v_hat, s_hat] = net.forward(tape, smp.v, sn);
        Tensor s_target({cfg.n_rb, cfg.n_r}, sn.data);
        return mse_joint_loss(tape, v_hat, smp.v, s_hat, s_target, cfg.w_v, cfg.w_s);
    };
    return train_loop(net.parameters(), loss, split, hyper, seed, opt, state);
}

TrainResult train_baseline(BaselineNet& net, const Dataset& ds,
                           const SplitIndices& split, const TrainHyper& hyper,
                           uint64_t seed, AdamState& opt, TrainState& state) {
    const BaselineConfig& cfg = net.config();
    std::vector<Tensor> h_norm;
    h_norm.reserve(static_cast<size_t>(ds.n_samples()));
    for (int i = 0; i < ds.n_samples(); ++i) {
        Tensor t = sample_h_tensor(ds, i);
        for (float& f : t.data) f /= cfg.h_scale;
        h_norm.push_back(std::move(t));
    }
    LossFn loss = [&](Tape& tape, int i) {
        const Tensor& t = h_norm.at(static_cast<size_t>(i));
        Var out = net.forward(tape, t);
        return tape.mse_to_target(out, t);
    };
    return train_loop(net.parameters(), loss, split, hyper, seed, opt, state);
}

TrainResult train_classifier(Classifier& cls, const std::vector<ClassifierFeatures>& feats,
                             const std::vector<uint8_t>& labels, const SplitIndices& split,
                             const TrainHyper& hyper, uint64_t seed, AdamState& opt,
                             TrainState& state) {
    if (feats.size() != labels.size()) {
        throw DimensionError("train_classifier: feature/label count mismatch");
    }
    LossFn loss = [&](Tape& tape, int i) {
        Var lg = cls.logits(tape, feats.at(static_cast<size_t>(i)).map);
        return tape.cross_entropy_logits(lg, static_cast<int>(labels.at(static_cast<size_t>(i))));
    };
    return train_loop(cls.parameters(), loss, split, hyper, seed, opt, state);
}

void assign_params(const std::vector<Parameter*>& params, const std::vector<Tensor>& values) {
    if (params.size() != values.size()) {
        throw DimensionError("assign_params: snapshot size mismatch");
    }
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->value.same_shape(values[i])) {
            throw DimensionError("assign_params: shape mismatch for " + params[i]->name);
        }
        params[i]->value = values[i];
    }
}

std::vector<NamedTensor> dump_params(const std::vector<Parameter*>& params) {
    std::vector<NamedTensor> out;
    out.reserve(params.size());
    for (Parameter* p : params) out.push_back({p->name, p->value});
    return out;
}

void load_params(const std::vector<NamedTensor>& stored, const std::vector<Parameter*>& params) {
    for (Parameter* p : params) {
        const NamedTensor* found = nullptr;
        for (const NamedTensor& nt : stored) {
            if (nt.name == p->name) {
                found = &nt;
                break;
            }
        }
        if (!found) throw IoError("checkpoint is missing parameter '" + p->name + "'");
        if (!found->tensor.same_shape(p->value)) {
            throw IoError("checkpoint shape mismatch for '" + p->name + "': " +
                          found->tensor.shape_str() + " vs " + p->value.shape_str());
        }
        p->value = found->tensor;
    }
}

std::vector<NamedTensor> dump_opt_state(AdamState& opt, const std::vector<Parameter*>& params) {
    std::vector<NamedTensor> out;
    out.reserve(params.size() * 3);
    for (Parameter* p : params) {
        AdamState::Moments* m = opt.moments_for(p);
        if (!m) throw ConfigError("dump_opt_state: parameter '" + p->name + "' not registered");
        out.push_back({"adam.m." + p->name, m->m});
        out.push_back({"adam.v." + p->name, m->v});
        out.push_back({"cur." + p->name, p->value});
    }
    return out;
}

void load_opt_state(const std::vector<NamedTensor>& stored, AdamState& opt,
                    const std::vector<Parameter*>& params) {
    auto find = [&](const std::string& name) -> const NamedTensor& {
        for (const NamedTensor& nt : stored) {
            if (nt.name == name) return nt;
        }
        throw IoError("checkpoint optimizer section is missing '" + name + "'");
    };
    for (Parameter* p : params) {
        AdamState::Moments* m = opt.moments_for(p);
        if (!m) throw ConfigError("load_opt_state: parameter '" + p->name + "' not registered");
        m->m = find("adam.m." + p->name).tensor;
        m->v = find("adam.v." + p->name).tensor;
        p->value = find("cur." + p->name).tensor;
    }
}

void state_to_kv(const TrainState& state, const AdamState& opt, KvConfig& kv) {
    char buf[64];
    kv["train.next_epoch"] = std::to_string(state.next_epoch);
    std::snprintf(buf, sizeof(buf), "%.17g", state.best_val);
    kv["train.best_val"] = buf;
    kv["train.best_set"] = state.best_set ? "1" : "0";
    kv["train.stagnant_decay"] = std::to_string(state.stagnant_decay);
    kv["train.stagnant_stop"] = std::to_string(state.stagnant_stop);
    std::snprintf(buf, sizeof(buf), "%.17g", opt.learning_rate());
    kv["adam.lr"] = buf;
    kv["adam.step"] = std::to_string(opt.step_count());
}

void state_from_kv(const KvConfig& kv, TrainState& state, AdamState& opt) {
    state.next_epoch = kv_get_int(kv, "train.next_epoch", 1);
    state.best_val = kv_get_double(kv, "train.best_val", 0.0);
    state.best_set = kv_get_int(kv, "train.best_set", 0) != 0;
    state.stagnant_decay = kv_get_int(kv, "train.stagnant_decay", 0);
    state.stagnant_stop = kv_get_int(kv, "train.stagnant_stop", 0);
    opt.set_learning_rate(kv_get_double(kv, "adam.lr", opt.learning_rate()));
    opt.set_step_count(static_cast<int64_t>(kv_get_u64(kv, "adam.step", 0)));
}

void write_curve_csv(const std::string& path, const std::string& manifest,
                     const std::vector<EpochLog>& curve) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "# " << manifest << "\n";
    os << "epoch,train_loss,val_loss,lr\n";
    char buf[160];
    for (const EpochLog& e : curve) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", e.epoch, e.train_loss, e.val_loss, e.lr);
        os << buf;
    }
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace emev
