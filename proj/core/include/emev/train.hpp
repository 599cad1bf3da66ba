#pragma once

#include <functional>
#include <string>
#include <vector>

#include "emev/baseline.hpp"
#include "emev/classifier.hpp"
#include "emev/emevnet.hpp"
#include "emev/optimizer.hpp"

namespace emev {

struct TrainHyper {
    double lr = 1e-3;
    int max_epochs = 500;    // tau
    int batch_size = 64;
    int decay_patience = 20;  // stagnant epochs before lr *= decay
    double decay = 0.7;
    int stop_patience = 50;  // stagnant epochs before early stop
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct SplitIndices {
    std::vector<int> train, val, test;
};

// Deterministic 70/15/15 split by shuffle of [0, n) with the given seed.
SplitIndices split_indices(int n, uint64_t seed);

// Mutable training progress; serialized into checkpoints so an interrupted
// run resumes exactly where it stopped.
struct TrainState {
    int next_epoch = 1;
    double best_val = 0.0;
    bool best_set = false;
    int stagnant_decay = 0;
    int stagnant_stop = 0;
};

struct TrainResult {
    std::vector<EpochLog> curve;
    double best_val = 0.0;
    int epochs_run = 0;
    bool early_stopped = false;
    // Best-validation parameter values, aligned with the params vector.
    std::vector<Tensor> best_values;
};

// Scalar loss for one sample; the tape is fresh per call.
using LossFn = std::function<Var(Tape&, int sample_index)>;

// Mini-batch Adam over the train split with per-epoch deterministic shuffle
// (Rng::derive(seed, epoch)). Validation runs before epoch 1 to set the
// stagnation baseline. NaN losses raise NumericError naming the epoch.
// Parameters are left at their final (not best) values; the best snapshot is
// returned for the caller to persist or apply.
TrainResult train_loop(const std::vector<Parameter*>& params, const LossFn& loss_fn,
                       const SplitIndices& split, const TrainHyper& hyper,
                       uint64_t seed, AdamState& opt, TrainState& state);

TrainResult train_emevnet(EmevNet& net, const std::vector<EmevSample>& samples,
                          const SplitIndices& split, const TrainHyper& hyper,
                          uint64_t seed, AdamState& opt, TrainState& state);

TrainResult train_baseline(BaselineNet& net, const Dataset& ds,
                           const SplitIndices& split, const TrainHyper& hyper,
                           uint64_t seed, AdamState& opt, TrainState& state);

TrainResult train_classifier(Classifier& cls, const std::vector<ClassifierFeatures>& feats,
                             const std::vector<uint8_t>& labels, const SplitIndices& split,
                             const TrainHyper& hyper, uint64_t seed, AdamState& opt,
                             TrainState& state);

// Applies a parameter snapshot (from TrainResult::best_values) in place.
void assign_params(const std::vector<Parameter*>& params, const std::vector<Tensor>& values);

// Named-tensor round trips for checkpoints; names must match exactly.
std::vector<NamedTensor> dump_params(const std::vector<Parameter*>& params);
void load_params(const std::vector<NamedTensor>& stored, const std::vector<Parameter*>& params);

// Optimizer section: adam.m.<name>, adam.v.<name>, cur.<name> (current
// parameter values, distinct from the best snapshot in the main section).
std::vector<NamedTensor> dump_opt_state(AdamState& opt, const std::vector<Parameter*>& params);
void load_opt_state(const std::vector<NamedTensor>& stored, AdamState& opt,
                    const std::vector<Parameter*>& params);

// TrainState / optimizer scalars in the checkpoint config blob.
void state_to_kv(const TrainState& state, const AdamState& opt, KvConfig& kv);
void state_from_kv(const KvConfig& kv, TrainState& state, AdamState& opt);

void write_curve_csv(const std::string& path, const std::string& manifest,
                     const std::vector<EpochLog>& curve);

}  // namespace emev
