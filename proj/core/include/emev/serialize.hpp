#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "emev/channel.hpp"
#include "emev/tensor.hpp"

namespace emev {

// In-memory view of an "EMEVDS01" dataset file: CSI samples stored as f32
// little-endian [rb][rx][tx][re,im], one u8 profile label per sample.
struct Dataset {
    std::string profile;
    uint64_t master_seed = 0;
    float s_scale = 0.0f;  // 0 = unset
    int n_rb = 0, n_r = 0, n_t = 0;
    std::vector<float> h;  // n_samples * n_rb * n_r * n_t * 2
    std::vector<uint8_t> labels;

    int n_samples() const { return static_cast<int>(labels.size()); }
    int64_t sample_floats() const { return static_cast<int64_t>(n_rb) * n_r * n_t * 2; }
    const float* sample(int i) const { return h.data() + static_cast<int64_t>(i) * sample_floats(); }
    ChannelTensor sample_tensor(int i) const;
    void append_sample(const ChannelTensor& ct, uint8_t label);
};

void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

// Deterministic generation: per-sample seeds derived from the master seed.
Dataset make_dataset(const ChannelProfile& profile, int count, uint64_t seed);

// Concatenates datasets with identical dims, preserving per-sample labels.
Dataset mix_datasets(const std::vector<Dataset>& parts);

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

// "EMEVCK01" checkpoint: length-prefixed key=value config blob, named f32
// parameter tensors, then an optional optimizer-state section (same layout).
struct Checkpoint {
    std::map<std::string, std::string> config;
    std::vector<NamedTensor> params;
    std::vector<NamedTensor> opt_state;
};

void write_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path);

// FNV-1a over the file bytes; printed by the CLI after writes.
uint64_t file_checksum(const std::string& path);

}  // namespace emev
