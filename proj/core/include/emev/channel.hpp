#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace emev {

using cd = std::complex<double>;

// Parameterized geometric multipath profile. Cluster powers are normalized
// to unit total before use; LOS profiles add a dominant zero-delay ray whose
// share is set by the Rician factor.
struct ChannelProfile {
    std::string name;
    int clusters = 8;
    int rays_per_cluster = 4;
    bool los = false;
    double rician_k_db = 10.0;
    std::vector<double> cluster_powers;   // linear, normalized before use
    std::vector<double> cluster_aod_rad;  // mean AoD per cluster
    double aod_spread_rad = 0.05;         // intra-cluster spread
    double aoa_spread_rad = 0.7;          // ray arrival-angle spread at the UE
    double delay_spread_s = 129e-9;
    double doppler_max_hz = 1555.0;  // 60 km/h at 28 GHz
    double carrier_hz = 28e9;
    double scs_hz = 60e3;
    int n_rb = 13;
    int n_t = 64;
    int n_r = 4;
    double spacing_ratio = 0.5;  // element spacing d / lambda
    // When false the per-ray coefficients and arrival angles are fixed at
    // their deterministic (zero-phase, boresight) values.
    bool random_ray_phase = true;

    void validate() const;
    std::vector<double> normalized_powers() const;

    // "cdl-a-like" .. "cdl-e-like"; throws ConfigError on unknown names.
    static ChannelProfile builtin(const std::string& name);
    static const std::vector<std::string>& builtin_names();
    static int builtin_label(const std::string& name);  // 0..4
};

// Complex CSI over (n_rb x n_r x n_t), index [rb][rx][tx].
struct ChannelTensor {
    int n_rb = 0, n_r = 0, n_t = 0;
    std::vector<cd> h;

    cd& at(int rb, int r, int t) {
        return h[static_cast<size_t>((rb * n_r + r) * n_t + t)];
    }
    const cd& at(int rb, int r, int t) const {
        return h[static_cast<size_t>((rb * n_r + r) * n_t + t)];
    }
    double fro_norm_sq() const;
};

// Element k = exp(-j 2 pi k (d/lambda) sin(theta)); unit modulus entries.
std::vector<cd> steering_vector(double theta, int n_t, double spacing_ratio);

// UMa LOS probability; exact for d_2d <= 18 m, clamped to [0,1].
// h_ut above 28 m is outside the model and throws.
double los_probability(double d_2d, double h_ut);

// Deterministic in (profile, seed).
ChannelTensor generate_channel(const ChannelProfile& profile, uint64_t seed);

// y = Hx + n per RB; circularly symmetric Gaussian noise of the given power.
std::vector<std::vector<cd>> apply_channel(const ChannelTensor& h,
                                           const std::vector<cd>& x,
                                           double noise_power, uint64_t seed);

}  // namespace emev
