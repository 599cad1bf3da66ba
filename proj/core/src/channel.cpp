#include "emev/channel.hpp"

#include <cmath>

#include "emev/errors.hpp"
#include "emev/rng.hpp"

namespace emev {

void ChannelProfile::validate() const {
    if (clusters < 1) throw ConfigError("profile '" + name + "': clusters must be >= 1");
    if (rays_per_cluster < 1) throw ConfigError("profile '" + name + "': rays_per_cluster must be >= 1");
    if (n_t < n_r || n_r < 1) throw ConfigError("profile '" + name + "': need n_t >= n_r >= 1");
    if (n_rb < 1) throw ConfigError("profile '" + name + "': n_rb must be >= 1");
    if (spacing_ratio <= 0.0) throw ConfigError("profile '" + name + "': spacing_ratio must be > 0");
    if (!cluster_powers.empty() && static_cast<int>(cluster_powers.size()) != clusters) {
        throw ConfigError("profile '" + name + "': cluster_powers size != clusters");
    }
    for (double p : cluster_powers) {
        if (p <= 0.0) throw ConfigError("profile '" + name + "': cluster powers must be positive");
    }
    if (!cluster_aod_rad.empty() && static_cast<int>(cluster_aod_rad.size()) != clusters) {
        throw ConfigError("profile '" + name + "': cluster_aod_rad size != clusters");
    }
}

std::vector<double> ChannelProfile::normalized_powers() const {
    std::vector<double> p = cluster_powers;
    if (p.empty()) p.assign(static_cast<size_t>(clusters), 1.0);
    double sum = 0.0;
    for (double v : p) sum += v;
    for (double& v : p) v /= sum;
    return p;
}

namespace {

ChannelProfile base_profile(const std::string& name) {
    ChannelProfile p;
    p.name = name;
    return p;
}

// Deterministic cluster layout: exponentially decaying powers, mean AoDs
// fanned across [-half_fan, half_fan].
void fill_clusters(ChannelProfile& p, double decay, double half_fan) {
    p.cluster_powers.resize(static_cast<size_t>(p.clusters));
    p.cluster_aod_rad.resize(static_cast<size_t>(p.clusters));
    for (int n = 0; n < p.clusters; ++n) {
        p.cluster_powers[static_cast<size_t>(n)] = std::exp(-static_cast<double>(n) / decay);
        double frac = p.clusters == 1 ? 0.5 : static_cast<double>(n) / (p.clusters - 1);
        p.cluster_aod_rad[static_cast<size_t>(n)] = (2.0 * frac - 1.0) * half_fan;
    }
}

double deg(double d) { return d * M_PI / 180.0; }

}  // namespace

ChannelProfile ChannelProfile::builtin(const std::string& name) {
    ChannelProfile p = base_profile(name);
    if (name == "cdl-a-like") {
        p.clusters = 8;
        p.delay_spread_s = 129e-9;
        fill_clusters(p, 2.0, deg(60));
        p.aod_spread_rad = deg(3);
    } else if (name == "cdl-b-like") {
        p.clusters = 8;
        p.delay_spread_s = 634e-9;
        fill_clusters(p, 5.0, deg(75));
        p.aod_spread_rad = deg(6);
    } else if (name == "cdl-c-like") {
        p.clusters = 8;
        p.delay_spread_s = 634e-9;
        fill_clusters(p, 1.5, deg(45));
        p.aod_spread_rad = deg(2);
    } else if (name == "cdl-d-like") {
        p.clusters = 4;
        p.los = true;
        p.delay_spread_s = 65e-9;
        fill_clusters(p, 2.0, deg(30));
        p.cluster_aod_rad[0] = deg(10);
        p.aod_spread_rad = deg(2);
    } else if (name == "cdl-e-like") {
        p.clusters = 4;
        p.los = true;
        p.delay_spread_s = 65e-9;
        fill_clusters(p, 3.0, deg(50));
        p.cluster_aod_rad[0] = deg(-25);
        p.aod_spread_rad = deg(4);
    } else {
        throw ConfigError("unknown channel profile '" + name + "'");
    }
    return p;
}

const std::vector<std::string>& ChannelProfile::builtin_names() {
    static const std::vector<std::string> names = {
        "cdl-a-like", "cdl-b-like", "cdl-c-like", "cdl-d-like", "cdl-e-like"};
    return names;
}

int ChannelProfile::builtin_label(const std::string& name) {
    const auto& names = builtin_names();
    for (size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<int>(i);
    }
    throw ConfigError("unknown channel profile '" + name + "'");
}

double ChannelTensor::fro_norm_sq() const {
    double acc = 0.0;
    for (const cd& v : h) acc += std::norm(v);
    return acc;
}

std::vector<cd> steering_vector(double theta, int n_t, double spacing_ratio) {
    if (n_t < 1) throw ConfigError("steering_vector: n_t must be >= 1");
    if (spacing_ratio <= 0.0) throw ConfigError("steering_vector: spacing_ratio must be > 0");
    std::vector<cd> a(static_cast<size_t>(n_t));
    double phase_step = -2.0 * M_PI * spacing_ratio * std::sin(theta);
    for (int k = 0; k < n_t; ++k) {
        a[static_cast<size_t>(k)] = std::polar(1.0, phase_step * k);
    }
    return a;
}

double los_probability(double d_2d, double h_ut) {
    if (d_2d < 0.0) throw ConfigError("los_probability: d_2d must be >= 0");
    if (h_ut < 0.0 || h_ut > 28.0) {
        throw ConfigError("los_probability: h_ut outside model range [0, 28] m");
    }
    if (d_2d <= 18.0) return 1.0;
    double c = h_ut <= 13.0 ? 0.0 : std::pow((h_ut - 13.0) / 10.0, 1.5);
    double pr = (18.0 / d_2d + std::exp(-d_2d / 63.0) * (1.0 - 18.0 / d_2d)) *
                (1.0 + 0.8 * c * std::pow(d_2d / 100.0, 3.0) * std::exp(-d_2d / 150.0));
    return std::min(1.0, std::max(0.0, pr));
}

ChannelTensor generate_channel(const ChannelProfile& profile, uint64_t seed) {
    profile.validate();
    Rng rng(seed);
    ChannelTensor ct;
    ct.n_rb = profile.n_rb;
    ct.n_r = profile.n_r;
    ct.n_t = profile.n_t;
    ct.h.assign(static_cast<size_t>(profile.n_rb) * profile.n_r * profile.n_t, cd{0.0, 0.0});

    std::vector<double> powers = profile.normalized_powers();
    double k_lin = std::pow(10.0, profile.rician_k_db / 10.0);
    double scatter_scale = profile.los ? 1.0 / (k_lin + 1.0) : 1.0;

    struct Ray {
        double power;
        double aod;
        double aoa;
        double phase;
        double tau;
    };
    std::vector<Ray> rays;
    rays.reserve(static_cast<size_t>(profile.clusters * profile.rays_per_cluster + 1));
    for (int n = 0; n < profile.clusters; ++n) {
        double mean_aod = profile.cluster_aod_rad.empty() ? 0.0 : profile.cluster_aod_rad[static_cast<size_t>(n)];
        double p_ray = powers[static_cast<size_t>(n)] * scatter_scale / profile.rays_per_cluster;
        for (int m = 0; m < profile.rays_per_cluster; ++m) {
            Ray r;
            r.power = p_ray;
            if (profile.random_ray_phase) {
                r.aod = mean_aod + profile.aod_spread_rad * rng.uniform(-1.0, 1.0);
                r.aoa = profile.aoa_spread_rad * rng.uniform(-1.0, 1.0);
                r.phase = rng.angle();
            } else {
                r.aod = mean_aod;
                r.aoa = 0.0;
                r.phase = 0.0;
            }
            r.tau = profile.delay_spread_s > 0.0
                        ? -profile.delay_spread_s * std::log(1.0 - rng.uniform())
                        : 0.0;
            rays.push_back(r);
        }
    }
    if (profile.los) {
        Ray r;
        r.power = k_lin / (k_lin + 1.0);
        r.aod = profile.cluster_aod_rad.empty() ? 0.0 : profile.cluster_aod_rad[0];
        r.aoa = 0.0;
        r.phase = profile.random_ray_phase ? rng.angle() : 0.0;
        r.tau = 0.0;  // direct path
        rays.push_back(r);
    }
    // Snapshots are drawn at t = 0; Doppler enters only through the random
    // ray phases, the speed draw just keeps the field in the stream.
    if (profile.doppler_max_hz > 0.0 && profile.random_ray_phase) (void)rng.uniform();

    double rb_bw = 12.0 * profile.scs_hz;  // 12 subcarriers per RB
    for (const Ray& r : rays) {
        std::vector<cd> tx = steering_vector(r.aod, profile.n_t, profile.spacing_ratio);
        std::vector<cd> rx = steering_vector(r.aoa, profile.n_r, profile.spacing_ratio);
        double amp = std::sqrt(r.power);
        for (int rb = 0; rb < profile.n_rb; ++rb) {
            double rb_phase = -2.0 * M_PI * rb * rb_bw * r.tau;
            cd coeff = std::polar(amp, r.phase + rb_phase);
            for (int ri = 0; ri < profile.n_r; ++ri) {
                cd c = coeff * rx[static_cast<size_t>(ri)];
                for (int ti = 0; ti < profile.n_t; ++ti) {
                    ct.at(rb, ri, ti) += c * tx[static_cast<size_t>(ti)];
                }
            }
        }
    }
    return ct;
}

std::vector<std::vector<cd>> apply_channel(const ChannelTensor& h,
                                           const std::vector<cd>& x,
                                           double noise_power, uint64_t seed) {
    if (static_cast<int>(x.size()) != h.n_t) {
        throw DimensionError("apply_channel: x length " + std::to_string(x.size()) +
                             " != n_t " + std::to_string(h.n_t));
    }
    Rng rng(seed);
    double sigma = std::sqrt(noise_power / 2.0);
    std::vector<std::vector<cd>> y(static_cast<size_t>(h.n_rb));
    for (int rb = 0; rb < h.n_rb; ++rb) {
        auto& row = y[static_cast<size_t>(rb)];
        row.assign(static_cast<size_t>(h.n_r), cd{0.0, 0.0});
        for (int r = 0; r < h.n_r; ++r) {
            cd acc{0.0, 0.0};
            for (int t = 0; t < h.n_t; ++t) acc += h.at(rb, r, t) * x[static_cast<size_t>(t)];
            if (noise_power > 0.0) acc += cd{sigma * rng.normal(), sigma * rng.normal()};
            row[static_cast<size_t>(r)] = acc;
        }
    }
    return y;
}

}  // namespace emev
