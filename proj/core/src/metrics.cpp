#include "emev/metrics.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "emev/errors.hpp"
#include "emev/svd.hpp"

namespace emev {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string nmse_field(double db, bool perfect) { return perfect ? "-inf" : fmt(db); }

// (n_rb, n_t, n_t, 2) f32 view of a decomposition's V factor.
Tensor v_to_tensor(const EigenDecomposition& d) {
    Tensor t = Tensor::zeros({d.n_rb, d.n_t, d.n_t, 2});
    for (int rb = 0; rb < d.n_rb; ++rb) {
        for (int i = 0; i < d.n_t; ++i) {
            for (int j = 0; j < d.n_t; ++j) {
                size_t base = static_cast<size_t>(((rb * d.n_t + i) * d.n_t + j) * 2);
                t.data[base] = static_cast<float>(d.v_at(rb, i, j).real());
                t.data[base + 1] = static_cast<float>(d.v_at(rb, i, j).imag());
            }
        }
    }
    return t;
}

Tensor s_to_tensor(const EigenDecomposition& d) {
    Tensor t = Tensor::zeros({d.n_rb, d.n_r});
    for (int64_t k = 0; k < t.size(); ++k) {
        t.data[static_cast<size_t>(k)] = static_cast<float>(d.s[static_cast<size_t>(k)]);
    }
    return t;
}

}  // namespace

double nmse_linear(const Tensor& x, const Tensor& x_hat) {
    if (!x.same_shape(x_hat)) {
        throw DimensionError("nmse: shape mismatch " + x.shape_str() + " vs " + x_hat.shape_str());
    }
    double err = 0.0, ref = 0.0;
    for (int64_t i = 0; i < x.size(); ++i) {
        double d = static_cast<double>(x.data[static_cast<size_t>(i)]) -
                   static_cast<double>(x_hat.data[static_cast<size_t>(i)]);
        err += d * d;
        ref += static_cast<double>(x.data[static_cast<size_t>(i)]) *
               static_cast<double>(x.data[static_cast<size_t>(i)]);
    }
    if (ref <= 0.0) throw NumericError("nmse: reference tensor has zero norm");
    return err / ref;
}

Nmse nmse_from_linear(double ratio) {
    Nmse n;
    if (ratio <= 0.0) {
        n.perfect = true;
        n.db = -std::numeric_limits<double>::infinity();
    } else {
        n.db = 10.0 * std::log10(ratio);
    }
    return n;
}

double cosine_similarity_v(const Tensor& x, const Tensor& x_hat) {
    if (!x.same_shape(x_hat)) {
        throw DimensionError("rho: shape mismatch " + x.shape_str() + " vs " + x_hat.shape_str());
    }
    if (x.rank() != 4 || x.shape[3] != 2) {
        throw DimensionError("rho: expected (n_rb, rows, cols, 2), got " + x.shape_str());
    }
    const int64_t n_rb = x.shape[0], rows = x.shape[1], cols = x.shape[2];
    auto at = [&](const Tensor& t, int64_t rb, int64_t i, int64_t j) {
        size_t base = static_cast<size_t>(((rb * rows + i) * cols + j) * 2);
        return std::complex<double>(t.data[base], t.data[base + 1]);
    };
    double sum = 0.0;
    int64_t counted = 0, skipped = 0;
    for (int64_t rb = 0; rb < n_rb; ++rb) {
        for (int64_t j = 0; j < cols; ++j) {
            std::complex<double> inner(0.0, 0.0);
            double nx = 0.0, nh = 0.0;
            for (int64_t i = 0; i < rows; ++i) {
                std::complex<double> a = at(x, rb, i, j);
                std::complex<double> b = at(x_hat, rb, i, j);
                inner += std::conj(a) * b;
                nx += std::norm(a);
                nh += std::norm(b);
            }
            ++counted;
            if (nx <= 0.0 || nh <= 0.0) {
                ++skipped;  // counted in the mean, contributes zero
                continue;
            }
            sum += std::abs(inner) / std::sqrt(nx * nh);
        }
    }
    if (skipped == counted) throw NumericError("rho: all columns are zero");
    return sum / static_cast<double>(counted);
}

double cosine_similarity_s(const Tensor& x, const Tensor& x_hat) {
    if (!x.same_shape(x_hat)) {
        throw DimensionError("rho: shape mismatch " + x.shape_str() + " vs " + x_hat.shape_str());
    }
    if (x.rank() != 2) throw DimensionError("rho: expected (n_rb, n), got " + x.shape_str());
    const int64_t n_rb = x.shape[0], n = x.shape[1];
    double sum = 0.0;
    int64_t skipped = 0;
    for (int64_t rb = 0; rb < n_rb; ++rb) {
        double inner = 0.0, nx = 0.0, nh = 0.0;
        for (int64_t k = 0; k < n; ++k) {
            double a = x.data[static_cast<size_t>(rb * n + k)];
            double b = x_hat.data[static_cast<size_t>(rb * n + k)];
            inner += a * b;
            nx += a * a;
            nh += b * b;
        }
        if (nx <= 0.0 || nh <= 0.0) {
            ++skipped;
            continue;
        }
        sum += std::abs(inner) / std::sqrt(nx * nh);
    }
    if (skipped == n_rb) throw NumericError("rho: all rows are zero");
    return sum / static_cast<double>(n_rb);
}

EvalRow evaluate_emev(EmevNet& net, const std::vector<EmevSample>& samples,
                      const std::vector<int>& indices, const std::string& profile,
                      const std::string& model_kind, double beta_h) {
    if (indices.empty()) throw ConfigError("evaluate: empty sample set");
    const EmevConfig& cfg = net.config();
    double nmse_v = 0.0, nmse_s = 0.0, rho_v = 0.0, rho_s = 0.0;
    for (int idx : indices) {
        const EmevSample& smp = samples.at(static_cast<size_t>(idx));
        Tape tape;
        auto [v_var, s_var] = net.forward(tape, smp.v, normalize_s(smp.s_raw, cfg.s_scale));
        const Tensor& v_hat = tape.value(v_var);
        Tensor s_hat = tape.value(s_var);
        for (float& f : s_hat.data) f *= cfg.s_scale;
        nmse_v += nmse_linear(smp.v, v_hat);
        nmse_s += nmse_linear(smp.s_raw, s_hat);
        rho_v += cosine_similarity_v(smp.v, v_hat);
        rho_s += cosine_similarity_s(smp.s_raw, s_hat);
    }
    double n = static_cast<double>(indices.size());
    EvalRow row;
    row.profile = profile;
    row.model_kind = model_kind;
    row.l_eps = cfg.l_eps;
    row.beta_h = beta_h;
    row.beta_emev = beta_h > 0.0 ? emev_ratio(beta_h, cfg.n_rb, cfg.n_r, cfg.n_t) : 0.0;
    Nmse nv = nmse_from_linear(nmse_v / n);
    Nmse ns = nmse_from_linear(nmse_s / n);
    row.nmse_v_db = nv.db;
    row.nmse_v_perfect = nv.perfect;
    row.nmse_s_db = ns.db;
    row.nmse_s_perfect = ns.perfect;
    row.rho_v = rho_v / n;
    row.rho_s = rho_s / n;
    row.n_samples = static_cast<int>(indices.size());
    return row;
}

EvalRow evaluate_baseline(BaselineNet& net, const Dataset& ds,
                          const std::vector<int>& indices, const std::string& profile,
                          double beta_h) {
    if (indices.empty()) throw ConfigError("evaluate: empty sample set");
    const BaselineConfig& cfg = net.config();
    if (ds.n_rb != cfg.n_rb || ds.n_r != cfg.n_r || ds.n_t != cfg.n_t) {
        throw DimensionError("evaluate: dataset dims do not match baseline config");
    }
    double nmse_v = 0.0, nmse_s = 0.0, rho_v = 0.0, rho_s = 0.0;
    for (int idx : indices) {
        Tensor h_t = sample_h_tensor(ds, idx);
        Tensor h_norm = h_t;
        for (float& f : h_norm.data) f /= cfg.h_scale;
        Tape tape;
        Var out = net.forward(tape, h_norm);
        ChannelTensor h_hat = h_tensor_to_channel(tape.value(out), cfg.h_scale);
        EigenDecomposition d_true = svd_transform(ds.sample_tensor(idx));
        EigenDecomposition d_hat = svd_transform(h_hat);
        Tensor v_true = v_to_tensor(d_true), v_hat = v_to_tensor(d_hat);
        Tensor s_true = s_to_tensor(d_true), s_hat = s_to_tensor(d_hat);
        nmse_v += nmse_linear(v_true, v_hat);
        nmse_s += nmse_linear(s_true, s_hat);
        rho_v += cosine_similarity_v(v_true, v_hat);
        rho_s += cosine_similarity_s(s_true, s_hat);
    }
    double n = static_cast<double>(indices.size());
    EvalRow row;
    row.profile = profile;
    row.model_kind = "N_csi";
    row.l_eps = cfg.l_eps;
    row.beta_h = beta_h;
    row.beta_emev = beta_h > 0.0 ? emev_ratio(beta_h, cfg.n_rb, cfg.n_r, cfg.n_t) : 0.0;
    Nmse nv = nmse_from_linear(nmse_v / n);
    Nmse ns = nmse_from_linear(nmse_s / n);
    row.nmse_v_db = nv.db;
    row.nmse_v_perfect = nv.perfect;
    row.nmse_s_db = ns.db;
    row.nmse_s_perfect = ns.perfect;
    row.rho_v = rho_v / n;
    row.rho_s = rho_s / n;
    row.n_samples = static_cast<int>(indices.size());
    return row;
}

void write_report_csv(const std::string& path, const std::string& manifest,
                      const std::vector<EvalRow>& rows) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "# " << manifest << "\n";
    os << "profile,model_kind,l_eps,beta_h,beta_emev,nmse_v_db,nmse_v_perfect,"
          "nmse_s_db,nmse_s_perfect,rho_v,rho_s,n_samples\n";
    for (const EvalRow& r : rows) {
        os << r.profile << "," << r.model_kind << "," << r.l_eps << "," << fmt(r.beta_h) << ","
           << fmt(r.beta_emev) << "," << nmse_field(r.nmse_v_db, r.nmse_v_perfect) << ","
           << (r.nmse_v_perfect ? 1 : 0) << "," << nmse_field(r.nmse_s_db, r.nmse_s_perfect) << ","
           << (r.nmse_s_perfect ? 1 : 0) << "," << fmt(r.rho_v) << "," << fmt(r.rho_s) << ","
           << r.n_samples << "\n";
    }
    if (!os) throw IoError("write failed: " + path);
}

void write_report_json(const std::string& path, const std::string& manifest,
                       const std::vector<EvalRow>& rows) {
    nlohmann::json j;
    j["manifest"] = manifest;
    j["rows"] = nlohmann::json::array();
    for (const EvalRow& r : rows) {
        nlohmann::json o;
        o["profile"] = r.profile;
        o["model_kind"] = r.model_kind;
        o["l_eps"] = r.l_eps;
        o["beta_h"] = r.beta_h;
        o["beta_emev"] = r.beta_emev;
        if (r.nmse_v_perfect) {
            o["nmse_v_db"] = "-inf";
        } else {
            o["nmse_v_db"] = r.nmse_v_db;
        }
        o["nmse_v_perfect"] = r.nmse_v_perfect;
        if (r.nmse_s_perfect) {
            o["nmse_s_db"] = "-inf";
        } else {
            o["nmse_s_db"] = r.nmse_s_db;
        }
        o["nmse_s_perfect"] = r.nmse_s_perfect;
        o["rho_v"] = r.rho_v;
        o["rho_s"] = r.rho_s;
        o["n_samples"] = r.n_samples;
        j["rows"].push_back(o);
    }
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << j.dump(2) << "\n";
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace emev
