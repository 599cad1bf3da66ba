#pragma once

#include <string>
#include <vector>

#include "emev/baseline.hpp"
#include "emev/emevnet.hpp"

namespace emev {

struct Nmse {
    double db = 0.0;
    bool perfect = false;  // exact reconstruction; db is meaningless (-inf)
};

// Sum of squared errors over sum of squared reference entries (linear).
// Complex tensors are measured on their stacked real/imag representation,
// which this f32 layout already is.
double nmse_linear(const Tensor& x, const Tensor& x_hat);

Nmse nmse_from_linear(double ratio);

// Mean over RBs and columns of |<x_col, x̂_col>| / (||x_col|| ||x̂_col||)
// on (n_rb, rows, cols, 2) complex tensors. Zero columns are skipped but
// still counted in the mean denominator; an all-zero pair throws.
double cosine_similarity_v(const Tensor& x, const Tensor& x_hat);

// Same per-RB measure on real (n_rb, n) tensors.
double cosine_similarity_s(const Tensor& x, const Tensor& x_hat);

// One row of the evaluation report; mirrors the numerical-results layout
// (model kind in {N_sp, N_mix, N_csi}).
struct EvalRow {
    std::string profile;
    std::string model_kind;
    int l_eps = 0;
    double beta_h = 0.0;
    double beta_emev = 0.0;
    double nmse_v_db = 0.0;
    bool nmse_v_perfect = false;
    double nmse_s_db = 0.0;
    bool nmse_s_perfect = false;
    double rho_v = 0.0;
    double rho_s = 0.0;
    int n_samples = 0;
};

// Frozen-model evaluation over the given sample indices; deterministic order.
// S metrics are computed on de-normalized (s_scale-multiplied) values.
EvalRow evaluate_emev(EmevNet& net, const std::vector<EmevSample>& samples,
                      const std::vector<int>& indices, const std::string& profile,
                      const std::string& model_kind, double beta_h);

// Baseline path: reconstruct H, then SVD at the receiver and compare (V, S).
EvalRow evaluate_baseline(BaselineNet& net, const Dataset& ds,
                          const std::vector<int>& indices, const std::string& profile,
                          double beta_h);

// CSV is authoritative; JSON mirrors it. Both start with a manifest line.
void write_report_csv(const std::string& path, const std::string& manifest,
                      const std::vector<EvalRow>& rows);
void write_report_json(const std::string& path, const std::string& manifest,
                       const std::vector<EvalRow>& rows);

}  // namespace emev
