#include "emev/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emev/errors.hpp"

namespace emev {

namespace {

constexpr int kMaxSweeps = 60;
constexpr double kOffDiagTol = 1e-10;

// Orthogonalizes the n_r columns of a (n_t x n_r, column-major here) by plane
// rotations; accumulates the same rotations into z (n_r x n_r, column-major).
// Returns false if the off-diagonal tolerance was not reached.
bool one_sided_jacobi(std::vector<std::vector<cd>>& a, std::vector<std::vector<cd>>& z) {
    int n = static_cast<int>(a.size());
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double worst = 0.0;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0;
                cd gamma{0.0, 0.0};
                size_t m = a[static_cast<size_t>(p)].size();
                for (size_t i = 0; i < m; ++i) {
                    const cd& ap = a[static_cast<size_t>(p)][i];
                    const cd& aq = a[static_cast<size_t>(q)][i];
                    alpha += std::norm(ap);
                    beta += std::norm(aq);
                    gamma += std::conj(ap) * aq;
                }
                double g = std::abs(gamma);
                double denom = std::sqrt(alpha * beta);
                if (denom <= 0.0) continue;
                worst = std::max(worst, g / denom);
                if (g <= kOffDiagTol * denom) continue;
                cd phase = gamma / g;  // e^{i phi}
                double zeta = (beta - alpha) / (2.0 * g);
                double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                cd s_ph = s * phase;            // applied to column q side
                cd s_phc = s * std::conj(phase);
                for (size_t i = 0; i < m; ++i) {
                    cd ap = a[static_cast<size_t>(p)][i];
                    cd aq = a[static_cast<size_t>(q)][i];
                    a[static_cast<size_t>(p)][i] = c * ap - s_phc * aq;
                    a[static_cast<size_t>(q)][i] = s_ph * ap + c * aq;
                }
                for (size_t i = 0; i < z[static_cast<size_t>(p)].size(); ++i) {
                    cd zp = z[static_cast<size_t>(p)][i];
                    cd zq = z[static_cast<size_t>(q)][i];
                    z[static_cast<size_t>(p)][i] = c * zp - s_phc * zq;
                    z[static_cast<size_t>(q)][i] = s_ph * zp + c * zq;
                }
            }
        }
        if (worst <= kOffDiagTol) return true;
    }
    return false;
}

}  // namespace

EigenDecomposition svd_transform(const ChannelTensor& h) {
    const int n_rb = h.n_rb, n_r = h.n_r, n_t = h.n_t;
    EigenDecomposition d;
    d.n_rb = n_rb;
    d.n_r = n_r;
    d.n_t = n_t;
    d.u.assign(static_cast<size_t>(n_rb) * n_r * n_r, cd{0.0, 0.0});
    d.s.assign(static_cast<size_t>(n_rb) * n_r, 0.0);
    d.v.assign(static_cast<size_t>(n_rb) * n_t * n_t, cd{0.0, 0.0});
    d.degenerate.assign(static_cast<size_t>(n_rb), 0);

    for (int rb = 0; rb < n_rb; ++rb) {
        double slice_norm = 0.0;
        for (int r = 0; r < n_r; ++r) {
            for (int t = 0; t < n_t; ++t) slice_norm += std::norm(h.at(rb, r, t));
        }
        if (slice_norm == 0.0) {
            d.degenerate[static_cast<size_t>(rb)] = 1;
            for (int i = 0; i < n_r; ++i) d.u_at(rb, i, i) = cd{1.0, 0.0};
            for (int i = 0; i < n_t; ++i) d.v_at(rb, i, i) = cd{1.0, 0.0};
            continue;
        }
        // Work on A = H^H (n_t x n_r): A = W diag(sigma) Z^H after column
        // orthogonalization, hence H = Z diag(sigma) W^H with U = Z, V[:, :n_r] = W.
        std::vector<std::vector<cd>> a(static_cast<size_t>(n_r), std::vector<cd>(static_cast<size_t>(n_t)));
        std::vector<std::vector<cd>> z(static_cast<size_t>(n_r), std::vector<cd>(static_cast<size_t>(n_r), cd{0.0, 0.0}));
        for (int col = 0; col < n_r; ++col) {
            z[static_cast<size_t>(col)][static_cast<size_t>(col)] = cd{1.0, 0.0};
            for (int row = 0; row < n_t; ++row) {
                a[static_cast<size_t>(col)][static_cast<size_t>(row)] = std::conj(h.at(rb, col, row));
            }
        }
        if (!one_sided_jacobi(a, z)) {
            throw NumericError("svd_transform: Jacobi sweeps did not converge at RB " + std::to_string(rb));
        }
        std::vector<double> sigma(static_cast<size_t>(n_r), 0.0);
        for (int col = 0; col < n_r; ++col) {
            double norm_sq = 0.0;
            for (const cd& v : a[static_cast<size_t>(col)]) norm_sq += std::norm(v);
            sigma[static_cast<size_t>(col)] = std::sqrt(norm_sq);
        }
        // Descending order, ties stable by original column index.
        std::vector<int> order(static_cast<size_t>(n_r));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int x, int y) { return sigma[static_cast<size_t>(x)] > sigma[static_cast<size_t>(y)]; });

        double sigma_max = sigma[static_cast<size_t>(order[0])];
        double rank_tol = sigma_max * 1e-13;

        // V columns: normalized A columns for the numerically nonzero singular
        // values, Gram-Schmidt completion (seeded from the canonical basis)
        // for the rest.
        std::vector<std::vector<cd>> v_cols;
        v_cols.reserve(static_cast<size_t>(n_t));
        std::vector<bool> filled(static_cast<size_t>(n_r), false);
        for (int k = 0; k < n_r; ++k) {
            int src = order[static_cast<size_t>(k)];
            double sg = sigma[static_cast<size_t>(src)];
            d.s_at(rb, k) = sg;
            for (int i = 0; i < n_r; ++i) {
                d.u_at(rb, i, k) = z[static_cast<size_t>(src)][static_cast<size_t>(i)];
            }
            if (sg > rank_tol) {
                std::vector<cd> col(static_cast<size_t>(n_t));
                for (int i = 0; i < n_t; ++i) {
                    col[static_cast<size_t>(i)] = a[static_cast<size_t>(src)][static_cast<size_t>(i)] / sg;
                }
                v_cols.push_back(std::move(col));
                filled[static_cast<size_t>(k)] = true;
            }
        }
        size_t range_cols = v_cols.size();
        // Gram-Schmidt completion from the canonical basis. Seeds whose
        // residual is too small are skipped but revisited on later passes;
        // the residual energies over all seeds sum to n_t - filled, so every
        // pass accepts at least one seed and the loop terminates.
        while (v_cols.size() < static_cast<size_t>(n_t)) {
            size_t before = v_cols.size();
            for (int e = 0; e < n_t && v_cols.size() < static_cast<size_t>(n_t); ++e) {
                std::vector<cd> cand(static_cast<size_t>(n_t), cd{0.0, 0.0});
                cand[static_cast<size_t>(e)] = cd{1.0, 0.0};
                for (int pass = 0; pass < 2; ++pass) {
                    for (const auto& col : v_cols) {
                        cd proj{0.0, 0.0};
                        for (int i = 0; i < n_t; ++i) proj += std::conj(col[static_cast<size_t>(i)]) * cand[static_cast<size_t>(i)];
                        for (int i = 0; i < n_t; ++i) cand[static_cast<size_t>(i)] -= proj * col[static_cast<size_t>(i)];
                    }
                }
                double nrm_sq = 0.0;
                for (const cd& v : cand) nrm_sq += std::norm(v);
                if (nrm_sq < 1e-6) continue;
                double inv = 1.0 / std::sqrt(nrm_sq);
                for (cd& v : cand) v *= inv;
                v_cols.push_back(std::move(cand));
            }
            if (v_cols.size() == before) {
                throw NumericError("svd_transform: basis completion failed at RB " + std::to_string(rb));
            }
        }
        // Place columns: range columns occupy the slots of their singular
        // values; completion columns fill the remaining slots in order.
        std::vector<int> slot_of_col(static_cast<size_t>(n_t), -1);
        size_t next_range = 0;
        for (int k = 0; k < n_r; ++k) {
            if (filled[static_cast<size_t>(k)]) slot_of_col[next_range++] = k;
        }
        int next_free = 0;
        auto next_free_slot = [&]() {
            while (true) {
                bool used = next_free < n_r && filled[static_cast<size_t>(next_free)];
                if (!used) return next_free++;
                ++next_free;
            }
        };
        for (size_t c = range_cols; c < v_cols.size(); ++c) slot_of_col[c] = next_free_slot();
        for (size_t c = 0; c < v_cols.size(); ++c) {
            int k = slot_of_col[c];
            for (int i = 0; i < n_t; ++i) d.v_at(rb, i, k) = v_cols[c][static_cast<size_t>(i)];
        }
        // Phase convention: rotate each U column so its largest-magnitude
        // entry is real non-negative; matching rotation on the V column keeps
        // u v^H invariant. Null-space V columns get the same convention on
        // themselves.
        for (int k = 0; k < n_t; ++k) {
            if (k < n_r) {
                int best = 0;
                double best_mag = 0.0;
                for (int i = 0; i < n_r; ++i) {
                    double mag = std::abs(d.u_at(rb, i, k));
                    if (mag > best_mag + 1e-15) {
                        best_mag = mag;
                        best = i;
                    }
                }
                if (best_mag > 0.0) {
                    cd rot = std::conj(d.u_at(rb, best, k)) / best_mag;
                    for (int i = 0; i < n_r; ++i) d.u_at(rb, i, k) *= rot;
                    for (int i = 0; i < n_t; ++i) d.v_at(rb, i, k) *= rot;
                }
            } else {
                int best = 0;
                double best_mag = 0.0;
                for (int i = 0; i < n_t; ++i) {
                    double mag = std::abs(d.v_at(rb, i, k));
                    if (mag > best_mag + 1e-15) {
                        best_mag = mag;
                        best = i;
                    }
                }
                if (best_mag > 0.0) {
                    cd rot = std::conj(d.v_at(rb, best, k)) / best_mag;
                    for (int i = 0; i < n_t; ++i) d.v_at(rb, i, k) *= rot;
                }
            }
        }
    }
    return d;
}

std::vector<cd> precode(const std::vector<cd>& v_rb, int n_t, const std::vector<cd>& x) {
    if (static_cast<int>(x.size()) != n_t || static_cast<int>(v_rb.size()) != n_t * n_t) {
        throw DimensionError("precode: dimension mismatch");
    }
    std::vector<cd> out(static_cast<size_t>(n_t), cd{0.0, 0.0});
    for (int i = 0; i < n_t; ++i) {
        cd acc{0.0, 0.0};
        for (int j = 0; j < n_t; ++j) acc += v_rb[static_cast<size_t>(i * n_t + j)] * x[static_cast<size_t>(j)];
        out[static_cast<size_t>(i)] = acc;
    }
    return out;
}

std::vector<cd> combine(const std::vector<cd>& u_rb, int n_r, const std::vector<cd>& y) {
    if (static_cast<int>(y.size()) != n_r || static_cast<int>(u_rb.size()) != n_r * n_r) {
        throw DimensionError("combine: dimension mismatch");
    }
    std::vector<cd> out(static_cast<size_t>(n_r), cd{0.0, 0.0});
    for (int i = 0; i < n_r; ++i) {
        cd acc{0.0, 0.0};
        for (int j = 0; j < n_r; ++j) {
            acc += std::conj(u_rb[static_cast<size_t>(j * n_r + i)]) * y[static_cast<size_t>(j)];
        }
        out[static_cast<size_t>(i)] = acc;
    }
    return out;
}

std::vector<double> reconstruction_residual(const EigenDecomposition& d, const ChannelTensor& h) {
    if (d.n_rb != h.n_rb || d.n_r != h.n_r || d.n_t != h.n_t) {
        throw DimensionError("reconstruction_residual: decomposition/tensor shape mismatch");
    }
    std::vector<double> res(static_cast<size_t>(h.n_rb), 0.0);
    for (int rb = 0; rb < h.n_rb; ++rb) {
        double num = 0.0, den = 0.0;
        for (int r = 0; r < h.n_r; ++r) {
            for (int t = 0; t < h.n_t; ++t) {
                cd rec{0.0, 0.0};
                for (int k = 0; k < h.n_r; ++k) {
                    rec += d.u_at(rb, r, k) * d.s_at(rb, k) * std::conj(d.v_at(rb, t, k));
                }
                num += std::norm(h.at(rb, r, t) - rec);
                den += std::norm(h.at(rb, r, t));
            }
        }
        res[static_cast<size_t>(rb)] = den > 0.0 ? std::sqrt(num / den) : 0.0;
    }
    return res;
}

}  // namespace emev
