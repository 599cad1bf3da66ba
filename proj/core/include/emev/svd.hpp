#pragma once

#include <vector>

#include "emev/channel.hpp"

namespace emev {

// Per-RB SVD triplet of H = U diag(S) V^H (first n_r columns of V span the
// row space; the remaining columns complete an orthonormal basis).
// U: [n_rb][n_r][n_r], V: [n_rb][n_t][n_t] row-major, S descending per RB.
struct EigenDecomposition {
    int n_rb = 0, n_r = 0, n_t = 0;
    std::vector<cd> u;
    std::vector<double> s;
    std::vector<cd> v;
    std::vector<char> degenerate;  // per-RB flag, set for zero slices

    cd& u_at(int rb, int i, int j) { return u[static_cast<size_t>((rb * n_r + i) * n_r + j)]; }
    const cd& u_at(int rb, int i, int j) const { return u[static_cast<size_t>((rb * n_r + i) * n_r + j)]; }
    cd& v_at(int rb, int i, int j) { return v[static_cast<size_t>((rb * n_t + i) * n_t + j)]; }
    const cd& v_at(int rb, int i, int j) const { return v[static_cast<size_t>((rb * n_t + i) * n_t + j)]; }
    double& s_at(int rb, int i) { return s[static_cast<size_t>(rb * n_r + i)]; }
    const double& s_at(int rb, int i) const { return s[static_cast<size_t>(rb * n_r + i)]; }
};

// One-sided Jacobi per RB with a deterministic sign/phase convention: each
// U column is rotated so its largest-magnitude entry is real non-negative
// (matching rotation applied to V). Singular values sorted descending, ties
// kept in original column order.
EigenDecomposition svd_transform(const ChannelTensor& h);

// x_t = V x for one RB slice of V (n_t x n_t, row-major).
std::vector<cd> precode(const std::vector<cd>& v_rb, int n_t, const std::vector<cd>& x);

// U^H y for one RB slice of U (n_r x n_r, row-major).
std::vector<cd> combine(const std::vector<cd>& u_rb, int n_r, const std::vector<cd>& y);

// Per-RB relative Frobenius residual || H_rb - U S V^H ||_F / || H_rb ||_F.
// Zero slices report 0 (the decomposition flags them degenerate).
std::vector<double> reconstruction_residual(const EigenDecomposition& d, const ChannelTensor& h);

}  // namespace emev
