#pragma once

// Small dense solvers shared by the fitting and calibration code. Kept
// internal: public APIs only expose the geometry types.

#include <array>
#include <cmath>
#include <cstddef>

namespace fringeforge::detail {

/// Jacobi eigendecomposition of a symmetric 3x3 matrix (row-major).
/// Eigenvalues ascending; eigenvectors_col[c] is the unit eigenvector of
/// eigenvalue c stored as a column triple.
struct Eigen3 {
    std::array<double, 3> values{};
    std::array<std::array<double, 3>, 3> vectors{};  // vectors[c] = eigenvector c
};

inline Eigen3 jacobi_eigen_sym3(std::array<double, 9> a) {
    std::array<double, 9> v{1, 0, 0, 0, 1, 0, 0, 0, 1};
    auto at = [](std::array<double, 9>& m, int r, int c) -> double& { return m[3 * r + c]; };

    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = std::abs(at(a, 0, 1)) + std::abs(at(a, 0, 2)) + std::abs(at(a, 1, 2));
        if (off == 0.0) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                const double apq = at(a, p, q);
                if (apq == 0.0) continue;
                const double app = at(a, p, p);
                const double aqq = at(a, q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int k = 0; k < 3; ++k) {
                    const double akp = at(a, k, p);
                    const double akq = at(a, k, q);
                    at(a, k, p) = c * akp - s * akq;
                    at(a, k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double apk = at(a, p, k);
                    const double aqk = at(a, q, k);
                    at(a, p, k) = c * apk - s * aqk;
                    at(a, q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < 3; ++k) {
                    const double vkp = at(v, k, p);
                    const double vkq = at(v, k, q);
                    at(v, k, p) = c * vkp - s * vkq;
                    at(v, k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    Eigen3 out;
    std::array<int, 3> order{0, 1, 2};
    std::array<double, 3> diag{a[0], a[4], a[8]};
    // insertion sort ascending
    for (int i = 1; i < 3; ++i)
        for (int j = i; j > 0 && diag[order[j]] < diag[order[j - 1]]; --j)
            std::swap(order[j], order[j - 1]);
    for (int c = 0; c < 3; ++c) {
        out.values[c] = diag[order[c]];
        for (int r = 0; r < 3; ++r) out.vectors[c][r] = v[3 * r + order[c]];
    }
    return out;
}

/// Gaussian elimination with partial pivoting; returns false if the pivot
/// falls below `pivot_tol` times the largest initial column magnitude.
template <std::size_t N>
bool solve_linear(std::array<double, N * N> a, std::array<double, N>& rhs,
                  double pivot_tol = 1e-12) {
    double scale = 0.0;
    for (const double x : a) scale = std::max(scale, std::abs(x));
    if (scale == 0.0) return false;

    std::array<std::size_t, N> perm{};
    for (std::size_t i = 0; i < N; ++i) perm[i] = i;

    for (std::size_t col = 0; col < N; ++col) {
        std::size_t best = col;
        for (std::size_t r = col + 1; r < N; ++r)
            if (std::abs(a[perm[r] * N + col]) > std::abs(a[perm[best] * N + col])) best = r;
        std::swap(perm[col], perm[best]);
        const double pivot = a[perm[col] * N + col];
        if (std::abs(pivot) <= pivot_tol * scale) return false;
        for (std::size_t r = col + 1; r < N; ++r) {
            const double f = a[perm[r] * N + col] / pivot;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < N; ++c) a[perm[r] * N + c] -= f * a[perm[col] * N + c];
            rhs[perm[r]] -= f * rhs[perm[col]];
        }
    }

    std::array<double, N> x{};
    for (std::size_t i = N; i-- > 0;) {
        double s = rhs[perm[i]];
        for (std::size_t c = i + 1; c < N; ++c) s -= a[perm[i] * N + c] * x[c];
        x[i] = s / a[perm[i] * N + i];
    }
    rhs = x;
    return true;
}

}  // namespace fringeforge::detail
