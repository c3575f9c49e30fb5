#pragma once

// Small dense symmetric-matrix helpers: Cholesky, Jacobi eigendecomposition,
// eigenvalue clipping for PSD repair, and Gaussian elimination. Everything here
// targets matrices the size of a user type (a handful of advertisers).

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace adx {

using Matrix = std::vector<double>; // row-major n*n

inline double& mat_at(Matrix& a, std::size_t n, std::size_t i, std::size_t j) { return a[i * n + j]; }
inline double mat_at(const Matrix& a, std::size_t n, std::size_t i, std::size_t j) { return a[i * n + j]; }

// Lower-triangular L with L L^T = A; nullopt if A is not positive definite.
inline std::optional<Matrix> cholesky(const Matrix& a, std::size_t n) {
    Matrix l(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = mat_at(a, n, i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
            if (i == j) {
                if (s <= 0.0) return std::nullopt;
                l[i * n + i] = std::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    return l;
}

// Cyclic Jacobi; returns eigenvalues, fills eigenvectors as columns of V.
inline std::vector<double> jacobi_eigen(Matrix a, std::size_t n, Matrix& v) {
    v.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
        if (off < 1e-26) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = a[p * n + q];
                if (std::abs(apq) < 1e-300) continue;
                double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double vkp = v[k * n + p], vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<double> evals(n);
    for (std::size_t i = 0; i < n; ++i) evals[i] = a[i * n + i];
    return evals;
}

// Clips eigenvalues below `floor` to zero (dropping the direction) and
// rebuilds; also returns a sampling transform T = V diag(sqrt(lambda)) so
// x = mu + T z, z ~ N(0, I). Dropping rather than inflating keeps exactly
// semidefinite inputs (ties, constants) degenerate in the samples.
struct PsdRepair {
    Matrix matrix;    // repaired covariance
    Matrix transform; // n*n, columns scaled eigenvectors
    bool clipped = false;
};

inline PsdRepair psd_repair(const Matrix& a, std::size_t n, double floor = 1e-12) {
    Matrix v;
    std::vector<double> evals = jacobi_eigen(a, n, v);
    PsdRepair out;
    out.matrix.assign(n * n, 0.0);
    out.transform.assign(n * n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double lam = evals[k];
        if (lam < floor) {
            out.clipped = out.clipped || lam < -floor;
            lam = 0.0;
        }
        double s = std::sqrt(lam);
        for (std::size_t i = 0; i < n; ++i) {
            out.transform[i * n + k] = v[i * n + k] * s;
            for (std::size_t j = 0; j < n; ++j)
                out.matrix[i * n + j] += v[i * n + k] * lam * v[j * n + k];
        }
    }
    return out;
}

// Solves A x = b in place by Gaussian elimination with partial pivoting.
// Returns false if A is (near-)singular.
inline bool solve_linear(Matrix a, std::vector<double> b, std::size_t n,
                         std::vector<double>& x, double pivot_tol = 1e-12) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (std::abs(a[piv * n + col]) < pivot_tol) return false;
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
            std::swap(b[piv], b[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = a[r * n + col] / a[col * n + col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    x.assign(n, 0.0);
    for (std::size_t ri = n; ri-- > 0;) {
        double s = b[ri];
        for (std::size_t c = ri + 1; c < n; ++c) s -= a[ri * n + c] * x[c];
        x[ri] = s / a[ri * n + ri];
    }
    return true;
}

} // namespace adx
