#pragma once

#include <vector>

#include "sml/tensor.hpp"

namespace sml {

/// Minimal dense row-major double matrix for the small solves behind the
/// prototype fit. Attribute dimensionality stays tiny, so everything here is
/// plain loops in 64-bit regardless of the working tensor precision.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    static Mat identity(int n);
};

Mat matmul(const Mat& x, const Mat& y);
Mat transpose(const Mat& x);
double max_abs(const Mat& x);

/// Symmetric matrix destined for a Cholesky factorization. Construction
/// rejects asymmetry beyond 1e-9 relative.
struct SpdMatrix {
    int n = 0;
    std::vector<double> a;

    SpdMatrix() = default;
    explicit SpdMatrix(const Mat& m);

    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
};

/// Lower-triangular factor plus the jitter that was needed to obtain it.
struct CholeskyFactor {
    int n = 0;
    std::vector<double> l;
    double jitter = 0.0;

    Mat solve(const Mat& rhs) const;
};

/// Factor m = L L^T. On failure, adds 1e-8 * trace(m) / n to the diagonal and
/// escalates x10 up to 3 times before raising SingularMatrixError.
CholeskyFactor cholesky_factor(const SpdMatrix& m);

/// Solve m X = rhs via Cholesky with the jitter policy above.
Mat cholesky_solve(const SpdMatrix& m, const Mat& rhs);

/// Ridge objective ||phi - w attrs||_2^2 + lambda ||w||_2^2 for a candidate w.
double ridge_loss(const Mat& phi, const Mat& attrs, double lambda, const Mat& w);

/// Differentiable closed-form ridge fit: returns W = Phi A^T (A A^T + lambda I)^-1,
/// the minimizer of ||Phi - W A||^2 + lambda ||W||^2.
///
/// phi is d x m on the tape, attrs is a constant d_a x m design, lambda is a
/// positive scalar on the tape. The backward rule produces, for upstream
/// gradient G = dL/dW,
///   dL/dPhi    = G M^-1 A            with M = A A^T + lambda I,
///   dL/dlambda = -trace(G^T W M^-1).
/// The solve runs in 64-bit and reuses the forward factorization (including
/// any jitter) so forward and backward stay consistent.
template <typename Real>
Tensor<Real> ridge_solve(Tape<Real>& tape, const Tensor<Real>& phi, const Mat& attrs,
                         const Tensor<Real>& lambda);

} // namespace sml
