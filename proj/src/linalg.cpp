#include "sml/linalg.hpp"

#include <cmath>
#include <memory>

#include "sml/errors.hpp"

namespace sml {

Mat Mat::identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat matmul(const Mat& x, const Mat& y) {
    if (x.cols != y.rows) throw ContractError("Mat matmul: inner extents differ");
    Mat out(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int p = 0; p < x.cols; ++p) {
            double v = x(i, p);
            if (v == 0.0) continue;
            for (int j = 0; j < y.cols; ++j) out(i, j) += v * y(p, j);
        }
    return out;
}

Mat transpose(const Mat& x) {
    Mat out(x.cols, x.rows);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) out(j, i) = x(i, j);
    return out;
}

double max_abs(const Mat& x) {
    double m = 0.0;
    for (double v : x.a) m = std::max(m, std::fabs(v));
    return m;
}

SpdMatrix::SpdMatrix(const Mat& m) {
    if (m.rows != m.cols) throw ContractError("SpdMatrix: matrix must be square");
    double scale = max_abs(m);
    for (int i = 0; i < m.rows; ++i)
        for (int j = i + 1; j < m.cols; ++j)
            if (std::fabs(m(i, j) - m(j, i)) > 1e-9 * std::max(scale, 1e-300))
                throw ContractError("SpdMatrix: matrix is not symmetric");
    n = m.rows;
    a = m.a;
}

namespace {

bool try_cholesky(const SpdMatrix& m, double jitter, std::vector<double>& l) {
    const int n = m.n;
    l.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int j = 0; j < n; ++j) {
        double d = m(j, j) + jitter;
        for (int p = 0; p < j; ++p) d -= l[static_cast<std::size_t>(j) * n + p] *
                                         l[static_cast<std::size_t>(j) * n + p];
        if (d <= 0.0 || !std::isfinite(d)) return false;
        double ljj = std::sqrt(d);
        l[static_cast<std::size_t>(j) * n + j] = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (int p = 0; p < j; ++p)
                s -= l[static_cast<std::size_t>(i) * n + p] * l[static_cast<std::size_t>(j) * n + p];
            l[static_cast<std::size_t>(i) * n + j] = s / ljj;
        }
    }
    return true;
}

} // namespace

CholeskyFactor cholesky_factor(const SpdMatrix& m) {
    CholeskyFactor f;
    f.n = m.n;
    if (try_cholesky(m, 0.0, f.l)) return f;
    double trace = 0.0;
    for (int i = 0; i < m.n; ++i) trace += m(i, i);
    double jitter = 1e-8 * trace / std::max(m.n, 1);
    for (int attempt = 0; attempt < 3; ++attempt) {
        if (jitter > 0.0 && try_cholesky(m, jitter, f.l)) {
            f.jitter = jitter;
            return f;
        }
        jitter *= 10.0;
    }
    throw SingularMatrixError("Cholesky factorization failed after jitter escalation");
}

Mat CholeskyFactor::solve(const Mat& rhs) const {
    if (rhs.rows != n) throw ContractError("cholesky solve: rhs row count mismatch");
    Mat x(rhs.rows, rhs.cols);
    // forward substitution L y = rhs
    for (int c = 0; c < rhs.cols; ++c) {
        for (int i = 0; i < n; ++i) {
            double s = rhs(i, c);
            for (int p = 0; p < i; ++p) s -= l[static_cast<std::size_t>(i) * n + p] * x(p, c);
            x(i, c) = s / l[static_cast<std::size_t>(i) * n + i];
        }
        // back substitution L^T z = y
        for (int i = n - 1; i >= 0; --i) {
            double s = x(i, c);
            for (int p = i + 1; p < n; ++p) s -= l[static_cast<std::size_t>(p) * n + i] * x(p, c);
            x(i, c) = s / l[static_cast<std::size_t>(i) * n + i];
        }
    }
    return x;
}

Mat cholesky_solve(const SpdMatrix& m, const Mat& rhs) {
    return cholesky_factor(m).solve(rhs);
}

double ridge_loss(const Mat& phi, const Mat& attrs, double lambda, const Mat& w) {
    Mat r = matmul(w, attrs);
    double loss = 0.0;
    for (std::size_t i = 0; i < r.a.size(); ++i) {
        double d = phi.a[i] - r.a[i];
        loss += d * d;
    }
    for (double v : w.a) loss += lambda * v * v;
    return loss;
}

template <typename Real>
Tensor<Real> ridge_solve(Tape<Real>& tape, const Tensor<Real>& phi, const Mat& attrs,
                         const Tensor<Real>& lambda) {
    if (phi.rank() != 2) throw ContractError("ridge_solve: phi must be rank-2 (d x m)");
    if (lambda.numel() != 1) throw ContractError("ridge_solve: lambda must be scalar");
    const int d = phi.shape()[0];
    const int m = phi.shape()[1];
    const int da = attrs.rows;
    if (attrs.cols != m)
        throw ContractError("ridge_solve: attrs column count must match phi's");
    if (m < 1) throw ContractError("ridge_solve: need at least one column pair");
    const double lam = static_cast<double>(lambda.values()[0]);
    if (!(lam > 0.0)) throw std::domain_error("ridge_solve: lambda must be > 0");

    Mat phi_d(d, m);
    for (std::size_t i = 0; i < phi_d.a.size(); ++i)
        phi_d.a[i] = static_cast<double>(phi.values()[i]);

    // M = A A^T + lambda I, symmetric by construction.
    Mat gram = matmul(attrs, transpose(attrs));
    for (int i = 0; i < da; ++i) gram(i, i) += lam;
    auto factor = std::make_shared<CholeskyFactor>(cholesky_factor(SpdMatrix(gram)));

    // W^T = M^-1 (Phi A^T)^T
    Mat pat = matmul(phi_d, transpose(attrs)); // d x da
    auto w = std::make_shared<Mat>(transpose(factor->solve(transpose(pat)))); // d x da

    std::vector<Real> values(w->a.size());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<Real>(w->a[i]);

    auto attrs_copy = std::make_shared<Mat>(attrs);
    Tensor<Real> phi_h = phi;
    Tensor<Real> lambda_h = lambda;
    return tape.custom(
        {phi, lambda}, {d, da}, std::move(values),
        [phi = phi_h, lambda = lambda_h, attrs_copy, factor, w, d, da](Tensor<Real>& out) mutable {
            Mat g(d, da);
            for (std::size_t i = 0; i < g.a.size(); ++i)
                g.a[i] = static_cast<double>(out.grad()[i]);
            if (phi.requires_grad()) {
                // dPhi = G (M^-1 A)
                Mat minv_a = factor->solve(*attrs_copy); // da x m
                Mat dphi = matmul(g, minv_a);            // d x m
                auto& pg = phi.grad();
                for (std::size_t i = 0; i < pg.size(); ++i)
                    pg[i] += static_cast<Real>(dphi.a[i]);
            }
            if (lambda.requires_grad()) {
                // dlambda = -trace(G^T W M^-1) = -sum_ij G_ij (W M^-1)_ij
                Mat wminv = transpose(factor->solve(transpose(*w))); // d x da
                double acc = 0.0;
                for (std::size_t i = 0; i < g.a.size(); ++i) acc += g.a[i] * wminv.a[i];
                lambda.grad()[0] += static_cast<Real>(-acc);
            }
        });
}

template Tensor<float> ridge_solve(Tape<float>&, const Tensor<float>&, const Mat&,
                                   const Tensor<float>&);
template Tensor<double> ridge_solve(Tape<double>&, const Tensor<double>&, const Mat&,
                                    const Tensor<double>&);

} // namespace sml
