// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ghostalign/linalg.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ghostalign/error.hpp"

namespace ghostalign::linalg {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void rotate(double* a, double* b, std::size_t n, double c, double s) {
    for (std::size_t k = 0; k < n; ++k) {
        const double x = a[k];
        const double y = b[k];
        a[k] = c * x - s * y;
        b[k] = s * x + c * y;
    }
}

// Factors a tall-or-square matrix (rows >= cols).
SvdFactors jacobi_tall(const Matrix& a, const JacobiOptions& options) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();

    // Row k of `work` is column k of a; row k of `vt_work` is column k of V.
    Matrix work = a.transposed();
    Matrix vt_work = Matrix::identity(n);

    const double fro = frobenius_norm(a);
    // Columns below this squared norm are numerical zeros and are not rotated.
    const double negligible = std::pow(std::numeric_limits<double>::epsilon() * fro * static_cast<double>(n), 2);

    bool converged = false;
    for (int sweep = 0; sweep < options.max_sweeps && !converged; ++sweep) {
        converged = true;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            double* gi = work.row(i).data();
            for (std::size_t j = i + 1; j < n; ++j) {
                double* gj = work.row(j).data();
                const double alpha = dot(gi, gi, m);
                const double beta = dot(gj, gj, m);
                if (alpha <= negligible || beta <= negligible) continue;
                const double gamma = dot(gi, gj, m);
                if (std::abs(gamma) <= options.tolerance * std::sqrt(alpha) * std::sqrt(beta)) continue;
                converged = false;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate(gi, gj, m, c, s);
                rotate(vt_work.row(i).data(), vt_work.row(j).data(), n, c, s);
            }
        }
    }
    if (!converged) {
        throw ConvergenceError("one-sided Jacobi SVD did not converge within " + std::to_string(options.max_sweeps) +
                               " sweeps on a " + std::to_string(m) + "x" + std::to_string(n) + " matrix");
    }

    std::vector<double> norms(n);
    for (std::size_t k = 0; k < n; ++k) norms[k] = std::sqrt(dot(work.row(k).data(), work.row(k).data(), m));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

    SvdFactors f{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
    std::vector<std::size_t> deficient;
    for (std::size_t out = 0; out < n; ++out) {
        const std::size_t k = order[out];
        f.sigma[out] = norms[k];
        std::copy(vt_work.row(k).begin(), vt_work.row(k).end(), f.vt.row(out).begin());
        if (norms[k] * norms[k] <= negligible) {
            deficient.push_back(out);
            continue;
        }
        const double* g = work.row(k).data();
        for (std::size_t r = 0; r < m; ++r) f.u(r, out) = g[r] / norms[k];
    }

    // Complete u with unit vectors orthogonal to every accepted column.
    std::size_t candidate = 0;
    std::vector<double> v(m);
    for (std::size_t out : deficient) {
        for (; candidate < m; ++candidate) {
            std::fill(v.begin(), v.end(), 0.0);
            v[candidate] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t col = 0; col < n; ++col) {
                    if (col == out) continue;
                    double proj = 0.0;
                    for (std::size_t r = 0; r < m; ++r) proj += f.u(r, col) * v[r];
                    for (std::size_t r = 0; r < m; ++r) v[r] -= proj * f.u(r, col);
                }
            }
            const double len = std::sqrt(dot(v.data(), v.data(), m));
            if (len > 0.5) {
                for (std::size_t r = 0; r < m; ++r) f.u(r, out) = v[r] / len;
                ++candidate;
                break;
            }
        }
    }
    return f;
}

}  // namespace

std::size_t SvdFactors::rank(double rel_tol) const noexcept {
    if (sigma.empty() || sigma.front() <= 0.0) return 0;
    const double cut = rel_tol * sigma.front();
    return static_cast<std::size_t>(std::count_if(sigma.begin(), sigma.end(), [cut](double s) { return s > cut; }));
}

SvdFactors thin_svd(const Matrix& a, const JacobiOptions& options) {
    if (a.rows() == 0 || a.cols() == 0) throw ShapeError("thin_svd needs a non-empty matrix");
    if (a.rows() >= a.cols()) return jacobi_tall(a, options);
    SvdFactors t = jacobi_tall(a.transposed(), options);
    return SvdFactors{t.vt.transposed(), std::move(t.sigma), t.u.transposed()};
}

Matrix pinv_apply(const SvdFactors& f, const Matrix& b, double eps) {
    if (f.u.rows() != b.rows()) {
        throw ShapeError("pinv_apply: factors have " + std::to_string(f.u.rows()) + " rows, right-hand side has " +
                         std::to_string(b.rows()));
    }
    if (!(eps > 0.0)) throw NumericalError("pinv_apply needs a positive truncation threshold");
    Matrix projected = matmul_tn(f.u, b);
    const double cut = f.sigma.empty() ? 0.0 : eps * f.sigma.front();
    for (std::size_t i = 0; i < f.sigma.size(); ++i) {
        const double inv = f.sigma[i] > cut ? 1.0 / f.sigma[i] : 0.0;
        for (double& v : projected.row(i)) v *= inv;
    }
    return matmul_tn(f.vt, projected);
}

namespace {

bool cholesky(Matrix& a) {
    const std::size_t n = a.rows();
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
        if (!(d > 0.0)) return false;
        const double ljj = std::sqrt(d);
        a(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
            a(i, j) = s / ljj;
        }
    }
    return true;
}

Matrix cholesky_solve(const Matrix& l, const Matrix& rhs) {
    const std::size_t n = l.rows();
    Matrix x = rhs;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
            x(i, c) = s / l(i, i);
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x(i, c);
            for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x(k, c);
            x(i, c) = s / l(i, i);
        }
    }
    return x;
}

// Unit lower L in the strict lower triangle, D on the diagonal.
bool ldlt(Matrix& a) {
    const std::size_t n = a.rows();
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k) * a(k, k);
        if (d == 0.0 || !std::isfinite(d)) return false;
        a(j, j) = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k) * a(k, k);
            a(i, j) = s / d;
        }
    }
    return true;
}

Matrix ldlt_solve(const Matrix& f, const Matrix& rhs) {
    const std::size_t n = f.rows();
    Matrix x = rhs;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= f(i, k) * x(k, c);
            x(i, c) = s;
        }
        for (std::size_t i = 0; i < n; ++i) x(i, c) /= f(i, i);
        for (std::size_t i = n; i-- > 0;) {
            double s = x(i, c);
            for (std::size_t k = i + 1; k < n; ++k) s -= f(k, i) * x(k, c);
            x(i, c) = s;
        }
    }
    return x;
}

}  // namespace

Matrix ridge_solve(const Matrix& gram, const Matrix& cross, double eps) {
    const std::size_t n = gram.rows();
    if (gram.cols() != n) throw ShapeError("ridge_solve: gram must be square");
    if (cross.rows() != n) {
        throw ShapeError("ridge_solve: gram is " + std::to_string(n) + "x" + std::to_string(n) + " but cross has " +
                         std::to_string(cross.rows()) + " rows");
    }
    double scale = 0.0;
    for (double v : gram.values()) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(gram(i, j) - gram(j, i)) > 1e-12 * std::max(1.0, scale))
                throw ShapeError("ridge_solve: gram is not symmetric");

    const double ridge = std::max(eps, kRidgeFloor);
    Matrix a = gram;
    for (std::size_t i = 0; i < n; ++i) a(i, i) += ridge;

    Matrix factor = a;
    if (cholesky(factor)) return cholesky_solve(factor, cross);
    factor = a;
    if (ldlt(factor)) return ldlt_solve(factor, cross);
    throw NumericalError("ridge_solve: ridged Gram matrix is singular (ridge " + std::to_string(ridge) + ")");
}

GramAccumulator::GramAccumulator(std::size_t x_dim, std::size_t y_dim) : gram_(x_dim, x_dim), cross_(x_dim, y_dim) {}

void GramAccumulator::add(const Matrix& x_batch, const Matrix& y_batch) {
    if (x_batch.rows() != y_batch.rows()) {
        throw ShapeError("gram_accumulate: x batch has " + std::to_string(x_batch.rows()) + " rows, y batch has " +
                         std::to_string(y_batch.rows()));
    }
    if (x_batch.cols() != x_dim() || y_batch.cols() != y_dim()) {
        throw ShapeError("gram_accumulate: batch widths " + std::to_string(x_batch.cols()) + "/" +
                         std::to_string(y_batch.cols()) + " do not match accumulator " + std::to_string(x_dim()) +
                         "/" + std::to_string(y_dim()));
    }
    matmul_tn_accumulate(gram_, x_batch, x_batch);
    matmul_tn_accumulate(cross_, x_batch, y_batch);
    token_count_ += x_batch.rows();
}

GramAccumulator gram_accumulate(GramAccumulator acc, const Matrix& x_batch, const Matrix& y_batch) {
    acc.add(x_batch, y_batch);
    return acc;
}

Matrix hadamard_matrix(std::size_t c) {
    if (!is_power_of_two(c)) {
        throw UnsupportedDimensionError("Walsh-Hadamard matrix needs a power-of-two size, got " + std::to_string(c));
    }
    // Sylvester: H_{2k} = [[H_k, H_k], [H_k, -H_k]]; entry sign is (-1)^popcount(i & j).
    const double scale = 1.0 / std::sqrt(static_cast<double>(c));
    Matrix h(c, c);
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < c; ++j) h(i, j) = (std::popcount(i & j) % 2 == 0) ? scale : -scale;
    return h;
}

}  // namespace ghostalign::linalg
