// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ghostalign/recovery.hpp"

#include <cmath>

#include "ghostalign/error.hpp"

namespace ghostalign::recovery {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void check_pair(const sim::ActivationPair& pair) {
    if (pair.pre.rows() == 0 || pair.pre.cols() == 0) throw ShapeError("calibration pair is empty");
    if (pair.pre.rows() != pair.post.rows() || pair.pre.cols() != pair.post.cols())
        throw ShapeError("X_pre and X_post differ in shape");
}

Matrix scale_columns(const Matrix& x, const std::vector<double>& s) {
    if (x.cols() != s.size()) {
        throw ShapeError("operator is " + std::to_string(s.size()) + " wide, input has " + std::to_string(x.cols()) +
                         " channels");
    }
    Matrix out = x;
    for (std::size_t t = 0; t < out.rows(); ++t) {
        auto row = out.row(t);
        for (std::size_t j = 0; j < s.size(); ++j) row[j] *= s[j];
    }
    return out;
}

// Per-column scalar regression of y_j on x_j.
std::vector<double> column_ratios(const Matrix& x, const Matrix& y, std::vector<std::size_t>* degenerate) {
    const std::size_t c = x.cols();
    std::vector<double> xy(c, 0.0);
    std::vector<double> xx(c, 0.0);
    for (std::size_t t = 0; t < x.rows(); ++t) {
        const auto xr = x.row(t);
        const auto yr = y.row(t);
        for (std::size_t j = 0; j < c; ++j) {
            xy[j] += xr[j] * yr[j];
            xx[j] += xr[j] * xr[j];
        }
    }
    std::vector<double> out(c);
    for (std::size_t j = 0; j < c; ++j) {
        if (xx[j] > 0.0) {
            out[j] = xy[j] / xx[j];
        } else {
            out[j] = 1.0;
            if (degenerate != nullptr) degenerate->push_back(j);
        }
    }
    return out;
}

}  // namespace

std::string to_string(Solver s) { return s == Solver::svd_pinv ? "svd" : "ridge"; }

Solver parse_solver(const std::string& s) {
    if (s == "svd" || s == "svd_pinv") return Solver::svd_pinv;
    if (s == "ridge" || s == "ridge_normal") return Solver::ridge_normal;
    throw ConfigError("fit.solver", "unknown solver '" + s + "'");
}

std::string to_string(Method m) {
    switch (m) {
        case Method::identity:
            return "identity";
        case Method::diag:
            return "diag";
        case Method::rotate:
            return "rotate";
        case Method::ghost:
            return "ghost";
    }
    return "unknown";
}

Method parse_method(const std::string& s) {
    if (s == "identity") return Method::identity;
    if (s == "diag") return Method::diag;
    if (s == "rotate") return Method::rotate;
    if (s == "ghost") return Method::ghost;
    throw ConfigError("fit.method", "unknown method '" + s + "'");
}

Matrix GhostOperator::full() const { return Matrix::identity(m_star.rows()) + m_star; }

GhostOperator fit_ghost(const sim::ActivationPair& pair, double eps, Solver solver) {
    check_pair(pair);
    if (!(eps > 0.0)) throw NumericalError("fit_ghost needs eps > 0");
    bool any = false;
    for (double v : pair.pre.values()) {
        if (v != 0.0) {
            any = true;
            break;
        }
    }
    if (!any) throw DegenerateInputError("X_pre is identically zero; the calibration capture is broken");

    const Matrix gap = pair.gap();
    GhostOperator op;
    op.eps_used = eps;
    op.solver = solver;
    op.token_count = pair.pre.rows();
    if (solver == Solver::svd_pinv) {
        op.m_star = linalg::pinv_apply(linalg::thin_svd(pair.pre), gap, eps);
    } else {
        linalg::GramAccumulator acc(pair.pre.cols(), gap.cols());
        acc.add(pair.pre, gap);
        op.m_star = linalg::ridge_solve(acc.gram(), acc.cross(), eps);
    }
    op.fit_residual = frobenius_norm(apply_operator(pair.pre, op) - pair.post);
    return op;
}

GhostOperator fit_ghost_streaming(const linalg::GramAccumulator& acc, double eps) {
    if (acc.token_count() == 0) throw DegenerateInputError("no calibration tokens were accumulated");
    GhostOperator op;
    op.m_star = linalg::ridge_solve(acc.gram(), acc.cross(), eps);
    op.eps_used = eps;
    op.solver = Solver::ridge_normal;
    op.token_count = acc.token_count();
    return op;
}

ChannelScale fit_channel_scale(const sim::ActivationPair& pair) {
    check_pair(pair);
    ChannelScale op;
    op.s = column_ratios(pair.pre, pair.post, &op.degenerate_channels);
    op.fit_residual = frobenius_norm(apply_operator(pair.pre, op) - pair.post);
    return op;
}

HadamardPatch fit_hadamard_patch(const sim::ActivationPair& pair) {
    check_pair(pair);
    const std::size_t c = pair.pre.cols();
    const Matrix h = linalg::hadamard_matrix(c);
    HadamardPatch op;
    op.d = column_ratios(matmul(pair.pre, h), matmul(pair.post, h), nullptr);
    op.fused = Matrix(c, c);
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < c; ++k) s += op.d[k] * (h(i, k) * h(j, k));
            op.fused(i, j) = s;
        }
    }
    op.fit_residual = frobenius_norm(apply_operator(pair.pre, op) - pair.post);
    return op;
}

Operator fit_operator(const sim::ActivationPair& pair, Method method, Solver solver, double eps) {
    switch (method) {
        case Method::identity:
            check_pair(pair);
            return IdentityOperator{};
        case Method::diag:
            return fit_channel_scale(pair);
        case Method::rotate:
            return fit_hadamard_patch(pair);
        case Method::ghost:
            return fit_ghost(pair, eps, solver);
    }
    throw ConfigError("fit.method", "unhandled method");
}

Matrix apply_operator(const Matrix& x, const Operator& op) {
    return std::visit(overloaded{
                          [&](const IdentityOperator&) { return x; },
                          [&](const GhostOperator& g) {
                              if (g.m_star.rows() != x.cols() || g.m_star.cols() != x.cols())
                                  throw ShapeError("ghost operator does not match " + std::to_string(x.cols()) +
                                                   " channels");
                              return x + matmul(x, g.m_star);
                          },
                          [&](const HadamardPatch& p) {
                              if (p.fused.rows() != x.cols())
                                  throw ShapeError("Hadamard patch does not match " + std::to_string(x.cols()) +
                                                   " channels");
                              return matmul(x, p.fused);
                          },
                          [&](const ChannelScale& s) { return scale_columns(x, s.s); },
                      },
                      op);
}

Matrix dense_matrix(const Operator& op, std::size_t hidden_dim) {
    return std::visit(overloaded{
                          [&](const IdentityOperator&) { return Matrix::identity(hidden_dim); },
                          [&](const GhostOperator& g) { return g.full(); },
                          [&](const HadamardPatch& p) { return p.fused; },
                          [&](const ChannelScale& s) { return Matrix::diagonal(s.s); },
                      },
                      op);
}

Matrix additive_part(const Operator& op, std::size_t hidden_dim) {
    if (const auto* g = std::get_if<GhostOperator>(&op)) return g->m_star;
    return dense_matrix(op, hidden_dim) - Matrix::identity(hidden_dim);
}

sim::BoundaryMap as_boundary_map(const Operator& op) {
    if (std::holds_alternative<IdentityOperator>(op)) return {};
    return [op](const Matrix& x) { return apply_operator(x, op); };
}

double alignment_residual(const sim::ActivationPair& pair, const Operator& op) {
    return frobenius_norm(apply_operator(pair.pre, op) - pair.post);
}

SymmetryDecomposition decompose_symmetry(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw ShapeError("symmetry decomposition needs a square matrix, got " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
    }
    const std::size_t n = m.rows();
    SymmetryDecomposition out{Matrix(n, n), Matrix(n, n)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out.m_sym(i, j) = 0.5 * (m(i, j) + m(j, i));
            out.m_asym(i, j) = 0.5 * (m(i, j) - m(j, i));
        }
    }
    out.norm_total = frobenius_norm(m);
    out.norm_sym = frobenius_norm(out.m_sym);
    out.norm_asym = frobenius_norm(out.m_asym);
    return out;
}

}  // namespace ghostalign::recovery
