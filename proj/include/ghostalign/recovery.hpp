// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ghostalign/linalg.hpp"
#include "ghostalign/matrix.hpp"
#include "ghostalign/simulator.hpp"

namespace ghostalign::recovery {

enum class Solver { svd_pinv, ridge_normal };

/// Recovery methods compared by the pipeline.
enum class Method {
    identity,  // plain pruning, no operator
    diag,      // per-channel scaling
    rotate,    // Hadamard-rotated diagonal
    ghost,     // unconstrained least squares
};

std::string to_string(Solver s);
Solver parse_solver(const std::string& s);
std::string to_string(Method m);
Method parse_method(const std::string& s);

inline constexpr double kDefaultEps = 1e-6;

/// W* = I + M*, the least-squares map from X_pre to X_post.
struct GhostOperator {
    Matrix m_star;
    double eps_used = kDefaultEps;
    Solver solver = Solver::ridge_normal;
    /// ‖X_pre (I + M*) − X_post‖_F on the fit data.
    double fit_residual = 0.0;
    std::uint64_t token_count = 0;

    Matrix full() const;
};

/// Symmetric H · diag(d) · Hᵀ.
struct HadamardPatch {
    std::vector<double> d;
    Matrix fused;
    double fit_residual = 0.0;
};

/// Right-multiplication by diag(s).
struct ChannelScale {
    std::vector<double> s;
    /// Channels with zero X_pre energy; their scale is 1.
    std::vector<std::size_t> degenerate_channels;
    double fit_residual = 0.0;
};

struct IdentityOperator {};

using Operator = std::variant<IdentityOperator, GhostOperator, HadamardPatch, ChannelScale>;

/// Least-squares fit of M* on Δ = X_post − X_pre.
///
/// ridge_normal solves (X_preᵀX_pre + eps·I) M = X_preᵀΔ; svd_pinv computes
/// X_pre† Δ with singular values <= eps·σ₁ dropped, which is the
/// minimum-norm minimizer. Throws DegenerateInputError when X_pre is all zero.
GhostOperator fit_ghost(const sim::ActivationPair& pair, double eps = kDefaultEps,
                        Solver solver = Solver::ridge_normal);

/// Ridge solve from streamed statistics: gram = X_preᵀX_pre, cross = X_preᵀΔ.
/// fit_residual is left at 0 since the raw activations are not available.
GhostOperator fit_ghost_streaming(const linalg::GramAccumulator& acc, double eps = kDefaultEps);

/// s_j = <x_pre_j, x_post_j> / <x_pre_j, x_pre_j>.
ChannelScale fit_channel_scale(const sim::ActivationPair& pair);

/// Per-channel least squares in the Hadamard-rotated basis. Throws
/// UnsupportedDimensionError unless C is a power of two.
HadamardPatch fit_hadamard_patch(const sim::ActivationPair& pair);

/// Fits `method`; `solver` and `eps` only matter for ghost.
Operator fit_operator(const sim::ActivationPair& pair, Method method, Solver solver = Solver::ridge_normal,
                      double eps = kDefaultEps);

/// x · W. Ghost operators are evaluated as x + x · M*.
Matrix apply_operator(const Matrix& x, const Operator& op);

/// Dense C x C matrix W with apply_operator(x, op) == x · W.
Matrix dense_matrix(const Operator& op, std::size_t hidden_dim);

/// The additive part M = W − I (M* itself for ghost operators).
Matrix additive_part(const Operator& op, std::size_t hidden_dim);

sim::BoundaryMap as_boundary_map(const Operator& op);

/// ‖apply_operator(X_pre, op) − X_post‖_F.
double alignment_residual(const sim::ActivationPair& pair, const Operator& op);

struct SymmetryDecomposition {
    Matrix m_sym;
    Matrix m_asym;
    double norm_total = 0.0;
    double norm_sym = 0.0;
    double norm_asym = 0.0;

    double sym_ratio() const noexcept { return norm_total > 0.0 ? norm_sym / norm_total : 0.0; }
    double asym_ratio() const noexcept { return norm_total > 0.0 ? norm_asym / norm_total : 0.0; }
};

/// m = (m + mᵀ)/2 + (m − mᵀ)/2 with Frobenius norms of each part.
SymmetryDecomposition decompose_symmetry(const Matrix& m);

}  // namespace ghostalign::recovery
