#pragma once

// Infinite-width NTK of the ReLU network and the complexity terms built on it.
//
// Recursion over L ReLU layers (Sigma^0 = H^0 = X X^T):
//   Sigma^l_ij = 2 E[relu(a) relu(b)],  H^l_ij = 2 H^{l-1}_ij E[relu'(a) relu'(b)] + Sigma^l_ij
// with (a, b) ~ N(0, [[S_ii, S_ij], [S_ij, S_jj]]) taken from Sigma^{l-1}, and
//   H = (H^L + Sigma^L) / 2.
// L here counts ReLU layers: it is the NTK of a network with L + 1 weight matrices.

#include "neuronal/nn.hpp"

#include <cstdint>

namespace neuronal::ntk {

using nn::Matrix;
using nn::Vector;

/// X holds one unit-norm input per column; returns the T x T kernel.
Matrix ntk_matrix(const Matrix& X, int depth);

/// Block-diagonal TK x TK kernel, row index i*K + k.
Matrix expand_multiclass(const Matrix& h_inst, int num_classes);

struct ComplexityReport {
    Matrix H;
    double lambda0 = 0.0;
    double S = 0.0;
    double L_H = 0.0;
    double lower_bound = 0.0;  // TK log(1 + lambda0)
    double effective_dim = 0.0;  // L_H / log(1 + TK)
    double jitter = 0.0;       // diagonal jitter the S solve needed
    bool bound_holds = false;
};

/// S = sqrt(h^T H^{-1} h), L_H = log det(I + H), and the lower-bound check.
ComplexityReport complexity_terms(const Matrix& H, const Eigen::Ref<const Vector>& h);

struct GramEstimate {
    Matrix mean;
    Matrix std_error;  // per-entry standard error over the sampled networks
};

/// Average of <grad f(x_i)[k], grad f(x_j)[k']> / m over n_nets freshly initialised
/// networks with `depth` ReLU layers (depth + 1 weight matrices), width m, K outputs.
GramEstimate mc_gram_oracle(const Matrix& X, int depth, int width, int num_classes, int n_nets,
                            std::uint64_t seed);

}  // namespace neuronal::ntk
