#include "neuronal/ntk.hpp"

#include "neuronal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace neuronal::ntk {

Matrix ntk_matrix(const Matrix& X, int depth) {
    if (depth < 1) throw ConfigError("ntk_matrix: depth must be >= 1");
    for (Eigen::Index i = 0; i < X.cols(); ++i) {
        const double norm = X.col(i).norm();
        if (std::abs(norm - 1.0) > 1e-9) {
            throw DataError("ntk_matrix: input " + std::to_string(i) + " has norm " +
                            std::to_string(norm) + ", expected unit norm");
        }
    }
    const Eigen::Index T = X.cols();
    Matrix sigma = X.transpose() * X;
    Matrix kernel = sigma;
    constexpr double pi = std::numbers::pi;

    for (int l = 1; l <= depth; ++l) {
        Matrix next_sigma(T, T);
        Matrix next_kernel(T, T);
        for (Eigen::Index i = 0; i < T; ++i) {
            for (Eigen::Index j = i; j < T; ++j) {
                const double scale = std::sqrt(sigma(i, i) * sigma(j, j));
                double s = 0.0;
                double dot = 0.0;  // 2 E[relu'(a) relu'(b)]
                if (scale > 0.0) {
                    const double c = std::clamp(sigma(i, j) / scale, -1.0, 1.0);
                    const double theta = std::acos(c);
                    s = scale * (std::sin(theta) + (pi - theta) * c) / pi;
                    dot = (pi - theta) / pi;
                }
                next_sigma(i, j) = next_sigma(j, i) = s;
                next_kernel(i, j) = next_kernel(j, i) = kernel(i, j) * dot + s;
            }
        }
        sigma = std::move(next_sigma);
        kernel = std::move(next_kernel);
    }
    return 0.5 * (kernel + sigma);
}

Matrix expand_multiclass(const Matrix& h_inst, int num_classes) {
    if (num_classes < 1) throw ConfigError("expand_multiclass: K must be >= 1");
    if (h_inst.rows() != h_inst.cols()) throw ShapeError("expand_multiclass: matrix is not square");
    const Eigen::Index T = h_inst.rows();
    const Eigen::Index K = num_classes;
    Matrix out = Matrix::Zero(T * K, T * K);
    for (Eigen::Index i = 0; i < T; ++i)
        for (Eigen::Index j = 0; j < T; ++j)
            for (Eigen::Index k = 0; k < K; ++k) out(i * K + k, j * K + k) = h_inst(i, j);
    return out;
}

ComplexityReport complexity_terms(const Matrix& H, const Eigen::Ref<const Vector>& h) {
    if (H.rows() != H.cols()) throw ShapeError("complexity_terms: H is not square");
    if (h.size() != H.rows()) {
        throw ShapeError("complexity_terms: h has length " + std::to_string(h.size()) +
                         ", H is " + std::to_string(H.rows()) + " x " + std::to_string(H.cols()));
    }
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw ConditioningError("complexity_terms: H is not symmetric");
    }

    ComplexityReport report;
    report.H = H;
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(H, Eigen::EigenvaluesOnly);
    report.lambda0 = eig.eigenvalues().minCoeff();
    if (report.lambda0 < -1e-8 * scale) {
        throw ConditioningError("complexity_terms: H is not positive semidefinite (min eigenvalue " +
                                std::to_string(report.lambda0) + ")");
    }

    const Eigen::Index n = H.rows();
    const Eigen::LLT<Matrix> shifted(Matrix::Identity(n, n) + H);
    if (shifted.info() != Eigen::Success) {
        throw ConditioningError("complexity_terms: I + H is not positive definite");
    }
    report.L_H = 2.0 * shifted.matrixLLT().diagonal().array().log().sum();

    // S via Cholesky with a jitter ladder; no pseudo-inverse fallback.
    bool solved = false;
    for (const double jitter : {0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
        const Eigen::LLT<Matrix> chol(H + jitter * Matrix::Identity(n, n));
        if (chol.info() != Eigen::Success) continue;
        const Vector y = chol.matrixL().solve(h);
        const double s2 = y.squaredNorm();
        if (!std::isfinite(s2)) continue;
        report.S = std::sqrt(s2);
        report.jitter = jitter;
        solved = true;
        break;
    }
    if (!solved) {
        throw ConditioningError("complexity_terms: H is singular beyond the 1e-6 jitter ladder");
    }

    const double tk = static_cast<double>(n);
    report.lower_bound = tk * std::log1p(std::max(report.lambda0, 0.0));
    report.effective_dim = report.L_H / std::log1p(tk);
    report.bound_holds = report.L_H >= report.lower_bound - 1e-9;
    return report;
}

GramEstimate mc_gram_oracle(const Matrix& X, int depth, int width, int num_classes, int n_nets,
                            std::uint64_t seed) {
    if (width < 2) throw ConfigError("mc_gram_oracle: width must be >= 2");
    if (n_nets < 1 || depth < 1) throw ConfigError("mc_gram_oracle: need n_nets >= 1, depth >= 1");
    const nn::NetConfig config{static_cast<int>(X.rows()), width, depth + 1, num_classes};
    const Eigen::Index T = X.cols();
    const Eigen::Index K = num_classes;
    const Eigen::Index TK = T * K;

    Matrix sum = Matrix::Zero(TK, TK);
    Matrix sum_sq = Matrix::Zero(TK, TK);
    for (int net = 0; net < n_nets; ++net) {
        const nn::Params params = nn::init_params(config, seed + static_cast<std::uint64_t>(net));
        // Per (point, class): backprop signals and the layer inputs they pair with.
        std::vector<std::vector<Vector>> deltas(static_cast<std::size_t>(TK));
        std::vector<std::vector<Vector>> inputs(static_cast<std::size_t>(T));
        for (Eigen::Index i = 0; i < T; ++i) {
            const auto fwd = nn::forward(params, X.col(i));
            inputs[static_cast<std::size_t>(i)] = fwd.cache.activations;
            for (Eigen::Index k = 0; k < K; ++k) {
                deltas[static_cast<std::size_t>(i * K + k)] =
                    nn::backprop_signals(params, fwd.cache, Vector::Unit(K, k));
            }
        }
        Matrix gram(TK, TK);
        for (Eigen::Index a = 0; a < TK; ++a) {
            for (Eigen::Index b = a; b < TK; ++b) {
                const auto& da = deltas[static_cast<std::size_t>(a)];
                const auto& db = deltas[static_cast<std::size_t>(b)];
                const auto& ia = inputs[static_cast<std::size_t>(a / K)];
                const auto& ib = inputs[static_cast<std::size_t>(b / K)];
                // <delta_a a_a^T, delta_b a_b^T>_F = (delta_a . delta_b)(a_a . a_b)
                double value = 0.0;
                for (std::size_t l = 0; l < da.size(); ++l) value += da[l].dot(db[l]) * ia[l].dot(ib[l]);
                gram(a, b) = gram(b, a) = value / width;
            }
        }
        sum += gram;
        sum_sq += gram.cwiseProduct(gram);
    }

    GramEstimate est;
    est.mean = sum / n_nets;
    if (n_nets > 1) {
        const Matrix var = ((sum_sq - n_nets * est.mean.cwiseProduct(est.mean)) / (n_nets - 1))
                               .cwiseMax(0.0);
        est.std_error = (var / n_nets).cwiseSqrt();
    } else {
        est.std_error = Matrix::Zero(TK, TK);
    }
    return est;
}

}  // namespace neuronal::ntk
