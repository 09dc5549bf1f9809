#include "neuronal/pair.hpp"

#include "neuronal/errors.hpp"

#include <cmath>
#include <string>

namespace neuronal {

LossVector::LossVector(Vector values) : values_(std::move(values)) {
    for (Eigen::Index k = 0; k < values_.size(); ++k) {
        const double v = values_[k];
        if (!(v >= 0.0 && v <= 1.0)) {
            throw DataError("loss vector entry " + std::to_string(k) + " = " + std::to_string(v) +
                            " is outside [0,1]");
        }
    }
}

nn::NetConfig PairConfig::f1_config() const { return {input_dim, width, depth, num_classes}; }

nn::NetConfig PairConfig::f2_config() const {
    return {embedding_dim(), width, depth, num_classes};
}

void PairConfig::validate() const {
    f1_config().validate();
    train1.validate();
    train2.validate();
}

PredictorPair PredictorPair::create(const PairConfig& config, std::uint64_t seed) {
    config.validate();
    // Distinct streams for the two networks.
    return {config, nn::init_params(config.f1_config(), seed),
            nn::init_params(config.f2_config(), seed ^ 0x9e3779b97f4a7c15ULL)};
}

namespace {

// Raw (unnormalized) embedding blocks from an f1 activation pair.
void fill_embedding(const PairConfig& config, const Eigen::Ref<const Vector>& first,
                    const Eigen::Ref<const Vector>& last_hidden, Eigen::Ref<Vector> out) {
    const int m = config.width;
    const double scale = std::sqrt(static_cast<double>(m));
    out.head(m) = first;
    // Row k of d f1[k] / d W_L[k,:] is sqrt(m) * g_{L-1}.
    for (int k = 0; k < config.num_classes; ++k) out.segment(m + k * m, m) = scale * last_hidden;
}

}  // namespace

Embedding embed(const PredictorPair& pair, const Eigen::Ref<const Vector>& x) {
    const auto fwd = nn::forward(pair.f1, x);
    const auto& acts = fwd.cache.activations;
    Embedding e{Vector(pair.config.embedding_dim()), false};
    fill_embedding(pair.config, acts[1], acts.back(), e.phi);
    const double norm = e.phi.norm();
    if (norm > 0.0) {
        e.phi /= norm;
        e.normalized = true;
    }
    return e;
}

Matrix embed_batch(const PredictorPair& pair, const Eigen::Ref<const Matrix>& X) {
    const auto& f1 = pair.f1;
    if (X.rows() != f1.config.input_dim) {
        throw ShapeError("input has dimension " + std::to_string(X.rows()) + ", network expects " +
                         std::to_string(f1.config.input_dim));
    }
    Matrix first = (f1.weights[0] * X).cwiseMax(0.0);
    Matrix last = first;
    for (int l = 1; l + 1 < f1.config.depth; ++l) last = (f1.weights[l] * last).cwiseMax(0.0);

    Matrix phi(pair.config.embedding_dim(), X.cols());
    for (Eigen::Index b = 0; b < X.cols(); ++b) {
        auto col = phi.col(b);
        Vector tmp(phi.rows());
        fill_embedding(pair.config, first.col(b), last.col(b), tmp);
        const double norm = tmp.norm();
        if (norm > 0.0) tmp /= norm;
        col = tmp;
    }
    return phi;
}

Vector score(const PredictorPair& pair, const Eigen::Ref<const Vector>& x) {
    const Embedding e = embed(pair, x);
    return nn::predict(pair.f1, x) + nn::predict(pair.f2, e.phi);
}

Matrix score_batch(const PredictorPair& pair, const Eigen::Ref<const Matrix>& X) {
    return nn::predict_batch(pair.f1, X) + nn::predict_batch(pair.f2, embed_batch(pair, X));
}

PairSample make_sample(const PredictorPair& pair, const Eigen::Ref<const Vector>& x,
                       const LossVector& u) {
    if (u.size() != pair.config.num_classes) {
        throw ShapeError("loss vector has length " + std::to_string(u.size()) + ", expected " +
                         std::to_string(pair.config.num_classes));
    }
    PairSample s;
    s.x = x;
    s.u = u.values();
    s.phi = embed(pair, x).phi;
    s.residual = s.u - nn::predict(pair.f1, x);
    return s;
}

PredictorPair train_on(const PredictorPair& pair, std::span<const PairSample> samples,
                       std::uint64_t seed) {
    std::vector<nn::Example> first;
    std::vector<nn::Example> second;
    first.reserve(samples.size());
    second.reserve(samples.size());
    for (const auto& s : samples) {
        first.push_back({s.x, s.u});
        second.push_back({s.phi, s.residual});
    }
    PredictorPair next = pair;
    next.f1 = nn::sgd_train(pair.f1, first, pair.config.train1, seed).params;
    next.f2 = nn::sgd_train(pair.f2, second, pair.config.train2, seed + 1).params;
    return next;
}

PredictorPair update(const PredictorPair& pair, const Eigen::Ref<const Vector>& x,
                     const LossVector& u, std::uint64_t seed) {
    const PairSample s = make_sample(pair, x, u);
    return train_on(pair, std::span<const PairSample>(&s, 1), seed);
}

}  // namespace neuronal
