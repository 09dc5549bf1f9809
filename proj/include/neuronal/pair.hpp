#pragma once

// Exploitation/exploration network pair.
//
// f1 maps x to an estimate of the per-class loss vector; f2 reads the end-to-end
// embedding phi(x) = [relu(W1 x), vec of the last-layer Jacobian of f1] and learns
// f1's residual error. The combined score is f1(x) + f2(phi(x)); lower is better.

#include "neuronal/nn.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace neuronal {

using nn::Matrix;
using nn::Vector;

/// Per-class loss vector with entries in [0,1].
class LossVector {
public:
    explicit LossVector(Vector values);
    const Vector& values() const noexcept { return values_; }
    Eigen::Index size() const noexcept { return values_.size(); }

private:
    Vector values_;
};

struct Embedding {
    Vector phi;
    bool normalized = false;
};

struct PairConfig {
    int input_dim = 1;
    int width = 100;
    int depth = 2;
    int num_classes = 2;
    nn::TrainSpec train1;  // eta_1 regime for f1
    nn::TrainSpec train2;  // eta_2 regime for f2

    nn::NetConfig f1_config() const;
    nn::NetConfig f2_config() const;
    int embedding_dim() const { return width * (1 + num_classes); }
    void validate() const;
    bool operator==(const PairConfig&) const = default;
};

/// One observed round as stored for (re)training: the f2 input and target are
/// frozen with the f1 parameters at observation time.
struct PairSample {
    Vector x;
    Vector u;
    Vector phi;
    Vector residual;
};

struct PredictorPair {
    PairConfig config;
    nn::Params f1;
    nn::Params f2;

    static PredictorPair create(const PairConfig& config, std::uint64_t seed);
    bool operator==(const PredictorPair&) const = default;
};

Embedding embed(const PredictorPair& pair, const Eigen::Ref<const Vector>& x);

/// Embedding for a column batch (d x B), returned as (m + K m) x B; columns normalized.
Matrix embed_batch(const PredictorPair& pair, const Eigen::Ref<const Matrix>& X);

/// f1(x) + f2(phi(x)).
Vector score(const PredictorPair& pair, const Eigen::Ref<const Vector>& x);

/// Scores for a column batch, K x B.
Matrix score_batch(const PredictorPair& pair, const Eigen::Ref<const Matrix>& X);

/// Snapshot x, u, phi(x) and u - f1(x) under the current f1.
PairSample make_sample(const PredictorPair& pair, const Eigen::Ref<const Vector>& x,
                       const LossVector& u);

/// Train f1 on (x, u) and f2 on (phi, residual) for the given samples.
PredictorPair train_on(const PredictorPair& pair, std::span<const PairSample> samples,
                       std::uint64_t seed);

/// Single-example coupled update: f2's target uses the pre-update f1.
PredictorPair update(const PredictorPair& pair, const Eigen::Ref<const Vector>& x,
                     const LossVector& u, std::uint64_t seed = 0);

}  // namespace neuronal
