#pragma once

// Dense ReLU MLP with sqrt(m) output scaling:
//   f(x) = sqrt(m) * W_L relu(W_{L-1} ... relu(W_1 x))
// Hidden weights start at N(0, 2/m), the output layer at N(0, 1/(K m)).

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace neuronal::nn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct NetConfig {
    int input_dim = 1;   // d
    int width = 100;     // m
    int depth = 2;       // L, number of weight matrices
    int output_dim = 1;  // K

    void validate() const;
    int rows(int layer) const;
    int cols(int layer) const;
    bool operator==(const NetConfig&) const = default;
};

/// Layered weights W_1..W_L (index 0..L-1). Also used for gradients, which share the shape.
struct Params {
    NetConfig config;
    std::vector<Matrix> weights;

    std::size_t size() const;
    bool all_finite() const;
    bool operator==(const Params& other) const;
};

using Gradient = Params;

Params init_params(const NetConfig& config, std::uint64_t seed);
Params zeros_like(const Params& params);

struct ForwardCache {
    // activations[0] = x, activations[l] = relu(W_l a_{l-1}) for l = 1..L-1.
    std::vector<Vector> activations;
    // masks[l-1][i] = 1 where the pre-activation of hidden layer l was > 0.
    std::vector<Vector> masks;
};

struct ForwardResult {
    Vector output;
    ForwardCache cache;
};

ForwardResult forward(const Params& params, const Eigen::Ref<const Vector>& x);

/// Output only, no cache.
Vector predict(const Params& params, const Eigen::Ref<const Vector>& x);

/// Column-batched evaluation; X is d x B, result K x B.
Matrix predict_batch(const Params& params, const Eigen::Ref<const Matrix>& X);

/// Per-layer backprop signals for <upstream, f>: grad W_l = deltas[l] * activations[l]^T.
/// Lets callers form gradient inner products without materialising m x m matrices.
std::vector<Vector> backprop_signals(const Params& params, const ForwardCache& cache,
                                     const Eigen::Ref<const Vector>& upstream);

/// Gradient of <upstream, f(x; params)> with respect to every weight matrix.
Gradient backward(const Params& params, const ForwardCache& cache,
                  const Eigen::Ref<const Vector>& upstream);

enum class TrainMode { ExactPool, MiniBatch };

struct TrainSpec {
    double learning_rate = 1e-3;
    int epochs = 40;
    int batch_size = 64;
    TrainMode mode = TrainMode::MiniBatch;

    void validate() const;
    bool operator==(const TrainSpec&) const = default;
};

struct Example {
    Vector x;
    Vector target;
};

struct TrainResult {
    Params params;
    double loss = 0.0;  // mean per-example squared loss on the buffer after training
};

/// Mean over the buffer of sum_k (f(x)[k] - target[k])^2 / 2.
double squared_loss(const Params& params, std::span<const Example> buffer);

/// Mini-batch SGD on the squared loss. Batches follow a seeded shuffle each epoch;
/// ExactPool mode walks the buffer in order one example at a time.
TrainResult sgd_train(Params params, std::span<const Example> buffer, const TrainSpec& spec,
                      std::uint64_t seed);

}  // namespace neuronal::nn
