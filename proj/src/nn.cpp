#include "neuronal/nn.hpp"

#include "neuronal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace neuronal::nn {

namespace {

Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }

Matrix relu_mask(const Matrix& z) {
    return (z.array() > 0.0).cast<double>().matrix();
}

void check_input(const NetConfig& config, Eigen::Index rows) {
    if (rows != config.input_dim) {
        throw ShapeError("input has dimension " + std::to_string(rows) + ", network expects " +
                         std::to_string(config.input_dim));
    }
}

struct BatchCache {
    std::vector<Matrix> activations;
    std::vector<Matrix> masks;
    Matrix output;
};

BatchCache forward_batch(const Params& params, const Eigen::Ref<const Matrix>& X) {
    const int depth = params.config.depth;
    BatchCache cache;
    cache.activations.reserve(depth);
    cache.masks.reserve(depth - 1);
    cache.activations.emplace_back(X);
    for (int l = 0; l + 1 < depth; ++l) {
        Matrix z = params.weights[l] * cache.activations.back();
        cache.masks.push_back(relu_mask(z));
        cache.activations.push_back(relu(z));
    }
    const double scale = std::sqrt(static_cast<double>(params.config.width));
    cache.output = scale * (params.weights.back() * cache.activations.back());
    return cache;
}

// Accumulates the gradient of sum_b <upstream_b, f(x_b)> into grad.
void backward_batch(const Params& params, const BatchCache& cache, const Matrix& upstream,
                    Gradient& grad) {
    const int depth = params.config.depth;
    const double scale = std::sqrt(static_cast<double>(params.config.width));
    Matrix delta = scale * upstream;
    for (int l = depth - 1; l >= 0; --l) {
        grad.weights[l].noalias() = delta * cache.activations[l].transpose();
        if (l > 0) {
            Matrix back = params.weights[l].transpose() * delta;
            delta = back.cwiseProduct(cache.masks[l - 1]);
        }
    }
}

}  // namespace

void NetConfig::validate() const {
    if (input_dim < 1 || width < 1 || depth < 2 || output_dim < 1) {
        throw ConfigError("invalid network config: need d >= 1, m >= 1, L >= 2, K >= 1 (got d=" +
                          std::to_string(input_dim) + ", m=" + std::to_string(width) +
                          ", L=" + std::to_string(depth) + ", K=" + std::to_string(output_dim) +
                          ")");
    }
}

int NetConfig::rows(int layer) const { return layer == depth - 1 ? output_dim : width; }

int NetConfig::cols(int layer) const { return layer == 0 ? input_dim : width; }

std::size_t Params::size() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
    return n;
}

bool Params::all_finite() const {
    return std::all_of(weights.begin(), weights.end(),
                       [](const Matrix& w) { return w.allFinite(); });
}

bool Params::operator==(const Params& other) const {
    if (!(config == other.config) || weights.size() != other.weights.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != other.weights[l].rows() ||
            weights[l].cols() != other.weights[l].cols() || weights[l] != other.weights[l]) {
            return false;
        }
    }
    return true;
}

Params init_params(const NetConfig& config, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    const double m = config.width;
    const double hidden_sd = std::sqrt(2.0 / m);
    const double last_sd = std::sqrt(1.0 / (config.output_dim * m));

    Params params{config, {}};
    params.weights.reserve(config.depth);
    for (int l = 0; l < config.depth; ++l) {
        std::normal_distribution<double> normal(0.0, l == config.depth - 1 ? last_sd : hidden_sd);
        Matrix w(config.rows(l), config.cols(l));
        // Fill row-major so the draw order does not depend on Eigen's storage order.
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = normal(rng);
        params.weights.push_back(std::move(w));
    }
    return params;
}

Params zeros_like(const Params& params) {
    Params z{params.config, {}};
    z.weights.reserve(params.weights.size());
    for (const auto& w : params.weights) z.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
    return z;
}

ForwardResult forward(const Params& params, const Eigen::Ref<const Vector>& x) {
    check_input(params.config, x.size());
    ForwardResult result;
    auto& cache = result.cache;
    cache.activations.reserve(params.config.depth);
    cache.masks.reserve(params.config.depth - 1);
    cache.activations.emplace_back(x);
    for (int l = 0; l + 1 < params.config.depth; ++l) {
        Vector z = params.weights[l] * cache.activations.back();
        cache.masks.push_back((z.array() > 0.0).cast<double>().matrix());
        cache.activations.push_back(z.cwiseMax(0.0));
    }
    const double scale = std::sqrt(static_cast<double>(params.config.width));
    result.output = scale * (params.weights.back() * cache.activations.back());
    return result;
}

Vector predict(const Params& params, const Eigen::Ref<const Vector>& x) {
    check_input(params.config, x.size());
    Vector a = x;
    for (int l = 0; l + 1 < params.config.depth; ++l) a = (params.weights[l] * a).cwiseMax(0.0);
    return std::sqrt(static_cast<double>(params.config.width)) * (params.weights.back() * a);
}

Matrix predict_batch(const Params& params, const Eigen::Ref<const Matrix>& X) {
    check_input(params.config, X.rows());
    Matrix a = X;
    for (int l = 0; l + 1 < params.config.depth; ++l) a = relu(params.weights[l] * a);
    return std::sqrt(static_cast<double>(params.config.width)) * (params.weights.back() * a);
}

std::vector<Vector> backprop_signals(const Params& params, const ForwardCache& cache,
                                     const Eigen::Ref<const Vector>& upstream) {
    const auto& config = params.config;
    const int depth = config.depth;
    if (static_cast<int>(cache.activations.size()) != depth ||
        static_cast<int>(cache.masks.size()) != depth - 1) {
        throw ShapeError("forward cache does not match network depth");
    }
    for (int l = 0; l < depth; ++l) {
        if (cache.activations[l].size() != config.cols(l)) {
            throw ShapeError("forward cache activation " + std::to_string(l) +
                             " does not match the parameters");
        }
    }
    if (upstream.size() != config.output_dim) {
        throw ShapeError("upstream has length " + std::to_string(upstream.size()) +
                         ", network output is " + std::to_string(config.output_dim));
    }

    std::vector<Vector> deltas(depth);
    deltas[depth - 1] = std::sqrt(static_cast<double>(config.width)) * upstream;
    for (int l = depth - 1; l > 0; --l) {
        deltas[l - 1] = (params.weights[l].transpose() * deltas[l]).cwiseProduct(cache.masks[l - 1]);
    }
    return deltas;
}

Gradient backward(const Params& params, const ForwardCache& cache,
                  const Eigen::Ref<const Vector>& upstream) {
    const auto deltas = backprop_signals(params, cache, upstream);
    Gradient grad{params.config, {}};
    grad.weights.reserve(deltas.size());
    for (std::size_t l = 0; l < deltas.size(); ++l) {
        grad.weights.push_back(deltas[l] * cache.activations[l].transpose());
    }
    return grad;
}

void TrainSpec::validate() const {
    if (!(learning_rate > 0.0) || epochs < 1 || batch_size < 1) {
        throw ConfigError("invalid train spec: need learning_rate > 0, epochs >= 1, batch_size >= 1");
    }
}

double squared_loss(const Params& params, std::span<const Example> buffer) {
    if (buffer.empty()) return 0.0;
    double total = 0.0;
    for (const auto& ex : buffer) total += 0.5 * (predict(params, ex.x) - ex.target).squaredNorm();
    return total / static_cast<double>(buffer.size());
}

TrainResult sgd_train(Params params, std::span<const Example> buffer, const TrainSpec& spec,
                      std::uint64_t seed) {
    spec.validate();
    if (buffer.empty()) throw DataError("sgd_train called with an empty buffer");
    const auto& config = params.config;
    for (const auto& ex : buffer) {
        check_input(config, ex.x.size());
        if (ex.target.size() != config.output_dim) {
            throw ShapeError("target has length " + std::to_string(ex.target.size()) +
                             ", network output is " + std::to_string(config.output_dim));
        }
    }

    const auto n = buffer.size();
    const std::size_t batch =
        spec.mode == TrainMode::ExactPool ? 1 : std::min<std::size_t>(spec.batch_size, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);

    Gradient grad = zeros_like(params);
    Matrix X(config.input_dim, batch);
    Matrix Y(config.output_dim, batch);
    double epoch_loss = 0.0;
    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        if (spec.mode == TrainMode::MiniBatch) std::shuffle(order.begin(), order.end(), rng);
        epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const auto count = std::min(batch, n - start);
            if (static_cast<std::size_t>(X.cols()) != count) {
                X.resize(config.input_dim, static_cast<Eigen::Index>(count));
                Y.resize(config.output_dim, static_cast<Eigen::Index>(count));
            }
            for (std::size_t b = 0; b < count; ++b) {
                const auto& ex = buffer[order[start + b]];
                X.col(static_cast<Eigen::Index>(b)) = ex.x;
                Y.col(static_cast<Eigen::Index>(b)) = ex.target;
            }
            const BatchCache cache = forward_batch(params, X);
            const Matrix residual = cache.output - Y;
            epoch_loss += 0.5 * residual.squaredNorm();
            backward_batch(params, cache, residual / static_cast<double>(count), grad);
            for (std::size_t l = 0; l < params.weights.size(); ++l) {
                params.weights[l] -= spec.learning_rate * grad.weights[l];
            }
        }
        if (!std::isfinite(epoch_loss) || !params.all_finite()) {
            throw DivergenceError("training diverged in epoch " + std::to_string(epoch + 1),
                                  epoch + 1);
        }
    }
    const double loss = squared_loss(params, buffer);
    return {std::move(params), loss};
}

}  // namespace neuronal::nn
