#include "doctest.h"
#include "test_util.hpp"

#include "neuronal/errors.hpp"
#include "neuronal/nn.hpp"

#include <cmath>

using namespace neuronal;
using namespace neuronal::nn;

namespace {

double inner_output(const Params& p, const Vector& x, const Vector& upstream) {
    return upstream.dot(predict(p, x));
}

// Central differences of <upstream, f(x)> with respect to every weight.
Gradient finite_difference(Params p, const Vector& x, const Vector& upstream, double step) {
    Gradient g = zeros_like(p);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        for (Eigen::Index i = 0; i < p.weights[l].size(); ++i) {
            double& w = p.weights[l].data()[i];
            const double saved = w;
            w = saved + step;
            const double plus = inner_output(p, x, upstream);
            w = saved - step;
            const double minus = inner_output(p, x, upstream);
            w = saved;
            g.weights[l].data()[i] = (plus - minus) / (2.0 * step);
        }
    }
    return g;
}

double relative_error(const Gradient& a, const Gradient& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        diff += (a.weights[l] - b.weights[l]).squaredNorm();
        na += a.weights[l].squaredNorm();
        nb += b.weights[l].squaredNorm();
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
}

Params hand_net() {
    Params p = init_params({2, 2, 2, 1}, 0);
    p.weights[0] = Matrix::Identity(2, 2);
    p.weights[1] = Matrix::Ones(1, 2);
    return p;
}

}  // namespace

TEST_CASE("init_params draws hidden weights from N(0, 2/m)") {
    const NetConfig config{2, 100, 2, 10};
    std::vector<double> entries;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto p = init_params(config, seed);
        CHECK(p.weights[0].rows() == 100);
        CHECK(p.weights[0].cols() == 2);
        CHECK(p.weights[1].rows() == 10);
        for (Eigen::Index i = 0; i < p.weights[0].size(); ++i) entries.push_back(p.weights[0].data()[i]);
    }
    const double n = static_cast<double>(entries.size());
    double mean = 0.0;
    for (double e : entries) mean += e;
    mean /= n;
    double var = 0.0;
    for (double e : entries) var += (e - mean) * (e - mean);
    var /= n - 1.0;
    const double target = 2.0 / 100.0;
    const double se = target * std::sqrt(2.0 / (n - 1.0));
    CHECK(std::abs(var - target) < 3.0 * se);
}

TEST_CASE("init_params draws the output layer from N(0, 1/(K m))") {
    const NetConfig config{2, 2, 2, 1};
    std::vector<double> entries;
    for (std::uint64_t seed = 0; seed < 5000; ++seed) {
        const auto p = init_params(config, seed);
        entries.push_back(p.weights[1](0, 0));
        entries.push_back(p.weights[1](0, 1));
    }
    double var = 0.0;
    for (double e : entries) var += e * e;
    var /= static_cast<double>(entries.size());
    const double target = 0.5;
    CHECK(std::abs(var - target) < 3.0 * target * std::sqrt(2.0 / entries.size()));
}

TEST_CASE("init_params is deterministic per seed") {
    const NetConfig config{5, 7, 3, 2};
    CHECK(init_params(config, 11) == init_params(config, 11));
    CHECK_FALSE(init_params(config, 11) == init_params(config, 12));
}

TEST_CASE("invalid configs are rejected") {
    CHECK_THROWS_AS(init_params({0, 4, 2, 1}, 0), ConfigError);
    CHECK_THROWS_AS(init_params({2, 4, 1, 1}, 0), ConfigError);
    CHECK_THROWS_AS(init_params({2, 0, 2, 1}, 0), ConfigError);
    CHECK_THROWS_AS(init_params({2, 4, 2, 0}, 0), ConfigError);
}

TEST_CASE("forward on the hand example") {
    const Params p = hand_net();
    const Vector x = (Vector(2) << 0.6, 0.8).finished();
    const auto fwd = forward(p, x);
    CHECK(fwd.cache.activations[1][0] == doctest::Approx(0.6));
    CHECK(fwd.cache.activations[1][1] == doctest::Approx(0.8));
    CHECK(fwd.output[0] == doctest::Approx(std::sqrt(2.0) * 1.4).epsilon(1e-12));
    CHECK(fwd.output[0] == doctest::Approx(1.9799).epsilon(1e-4));

    const auto neg = forward(p, -x);
    CHECK(neg.cache.activations[1].isZero());
    CHECK(neg.output[0] == 0.0);
}

TEST_CASE("forward with zero weights is zero and checks the input shape") {
    Params p = zeros_like(init_params({3, 4, 3, 2}, 1));
    std::mt19937_64 rng(3);
    CHECK(forward(p, test_util::random_vector(3, rng)).output.isZero());
    CHECK_THROWS_AS(forward(p, Vector::Ones(4)), ShapeError);
}

TEST_CASE("forward is positively homogeneous in x") {
    std::mt19937_64 rng(5);
    const Params p = init_params({4, 9, 3, 3}, 2);
    const Vector x = test_util::random_vector(4, rng);
    for (double c : {0.1, 2.0, 7.5}) {
        CHECK((predict(p, c * x) - c * predict(p, x)).norm() < 1e-12 * (1.0 + c));
    }
}

TEST_CASE("backward matches central finite differences") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 4 + trial % 13;
        const NetConfig config{3, m, 2 + trial % 2, trial % 2 == 0 ? 1 : 3};
        const Params p = init_params(config, 100 + trial);
        const Vector x = test_util::random_vector(3, rng);
        const Vector upstream = test_util::random_vector(config.output_dim, rng);
        const auto fwd = forward(p, x);
        const Gradient g = backward(p, fwd.cache, upstream);
        CHECK(relative_error(g, finite_difference(p, x, upstream, 1e-5)) < 1e-5);
    }
}

TEST_CASE("backward: zero upstream, shape closure, last-layer rows") {
    const Params p = hand_net();
    const Vector x = (Vector(2) << 0.6, 0.8).finished();
    const auto fwd = forward(p, x);
    const Gradient zero = backward(p, fwd.cache, Vector::Zero(1));
    for (const auto& w : zero.weights) CHECK(w.isZero());

    const Gradient g = backward(p, fwd.cache, Vector::Constant(1, 2.5));
    REQUIRE(g.weights.size() == p.weights.size());
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        CHECK(g.weights[l].rows() == p.weights[l].rows());
        CHECK(g.weights[l].cols() == p.weights[l].cols());
    }
    // Row k of grad W_L is upstream[k] * sqrt(m) * g_{L-1}.
    CHECK(g.weights[1](0, 0) == doctest::Approx(2.5 * std::sqrt(2.0) * 0.6));
    CHECK(g.weights[1](0, 1) == doctest::Approx(2.5 * std::sqrt(2.0) * 0.8));
}

TEST_CASE("backward rejects a stale cache") {
    const Params small = init_params({2, 3, 2, 1}, 0);
    const Params wide = init_params({2, 5, 2, 1}, 0);
    const auto fwd = forward(small, Vector::Ones(2));
    CHECK_THROWS_AS(backward(wide, fwd.cache, Vector::Ones(1)), ShapeError);
    const Params deep = init_params({2, 3, 3, 1}, 0);
    CHECK_THROWS_AS(backward(deep, fwd.cache, Vector::Ones(1)), ShapeError);
}

TEST_CASE("sgd_train leaves a stationary point unchanged") {
    const Params p = init_params({3, 6, 2, 2}, 4);
    std::mt19937_64 rng(9);
    std::vector<Example> buffer;
    for (int i = 0; i < 5; ++i) {
        const Vector x = test_util::random_vector(3, rng);
        buffer.push_back({x, predict(p, x)});
    }
    const auto result = sgd_train(p, buffer, {1e-3, 3, 2, TrainMode::MiniBatch}, 1);
    CHECK(result.params == p);
    CHECK(result.loss == 0.0);
}

TEST_CASE("one small SGD step strictly decreases the loss") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 5; ++trial) {
        const Params p = init_params({4, 10, 2, 1}, 30 + trial);
        const std::vector<Example> buffer{{test_util::random_vector(4, rng), Vector::Constant(1, 0.7)}};
        const double before = squared_loss(p, buffer);
        const auto result = sgd_train(p, buffer, {1e-3, 1, 1, TrainMode::MiniBatch}, 0);
        CHECK(result.loss < before);
    }
}

TEST_CASE("sgd_train is deterministic and reduces loss over epochs") {
    std::mt19937_64 rng(8);
    const Params p = init_params({3, 16, 2, 2}, 6);
    std::vector<Example> buffer;
    for (int i = 0; i < 40; ++i) {
        Vector x = test_util::random_unit(3, rng);
        buffer.push_back({x, (Vector(2) << (x[0] > 0 ? 0.0 : 1.0), (x[0] > 0 ? 1.0 : 0.0)).finished()});
    }
    const TrainSpec spec{1e-3, 40, 8, TrainMode::MiniBatch};
    const auto a = sgd_train(p, buffer, spec, 3);
    const auto b = sgd_train(p, buffer, spec, 3);
    CHECK(a.params == b.params);
    CHECK(a.loss < squared_loss(p, buffer));
}

TEST_CASE("sgd_train reports divergence with the epoch") {
    const Params p = init_params({2, 8, 2, 1}, 0);
    const std::vector<Example> buffer{{Vector::Ones(2) * 10.0, Vector::Constant(1, 1e6)}};
    try {
        sgd_train(p, buffer, {1e200, 5, 1, TrainMode::MiniBatch}, 0);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.epoch >= 1);
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("sgd_train validates its inputs") {
    const Params p = init_params({2, 4, 2, 1}, 0);
    const std::vector<Example> good{{Vector::Ones(2), Vector::Zero(1)}};
    CHECK_THROWS_AS(sgd_train(p, {}, {}, 0), DataError);
    CHECK_THROWS_AS(sgd_train(p, good, {0.0, 1, 1, TrainMode::MiniBatch}, 0), ConfigError);
    const std::vector<Example> bad_target{{Vector::Ones(2), Vector::Zero(2)}};
    CHECK_THROWS_AS(sgd_train(p, bad_target, {}, 0), ShapeError);
}
