#pragma once

#include "neuronal/nn.hpp"

#include <random>

namespace test_util {

inline neuronal::nn::Vector random_vector(int n, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> normal(0.0, sd);
    neuronal::nn::Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
}

inline neuronal::nn::Vector random_unit(int n, std::mt19937_64& rng) {
    auto v = random_vector(n, rng);
    return v / v.norm();
}

}  // namespace test_util
