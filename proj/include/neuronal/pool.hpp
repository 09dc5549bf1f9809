#pragma once

// Pool-based active learning with inverse-gap weighting over B candidates per round,
// plus the uniform-draw conversion of the stream learner (Neu-UniS).

#include "neuronal/data.hpp"
#include "neuronal/pair.hpp"
#include "neuronal/stream.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace neuronal::pool {

struct IgwDistribution {
    Vector gaps;
    Vector probs;
    std::size_t i_hat = 0;
};

/// p_i = w_min / (mu w_min + gamma (w_i - w_min)) for i != i_hat, p_{i_hat} = 1 - sum.
/// Candidates tied with the minimum get 1/mu (the formula's value for w_min > 0).
/// Throws ParameterError when the off-minimum mass exceeds 1.
IgwDistribution igw_distribution(const Eigen::Ref<const Vector>& gaps, double mu, double gamma);

/// Smallest mu for which igw_distribution(gaps, mu, gamma) is admissible.
double min_admissible_mu(const Eigen::Ref<const Vector>& gaps, double gamma);

std::size_t sample_index(const Eigen::Ref<const Vector>& probs, std::mt19937_64& rng);

enum class SelectionRule { Igw, Uniform };

struct PoolConfig {
    std::size_t rounds = 10;        // Q
    std::size_t candidates = 200;   // B
    double mu = 1000.0;
    double gamma = 1000.0;
    std::size_t batch_per_round = 1;
    bool rescore = true;            // re-score remaining candidates after every update
    SelectionRule rule = SelectionRule::Igw;

    void validate() const;
};

struct PoolRoundLog {
    std::size_t round = 0;
    std::size_t pool_index = 0;  // index into the pool dataset
    Vector scores;
    int k_hat = 0;
    int k_circ = 0;
    double gap = 0.0;
    double probability = 0.0;    // selection probability of the chosen candidate
    int true_label = -1;
    int regret_inc = 0;
};

/// Absolute prediction gaps |f[k_hat] - f[k_circ]| for each column.
Vector prediction_gaps(const Matrix& scores);

struct PoolRound {
    std::vector<std::size_t> selected;  // positions within the candidate set
    std::vector<PoolRoundLog> logs;
    PredictorPair pair;
};

/// One round: select batch_per_round candidates (without replacement), query each
/// label and update the pair. `memory` holds the labeled samples used for replay.
PoolRound pool_round(PredictorPair pair, const Matrix& candidates, std::span<const int> labels,
                     const PoolConfig& config, std::mt19937_64& rng,
                     std::vector<PairSample>& memory);

struct PoolMetrics {
    std::size_t rounds_completed = 0;
    std::size_t queries = 0;
    std::vector<int> cumulative_regret;  // misclassified queried points
    std::vector<stream::Checkpoint> checkpoints;
    double test_accuracy = 0.0;
    std::vector<PoolRoundLog> logs;
    bool exhausted = false;
    PredictorPair final_pair;
};

PoolMetrics run_pool(const PoolConfig& config, const data::Dataset& pool, PredictorPair pair,
                     std::uint64_t seed, const data::Dataset* test = nullptr);

/// Uniform draws fed to the stream decision rule until rounds * batch_per_round labels
/// have been spent; only queried points are trained on.
PoolMetrics neu_unis(const stream::StreamConfig& stream_config, const PoolConfig& config,
                     const data::Dataset& pool, PredictorPair pair, std::uint64_t seed,
                     const data::Dataset* test = nullptr);

}  // namespace neuronal::pool
