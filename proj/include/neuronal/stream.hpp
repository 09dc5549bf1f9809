#pragma once

// Stream-based active learning: score, gap test against 2*gamma*beta_t, query or
// pseudo-label, then train the predictor pair.

#include "neuronal/data.hpp"
#include "neuronal/pair.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace neuronal::stream {

/// beta_t = sqrt(K S^2 / t) + sqrt(2 log(3T/delta) / t).
double beta(std::size_t t, int num_classes, double s_norm, std::size_t horizon, double delta);

struct Decision {
    int k_hat = 0;
    int k_circ = 1;
    double gap = 0.0;
    bool fired = false;
};

/// k_hat = argmin, k_circ = argmin of the rest (lowest index on ties);
/// fires iff |s[k_hat] - s[k_circ]| < 2 gamma beta_t.
Decision decide(const Eigen::Ref<const Vector>& scores, double gamma, double beta_t);

enum class PoolMode { MiniBatch, ExactPool };

/// Which rule decides whether to ask for the label.
enum class QueryRule {
    Neuronal,  // gap < 2 gamma beta_t
    Random,    // Bernoulli(budget / T)
    Margin,    // gap < margin_threshold
};

struct StreamConfig {
    std::size_t horizon = 10000;  // T
    double gamma = 6.0;
    double delta = 0.1;
    double s_norm = 1.0;
    std::size_t budget = 3000;
    PoolMode pool_mode = PoolMode::MiniBatch;
    QueryRule rule = QueryRule::Neuronal;
    double margin_threshold = 0.1;
    // Train on the algorithm's own prediction in rounds without a query.
    bool train_on_pseudo = true;
    // Accuracy checkpoints every this many rounds (0 = max(1, T/100)).
    std::size_t checkpoint_every = 0;

    void validate() const;
};

struct RoundLog {
    std::size_t t = 0;
    Vector scores;
    int k_hat = 0;
    int k_circ = 0;
    double beta = 0.0;
    bool fired = false;          // I_t
    bool queried = false;        // label actually consumed
    bool budget_blocked = false; // fired but the budget was spent
    bool trained = false;
    int used_label = -1;         // true label if queried, k_hat otherwise
    int true_label = -1;
    int regret_inc = 0;          // k_hat != true label
    double population_regret = 0.0;
    std::optional<std::size_t> snapshot_index;  // exact-pool draw for the next round
};

struct Checkpoint {
    std::size_t round = 0;
    std::size_t labels = 0;
    double accuracy = 0.0;
};

/// Online learner state; one instance per run.
class StreamLearner {
public:
    StreamLearner(PredictorPair pair, StreamConfig config, std::uint64_t seed);

    /// One round on (x, label). `population_regret` is h[k_hat] - h[k*] when known.
    RoundLog step(const Eigen::Ref<const Vector>& x, int true_label,
                  const std::function<double(int)>& population_regret = {});

    /// Pair used for inference this round (drawn snapshot in exact-pool mode).
    const PredictorPair& inference_pair() const;
    /// Latest trained iterate.
    const PredictorPair& trained_pair() const { return pair_; }
    std::size_t queries() const { return queries_; }
    std::size_t rounds() const { return t_; }
    std::size_t snapshot_count() const { return snapshots_.size(); }
    bool budget_left() const { return queries_ < config_.budget; }

    /// Observe a labeled point outside the decision rule (used by the pool conversion).
    void train_labeled(const Eigen::Ref<const Vector>& x, int label);

private:
    void train_newest(PairSample sample);

    StreamConfig config_;
    PredictorPair pair_;
    std::vector<PairSample> history_;
    std::vector<PredictorPair> snapshots_;
    std::size_t current_ = 0;
    std::size_t t_ = 0;
    std::size_t queries_ = 0;
    std::mt19937_64 rng_;
};

struct StreamResult {
    std::vector<RoundLog> logs;
    std::vector<int> cumulative_regret;
    std::vector<double> cumulative_population_regret;
    std::vector<Checkpoint> checkpoints;
    std::size_t queries = 0;
    PredictorPair final_pair;
};

/// Fraction of points whose argmin-score prediction matches the observed label.
double accuracy(const PredictorPair& pair, const data::Dataset& test);

/// Runs the first config.horizon rows of `data` in order.
StreamResult run_stream(const StreamConfig& config, const data::Dataset& data,
                        PredictorPair pair, std::uint64_t seed,
                        const data::Dataset* test = nullptr);

/// Mini-batch replay: newest sample plus up to batch_size - 1 uniform draws from the rest.
std::vector<PairSample> replay_batch(const std::vector<PairSample>& history, std::size_t batch_size,
                                     std::mt19937_64& rng);

}  // namespace neuronal::stream
