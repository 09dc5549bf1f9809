#include "neuronal/stream.hpp"

#include "neuronal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace neuronal::stream {

double beta(std::size_t t, int num_classes, double s_norm, std::size_t horizon, double delta) {
    if (t < 1) throw ConfigError("beta: t must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("beta: delta must lie in (0, 1)");
    const double td = static_cast<double>(t);
    return std::sqrt(num_classes * s_norm * s_norm / td) +
           std::sqrt(2.0 * std::log(3.0 * static_cast<double>(horizon) / delta) / td);
}

Decision decide(const Eigen::Ref<const Vector>& scores, double gamma, double beta_t) {
    if (scores.size() < 2) throw ConfigError("decide needs at least two classes");
    Decision d;
    d.k_hat = 0;
    for (Eigen::Index k = 1; k < scores.size(); ++k)
        if (scores[k] < scores[d.k_hat]) d.k_hat = static_cast<int>(k);
    d.k_circ = d.k_hat == 0 ? 1 : 0;
    for (Eigen::Index k = 0; k < scores.size(); ++k) {
        if (k == d.k_hat) continue;
        if (scores[k] < scores[d.k_circ]) d.k_circ = static_cast<int>(k);
    }
    d.gap = std::abs(scores[d.k_hat] - scores[d.k_circ]);
    d.fired = d.gap < 2.0 * gamma * beta_t;
    return d;
}

void StreamConfig::validate() const {
    if (horizon < 1) throw ConfigError("stream: horizon T must be >= 1");
    if (rule == QueryRule::Neuronal && !(gamma > 1.0)) {
        throw ConfigError("stream: gamma must be > 1");
    }
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("stream: delta must lie in (0, 1)");
    if (!(s_norm > 0.0)) throw ConfigError("stream: S must be positive");
    if (!(margin_threshold >= 0.0)) throw ConfigError("stream: margin threshold must be >= 0");
}

std::vector<PairSample> replay_batch(const std::vector<PairSample>& history, std::size_t batch_size,
                                     std::mt19937_64& rng) {
    std::vector<PairSample> batch;
    if (history.empty()) return batch;
    batch.push_back(history.back());
    const std::size_t older = history.size() - 1;
    const std::size_t extra = std::min(older, batch_size > 0 ? batch_size - 1 : 0);
    if (extra == 0) return batch;
    batch.reserve(extra + 1);
    if (extra == older) {
        for (std::size_t i = 0; i < older; ++i) batch.push_back(history[i]);
        return batch;
    }
    // Floyd's algorithm: `extra` distinct indices from [0, older).
    std::vector<std::size_t> picked;
    picked.reserve(extra);
    for (std::size_t j = older - extra; j < older; ++j) {
        std::uniform_int_distribution<std::size_t> pick(0, j);
        const std::size_t r = pick(rng);
        picked.push_back(std::find(picked.begin(), picked.end(), r) == picked.end() ? r : j);
    }
    for (const auto i : picked) batch.push_back(history[i]);
    return batch;
}

StreamLearner::StreamLearner(PredictorPair pair, StreamConfig config, std::uint64_t seed)
    : config_(std::move(config)), pair_(std::move(pair)), rng_(seed) {
    config_.validate();
    if (config_.pool_mode == PoolMode::ExactPool) snapshots_.push_back(pair_);
}

const PredictorPair& StreamLearner::inference_pair() const {
    return config_.pool_mode == PoolMode::ExactPool ? snapshots_[current_] : pair_;
}

void StreamLearner::train_newest(PairSample sample) {
    history_.push_back(std::move(sample));
    const std::uint64_t seed = rng_();
    if (config_.pool_mode == PoolMode::ExactPool) {
        // One step on the newest example, then grow and redraw from the parameter pool.
        pair_ = train_on(pair_, std::span<const PairSample>(&history_.back(), 1), seed);
        snapshots_.push_back(pair_);
        std::uniform_int_distribution<std::size_t> draw(0, snapshots_.size() - 1);
        current_ = draw(rng_);
    } else {
        const auto batch = replay_batch(
            history_, static_cast<std::size_t>(pair_.config.train1.batch_size), rng_);
        pair_ = train_on(pair_, batch, seed);
    }
}

void StreamLearner::train_labeled(const Eigen::Ref<const Vector>& x, int label) {
    const auto u = data::make_loss_vector(label, pair_.config.num_classes);
    train_newest(make_sample(pair_, x, u));
}

RoundLog StreamLearner::step(const Eigen::Ref<const Vector>& x, int true_label,
                             const std::function<double(int)>& population_regret) {
    ++t_;
    RoundLog log;
    log.t = t_;
    log.true_label = true_label;
    log.scores = score(inference_pair(), x);
    log.beta = beta(t_, pair_.config.num_classes, config_.s_norm, config_.horizon, config_.delta);

    const Decision d = decide(log.scores, config_.gamma, log.beta);
    log.k_hat = d.k_hat;
    log.k_circ = d.k_circ;
    switch (config_.rule) {
        case QueryRule::Neuronal:
            log.fired = d.fired;
            break;
        case QueryRule::Random: {
            const double rate = std::min(
                1.0, static_cast<double>(config_.budget) / static_cast<double>(config_.horizon));
            std::bernoulli_distribution coin(rate);
            log.fired = coin(rng_);
            break;
        }
        case QueryRule::Margin:
            log.fired = d.gap < config_.margin_threshold;
            break;
    }
    log.queried = log.fired && budget_left();
    log.budget_blocked = log.fired && !log.queried;
    if (log.queried) ++queries_;
    log.used_label = log.queried ? true_label : d.k_hat;

    if (log.queried || config_.train_on_pseudo) {
        const auto u = data::make_loss_vector(log.used_label, pair_.config.num_classes);
        train_newest(make_sample(pair_, x, u));
        log.trained = true;
        if (config_.pool_mode == PoolMode::ExactPool) log.snapshot_index = current_;
    }

    log.regret_inc = d.k_hat != true_label ? 1 : 0;
    log.population_regret = population_regret ? population_regret(d.k_hat)
                                              : static_cast<double>(log.regret_inc);
    return log;
}

double accuracy(const PredictorPair& pair, const data::Dataset& test) {
    if (test.size() == 0) return 0.0;
    std::size_t correct = 0;
    constexpr Eigen::Index chunk = 512;
    for (Eigen::Index start = 0; start < test.inputs.cols(); start += chunk) {
        const Eigen::Index count = std::min(chunk, test.inputs.cols() - start);
        const Matrix scores = score_batch(pair, test.inputs.middleCols(start, count));
        for (Eigen::Index b = 0; b < count; ++b) {
            Eigen::Index best = 0;
            scores.col(b).minCoeff(&best);
            if (static_cast<int>(best) == test.labels[static_cast<std::size_t>(start + b)]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

StreamResult run_stream(const StreamConfig& config, const data::Dataset& data,
                        PredictorPair pair, std::uint64_t seed, const data::Dataset* test) {
    config.validate();
    if (data.size() < config.horizon) {
        throw DataError("stream data has " + std::to_string(data.size()) +
                        " rows, horizon needs " + std::to_string(config.horizon));
    }
    if (data.num_classes != pair.config.num_classes || data.dim() != pair.config.input_dim) {
        throw ShapeError("dataset shape does not match the predictor pair");
    }

    StreamLearner learner(std::move(pair), config, seed);
    StreamResult result;
    result.logs.reserve(config.horizon);
    result.cumulative_regret.reserve(config.horizon);
    result.cumulative_population_regret.reserve(config.horizon);
    const std::size_t every =
        config.checkpoint_every > 0 ? config.checkpoint_every : std::max<std::size_t>(1, config.horizon / 100);

    int regret = 0;
    double population = 0.0;
    for (std::size_t i = 0; i < config.horizon; ++i) {
        std::function<double(int)> pop;
        if (data.has_posterior()) pop = [&data, i](int k) { return data.population_regret(i, k); };
        RoundLog log = learner.step(data.x(i), data.labels[i], pop);
        regret += log.regret_inc;
        population += log.population_regret;
        result.cumulative_regret.push_back(regret);
        result.cumulative_population_regret.push_back(population);
        result.logs.push_back(std::move(log));
        if (test != nullptr && ((i + 1) % every == 0 || i + 1 == config.horizon)) {
            result.checkpoints.push_back(
                {i + 1, learner.queries(), accuracy(learner.inference_pair(), *test)});
        }
    }
    result.queries = learner.queries();
    result.final_pair = learner.inference_pair();
    return result;
}

}  // namespace neuronal::stream
