#include "neuronal/pool.hpp"

#include "neuronal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace neuronal::pool {

namespace {

std::size_t argmin_index(const Eigen::Ref<const Vector>& v) {
    std::size_t best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v[i] < v[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(i);
    return best;
}

double off_min_probability(double w_min, double w_i, double mu, double gamma) {
    if (w_i == w_min) return 1.0 / mu;
    return w_min / (mu * w_min + gamma * (w_i - w_min));
}

double off_min_mass(const Eigen::Ref<const Vector>& gaps, std::size_t i_hat, double mu,
                    double gamma) {
    const double w_min = gaps[static_cast<Eigen::Index>(i_hat)];
    double mass = 0.0;
    for (Eigen::Index i = 0; i < gaps.size(); ++i) {
        if (static_cast<std::size_t>(i) == i_hat) continue;
        mass += off_min_probability(w_min, gaps[i], mu, gamma);
    }
    return mass;
}

void check_gaps(const Eigen::Ref<const Vector>& gaps) {
    if (gaps.size() < 2) throw ConfigError("IGW needs at least two candidates");
    for (Eigen::Index i = 0; i < gaps.size(); ++i) {
        if (!std::isfinite(gaps[i]) || gaps[i] < 0.0) {
            throw ConfigError("IGW gap " + std::to_string(i) + " is negative or non-finite");
        }
    }
}

}  // namespace

double min_admissible_mu(const Eigen::Ref<const Vector>& gaps, double gamma) {
    check_gaps(gaps);
    const std::size_t i_hat = argmin_index(gaps);
    // Every off-minimum p_i <= 1/mu, so mu = B - 1 is always admissible.
    double hi = std::max(1.0, static_cast<double>(gaps.size() - 1));
    double lo = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= 0.0) break;
        if (off_min_mass(gaps, i_hat, mid, gamma) > 1.0) lo = mid;
        else hi = mid;
    }
    return hi;
}

IgwDistribution igw_distribution(const Eigen::Ref<const Vector>& gaps, double mu, double gamma) {
    check_gaps(gaps);
    if (!(mu > 0.0) || !(gamma > 0.0)) throw ConfigError("IGW needs mu > 0 and gamma > 0");

    IgwDistribution dist;
    dist.gaps = gaps;
    dist.i_hat = argmin_index(gaps);
    dist.probs.resize(gaps.size());
    const double w_min = gaps[static_cast<Eigen::Index>(dist.i_hat)];
    double mass = 0.0;
    for (Eigen::Index i = 0; i < gaps.size(); ++i) {
        if (static_cast<std::size_t>(i) == dist.i_hat) continue;
        dist.probs[i] = off_min_probability(w_min, gaps[i], mu, gamma);
        mass += dist.probs[i];
    }
    if (mass > 1.0) {
        std::ostringstream msg;
        msg << "IGW weights sum to " << mass << " > 1 with mu = " << mu
            << "; the smallest admissible mu for these gaps is " << min_admissible_mu(gaps, gamma)
            << " (mu >= B - 1 = " << gaps.size() - 1 << " always works)";
        throw ParameterError(msg.str());
    }
    dist.probs[static_cast<Eigen::Index>(dist.i_hat)] = 1.0 - mass;
    return dist;
}

std::size_t sample_index(const Eigen::Ref<const Vector>& probs, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double draw = unit(rng);
    double cumulative = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        cumulative += probs[i];
        if (draw < cumulative) return static_cast<std::size_t>(i);
    }
    // Rounding left a sliver above the last cumulative value: take the last positive entry.
    for (Eigen::Index i = probs.size() - 1; i >= 0; --i)
        if (probs[i] > 0.0) return static_cast<std::size_t>(i);
    return 0;
}

void PoolConfig::validate() const {
    if (rounds < 1) throw ConfigError("pool: Q must be >= 1");
    if (candidates < 2) throw ConfigError("pool: B must be >= 2");
    if (!(mu > 0.0) || !(gamma > 0.0)) throw ConfigError("pool: mu and gamma must be positive");
    if (batch_per_round < 1 || batch_per_round > candidates) {
        throw ConfigError("pool: batch_per_round must lie in [1, B]");
    }
}

Vector prediction_gaps(const Matrix& scores) {
    Vector gaps(scores.cols());
    for (Eigen::Index b = 0; b < scores.cols(); ++b) gaps[b] = stream::decide(scores.col(b), 2.0, 0.0).gap;
    return gaps;
}

PoolRound pool_round(PredictorPair pair, const Matrix& candidates, std::span<const int> labels,
                     const PoolConfig& config, std::mt19937_64& rng,
                     std::vector<PairSample>& memory) {
    config.validate();
    if (static_cast<std::size_t>(candidates.cols()) != labels.size()) {
        throw ShapeError("pool_round: candidate and label counts differ");
    }
    const std::size_t B = labels.size();
    const std::size_t picks = std::min(config.batch_per_round, B);

    std::vector<std::size_t> remaining(B);
    std::iota(remaining.begin(), remaining.end(), 0);
    Matrix scores = score_batch(pair, candidates);

    PoolRound out;
    for (std::size_t pick = 0; pick < picks; ++pick) {
        if (pick > 0 && config.rescore) {
            Matrix sub(candidates.rows(), static_cast<Eigen::Index>(remaining.size()));
            for (std::size_t j = 0; j < remaining.size(); ++j)
                sub.col(static_cast<Eigen::Index>(j)) = candidates.col(static_cast<Eigen::Index>(remaining[j]));
            const Matrix fresh = score_batch(pair, sub);
            for (std::size_t j = 0; j < remaining.size(); ++j)
                scores.col(static_cast<Eigen::Index>(remaining[j])) = fresh.col(static_cast<Eigen::Index>(j));
        }
        Matrix live(scores.rows(), static_cast<Eigen::Index>(remaining.size()));
        for (std::size_t j = 0; j < remaining.size(); ++j)
            live.col(static_cast<Eigen::Index>(j)) = scores.col(static_cast<Eigen::Index>(remaining[j]));

        std::size_t chosen = 0;
        double probability = 0.0;
        if (remaining.size() == 1) {
            probability = 1.0;
        } else if (config.rule == SelectionRule::Igw) {
            const auto dist = igw_distribution(prediction_gaps(live), config.mu, config.gamma);
            chosen = sample_index(dist.probs, rng);
            probability = dist.probs[static_cast<Eigen::Index>(chosen)];
        } else {
            std::uniform_int_distribution<std::size_t> uniform(0, remaining.size() - 1);
            chosen = uniform(rng);
            probability = 1.0 / static_cast<double>(remaining.size());
        }

        const std::size_t position = remaining[chosen];
        const auto col = static_cast<Eigen::Index>(position);
        const stream::Decision d = stream::decide(live.col(static_cast<Eigen::Index>(chosen)), 2.0, 0.0);
        PoolRoundLog log;
        log.pool_index = position;
        log.scores = live.col(static_cast<Eigen::Index>(chosen));
        log.k_hat = d.k_hat;
        log.k_circ = d.k_circ;
        log.gap = d.gap;
        log.probability = probability;
        log.true_label = labels[position];
        log.regret_inc = d.k_hat != log.true_label ? 1 : 0;

        const auto u = data::make_loss_vector(log.true_label, pair.config.num_classes);
        memory.push_back(make_sample(pair, candidates.col(col), u));
        const auto batch =
            stream::replay_batch(memory, static_cast<std::size_t>(pair.config.train1.batch_size), rng);
        pair = train_on(pair, batch, rng());

        out.selected.push_back(position);
        out.logs.push_back(std::move(log));
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(chosen));
    }
    out.pair = std::move(pair);
    return out;
}

namespace {

void check_pool_shape(const data::Dataset& pool, const PredictorPair& pair) {
    if (pool.num_classes != pair.config.num_classes || pool.dim() != pair.config.input_dim) {
        throw ShapeError("pool dataset shape does not match the predictor pair");
    }
}

}  // namespace

PoolMetrics run_pool(const PoolConfig& config, const data::Dataset& pool, PredictorPair pair,
                     std::uint64_t seed, const data::Dataset* test) {
    config.validate();
    check_pool_shape(pool, pair);
    if (pool.size() < config.candidates) {
        throw DataError("pool has " + std::to_string(pool.size()) + " points, B = " +
                        std::to_string(config.candidates));
    }

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> unlabeled(pool.size());
    std::iota(unlabeled.begin(), unlabeled.end(), 0);
    std::vector<PairSample> memory;
    PoolMetrics metrics;
    int regret = 0;

    for (std::size_t q = 0; q < config.rounds; ++q) {
        if (unlabeled.size() < config.candidates) {
            metrics.exhausted = true;
            break;
        }
        // B distinct unlabeled points: partial Fisher-Yates over the unlabeled list.
        for (std::size_t j = 0; j < config.candidates; ++j) {
            std::uniform_int_distribution<std::size_t> pick(j, unlabeled.size() - 1);
            std::swap(unlabeled[j], unlabeled[pick(rng)]);
        }
        Matrix candidates(pool.dim(), static_cast<Eigen::Index>(config.candidates));
        std::vector<int> labels(config.candidates);
        for (std::size_t j = 0; j < config.candidates; ++j) {
            candidates.col(static_cast<Eigen::Index>(j)) = pool.x(unlabeled[j]);
            labels[j] = pool.labels[unlabeled[j]];
        }

        PoolRound round = pool_round(std::move(pair), candidates, labels, config, rng, memory);
        pair = std::move(round.pair);

        std::vector<std::size_t> taken;
        for (auto& log : round.logs) {
            const std::size_t position = log.pool_index;
            log.pool_index = unlabeled[position];
            log.round = q + 1;
            taken.push_back(log.pool_index);
            regret += log.regret_inc;
            metrics.cumulative_regret.push_back(regret);
            metrics.logs.push_back(std::move(log));
        }
        std::erase_if(unlabeled, [&](std::size_t idx) {
            return std::find(taken.begin(), taken.end(), idx) != taken.end();
        });
        metrics.queries += taken.size();
        metrics.rounds_completed = q + 1;
        if (test != nullptr) {
            metrics.checkpoints.push_back({q + 1, metrics.queries, stream::accuracy(pair, *test)});
        }
    }
    metrics.test_accuracy = test != nullptr ? stream::accuracy(pair, *test) : 0.0;
    metrics.final_pair = std::move(pair);
    return metrics;
}

PoolMetrics neu_unis(const stream::StreamConfig& stream_config, const PoolConfig& config,
                     const data::Dataset& pool, PredictorPair pair, std::uint64_t seed,
                     const data::Dataset* test) {
    config.validate();
    check_pool_shape(pool, pair);

    auto sc = stream_config;
    sc.budget = config.rounds * config.batch_per_round;
    sc.train_on_pseudo = false;
    stream::StreamLearner learner(std::move(pair), sc, seed);
    std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);

    std::vector<std::size_t> unlabeled(pool.size());
    std::iota(unlabeled.begin(), unlabeled.end(), 0);
    PoolMetrics metrics;
    int regret = 0;
    // Guard against a decision rule that never fires again.
    const std::size_t max_draws = 100 * std::max<std::size_t>(pool.size(), 1);
    std::size_t draws = 0;

    while (learner.budget_left()) {
        if (unlabeled.empty() || draws >= max_draws) {
            metrics.exhausted = true;
            break;
        }
        ++draws;
        std::uniform_int_distribution<std::size_t> pick(0, unlabeled.size() - 1);
        const std::size_t slot = pick(rng);
        const std::size_t idx = unlabeled[slot];
        const auto log = learner.step(pool.x(idx), pool.labels[idx]);
        if (!log.queried) continue;

        PoolRoundLog entry;
        entry.round = metrics.queries / config.batch_per_round + 1;
        entry.pool_index = idx;
        entry.scores = log.scores;
        entry.k_hat = log.k_hat;
        entry.k_circ = log.k_circ;
        entry.gap = std::abs(log.scores[log.k_hat] - log.scores[log.k_circ]);
        entry.probability = 1.0 / static_cast<double>(unlabeled.size());
        entry.true_label = log.true_label;
        entry.regret_inc = log.regret_inc;
        regret += entry.regret_inc;
        metrics.cumulative_regret.push_back(regret);
        metrics.logs.push_back(std::move(entry));

        unlabeled[slot] = unlabeled.back();
        unlabeled.pop_back();
        ++metrics.queries;
        if (metrics.queries % config.batch_per_round == 0) {
            metrics.rounds_completed = metrics.queries / config.batch_per_round;
            if (test != nullptr) {
                metrics.checkpoints.push_back({metrics.rounds_completed, metrics.queries,
                                               stream::accuracy(learner.inference_pair(), *test)});
            }
        }
    }
    metrics.test_accuracy = test != nullptr ? stream::accuracy(learner.inference_pair(), *test) : 0.0;
    metrics.final_pair = learner.inference_pair();
    return metrics;
}

}  // namespace neuronal::pool
