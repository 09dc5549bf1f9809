#include "doctest.h"
#include "test_util.hpp"

#include "neuronal/data.hpp"
#include "neuronal/errors.hpp"
#include "neuronal/stream.hpp"

#include <cmath>
#include <set>

using namespace neuronal;
using namespace neuronal::stream;

namespace {

PredictorPair tiny_pair(int d, int K, std::uint64_t seed, int m = 16) {
    PairConfig c;
    c.input_dim = d;
    c.width = m;
    c.depth = 2;
    c.num_classes = K;
    c.train1 = {1e-3, 1, 8, nn::TrainMode::MiniBatch};
    c.train2 = c.train1;
    return PredictorPair::create(c, seed);
}

data::Dataset tiny_stream(std::size_t n, std::uint64_t seed) {
    data::SynthSpec spec;
    spec.dim = 5;
    spec.num_classes = 3;
    spec.n = n;
    spec.seed = seed;
    return data::synth(spec);
}

}  // namespace

TEST_CASE("beta matches high-precision evaluations") {
    // Reference values from 30-digit evaluation of the closed form.
    CHECK(beta(1, 4, 1.0, 1, 0.1) == doctest::Approx(4.60814009656772669900).epsilon(1e-14));
    CHECK(beta(10000, 2, 1.0, 10000, 0.1) == doctest::Approx(0.06436471571205046349).epsilon(1e-13));
}

TEST_CASE("beta halves when t quadruples and decreases in t") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> t_dist(1, 100000);
    std::uniform_int_distribution<int> k_dist(1, 20);
    std::uniform_real_distribution<double> s_dist(0.1, 5.0);
    std::uniform_real_distribution<double> d_dist(0.001, 0.999);
    for (int i = 0; i < 100; ++i) {
        const auto t = t_dist(rng);
        const int K = k_dist(rng);
        const double S = s_dist(rng);
        const double delta = d_dist(rng);
        const std::size_t T = t_dist(rng);
        const double b1 = beta(t, K, S, T, delta);
        CHECK(beta(4 * t, K, S, T, delta) == doctest::Approx(b1 / 2).epsilon(1e-14));
        CHECK(beta(t + 1, K, S, T, delta) < b1);
    }
    CHECK_THROWS_AS(beta(0, 2, 1.0, 10, 0.1), ConfigError);
    CHECK_THROWS_AS(beta(1, 2, 1.0, 10, 1.0), ConfigError);
}

TEST_CASE("decide follows the strict gap rule") {
    const Vector s1 = (Vector(3) << 0.2, 0.25, 0.9).finished();
    auto d = decide(s1, 1.0, 0.05);  // 2 gamma beta = 0.1
    CHECK(d.k_hat == 0);
    CHECK(d.k_circ == 1);
    CHECK(d.fired);

    // The gap is exactly 0.2 in binary, so the strict test must fail at 0.2.
    const Vector s2 = (Vector(2) << 0.0, 0.2).finished();
    CHECK_FALSE(decide(s2, 1.0, 0.1).fired);
    CHECK(decide(s2, 1.0, 0.1000001).fired);

    const Vector s3 = (Vector(2) << 0.0, 1.0).finished();
    CHECK(decide(s3, 1.0, 2.5).fired);

    CHECK_THROWS_AS(decide(Vector::Zero(1), 2.0, 1.0), ConfigError);
}

TEST_CASE("decide breaks ties by lowest index and ignores constant shifts") {
    const Vector tie = (Vector(4) << 0.5, 0.1, 0.1, 0.1).finished();
    const auto d = decide(tie, 2.0, 0.01);
    CHECK(d.k_hat == 1);
    CHECK(d.k_circ == 2);
    CHECK(d.fired);

    std::mt19937_64 rng(2);
    for (int i = 0; i < 50; ++i) {
        const Vector s = test_util::random_vector(5, rng);
        const double c = test_util::random_vector(1, rng)[0] * 3.0;
        const auto a = decide(s, 1.5, 0.2);
        const auto b = decide(s.array() + c, 1.5, 0.2);
        CHECK(a.k_hat == b.k_hat);
        CHECK(a.k_circ == b.k_circ);
        CHECK(a.fired == b.fired);
    }
}

TEST_CASE("zero budget means no queries and only pseudo-labels") {
    const auto data = tiny_stream(60, 1);
    StreamConfig c;
    c.horizon = 60;
    c.budget = 0;
    const auto result = run_stream(c, data, tiny_pair(5, 3, 2), 3);
    CHECK(result.queries == 0);
    for (const auto& log : result.logs) {
        CHECK_FALSE(log.queried);
        CHECK(log.used_label == log.k_hat);
        CHECK(log.budget_blocked == log.fired);
    }
}

TEST_CASE("stream invariants: budget cap, regret counter, k_hat != k_circ") {
    const auto data = tiny_stream(150, 4);
    StreamConfig c;
    c.horizon = 150;
    c.budget = 20;
    const auto result = run_stream(c, data, tiny_pair(5, 3, 5), 6);
    CHECK(result.queries <= 20);
    std::size_t queried = 0;
    int wrong = 0;
    for (std::size_t i = 0; i < result.logs.size(); ++i) {
        const auto& log = result.logs[i];
        CHECK(log.k_hat != log.k_circ);
        CHECK(log.t == i + 1);
        CHECK(log.true_label == data.labels[i]);
        if (log.queried) {
            ++queried;
            CHECK(log.used_label == log.true_label);
        }
        wrong += log.k_hat != data.labels[i] ? 1 : 0;
        CHECK(result.cumulative_regret[i] == wrong);
        if (i > 0) CHECK(result.cumulative_regret[i] >= result.cumulative_regret[i - 1]);
    }
    CHECK(queried == result.queries);
}

TEST_CASE("stream run is deterministic") {
    const auto data = tiny_stream(80, 7);
    StreamConfig c;
    c.horizon = 80;
    c.budget = 30;
    const auto a = run_stream(c, data, tiny_pair(5, 3, 1), 9);
    const auto b = run_stream(c, data, tiny_pair(5, 3, 1), 9);
    CHECK(a.cumulative_regret == b.cumulative_regret);
    CHECK(a.final_pair == b.final_pair);
}

TEST_CASE("exact-pool mode grows the pool and replays its draws") {
    const auto data = tiny_stream(40, 8);
    StreamConfig c;
    c.horizon = 40;
    c.budget = 40;
    c.pool_mode = PoolMode::ExactPool;
    StreamLearner learner(tiny_pair(5, 3, 2), c, 11);
    std::vector<std::size_t> draws;
    for (std::size_t i = 0; i < 40; ++i) {
        const auto log = learner.step(data.x(i), data.labels[i]);
        REQUIRE(log.snapshot_index.has_value());
        CHECK(*log.snapshot_index < learner.snapshot_count());
        draws.push_back(*log.snapshot_index);
        CHECK(learner.snapshot_count() == i + 2);
    }
    StreamLearner again(tiny_pair(5, 3, 2), c, 11);
    std::vector<std::size_t> replay;
    for (std::size_t i = 0; i < 40; ++i) replay.push_back(*again.step(data.x(i), data.labels[i]).snapshot_index);
    CHECK(draws == replay);
}

TEST_CASE("random-stream with budget T queries every round") {
    const auto data = tiny_stream(50, 2);
    StreamConfig c;
    c.horizon = 50;
    c.budget = 50;
    c.rule = QueryRule::Random;
    CHECK(run_stream(c, data, tiny_pair(5, 3, 1), 1).queries == 50);
}

TEST_CASE("margin-stream with threshold 0 never queries") {
    const auto data = tiny_stream(50, 2);
    StreamConfig c;
    c.horizon = 50;
    c.budget = 50;
    c.rule = QueryRule::Margin;
    c.margin_threshold = 0.0;
    CHECK(run_stream(c, data, tiny_pair(5, 3, 1), 1).queries == 0);
}

TEST_CASE("run_stream validates its inputs") {
    const auto data = tiny_stream(10, 2);
    StreamConfig c;
    c.horizon = 20;
    CHECK_THROWS_AS(run_stream(c, data, tiny_pair(5, 3, 1), 1), DataError);
    c.horizon = 10;
    c.gamma = 1.0;
    CHECK_THROWS_AS(run_stream(c, data, tiny_pair(5, 3, 1), 1), ConfigError);
    c.gamma = 6.0;
    CHECK_THROWS_AS(run_stream(c, data, tiny_pair(4, 3, 1), 1), ShapeError);
}

TEST_CASE("replay batch holds the newest sample and distinct older ones") {
    std::vector<PairSample> history(30);
    for (int i = 0; i < 30; ++i) history[i].x = Vector::Constant(1, i);
    std::mt19937_64 rng(5);
    const auto batch = replay_batch(history, 8, rng);
    REQUIRE(batch.size() == 8);
    CHECK(batch.front().x[0] == 29.0);
    std::set<double> seen;
    for (const auto& s : batch) seen.insert(s.x[0]);
    CHECK(seen.size() == 8);
    CHECK(replay_batch(history, 100, rng).size() == 30);
}
