#include "doctest.h"

#include "neuronal/data.hpp"
#include "neuronal/errors.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace neuronal;
using namespace neuronal::data;

TEST_CASE("rows are scaled to unit norm") {
    const auto ds = parse_normalize("3,4,0\n1,0,1\n", FileFormat::Csv);
    REQUIRE(ds.size() == 2);
    CHECK(ds.normalized);
    CHECK(ds.x(0)[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(ds.x(0)[1] == doctest::Approx(0.8).epsilon(1e-15));
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(ds.x(i).norm() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("string labels are remapped in sorted order") {
    const auto ds = parse_normalize("1,0,B\n0,1,A\n1,1,B\n", FileFormat::Csv);
    CHECK(ds.num_classes == 2);
    CHECK(ds.labels == std::vector<int>{1, 0, 1});
}

TEST_CASE("numeric labels sort numerically and headers are skipped") {
    const auto ds = parse_normalize("a\tb\tclass\n1\t0\t10\n0\t1\t9\n1\t1\t2\n", FileFormat::Tsv);
    CHECK(ds.size() == 3);
    CHECK(ds.labels == std::vector<int>{2, 1, 0});
    const auto ws = parse_normalize("1  0 x\n0 1   y\n", FileFormat::Whitespace);
    CHECK(ws.labels == std::vector<int>{0, 1});
}

TEST_CASE("malformed input is reported") {
    CHECK_THROWS_AS(parse_normalize("0,0,A\n1,0,B\n", FileFormat::Csv), DataError);
    CHECK_THROWS_AS(parse_normalize("1,0,A\n1,zz,B\n", FileFormat::Csv), DataError);
    CHECK_THROWS_AS(parse_normalize("1,0,A\n1,B\n", FileFormat::Csv), DataError);
    CHECK_THROWS_AS(parse_format("parquet"), ConfigError);
    CHECK_THROWS_AS(load_normalize("/nonexistent/file.csv"), DataError);
    try {
        parse_normalize("1,1,A\n0,0,B\n", FileFormat::Csv);
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }
}

TEST_CASE("load_normalize reads a file") {
    const auto path = std::filesystem::temp_directory_path() / "neuronal_test_load.csv";
    {
        std::ofstream out(path);
        out << "x1,x2,y\n3,4,1\n0,2,0\n";
    }
    const auto ds = load_normalize(path);
    CHECK(ds.size() == 2);
    CHECK(ds.num_classes == 2);
    CHECK(ds.x(1)[1] == 1.0);
    std::filesystem::remove(path);
}

TEST_CASE("loss vectors") {
    const auto u = make_loss_vector(1, 3);
    CHECK(u.values() == (Vector(3) << 1.0, 0.0, 1.0).finished());
    CHECK(make_loss_vector(0, 1).values() == Vector::Zero(1));
    CHECK_THROWS_AS(make_loss_vector(3, 3), DataError);
    const auto custom = make_loss_vector(0, 2, LossKind::Custom, [](int k, int y) { return k == y ? 0.0 : 0.5; });
    CHECK(custom.values() == (Vector(2) << 0.0, 0.5).finished());
    CHECK_THROWS_AS(make_loss_vector(0, 2, LossKind::Custom, [](int, int) { return 1.2; }), DataError);
    CHECK_THROWS_AS(make_loss_vector(0, 2, LossKind::Custom), ConfigError);
}

TEST_CASE("hard-margin synthetic data respects the margin") {
    SynthSpec spec;
    spec.n = 2000;
    spec.seed = 3;
    const auto ds = synth(spec);
    REQUIRE(ds.size() == 2000);
    REQUIRE(ds.has_posterior());
    CHECK(ds.dim() == 10);
    double min_gap = 1.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(ds.x(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
        const auto col = ds.posterior.col(static_cast<Eigen::Index>(i));
        CHECK(col.sum() == doctest::Approx(1.0).epsilon(1e-12));
        const int best = ds.bayes_label(i);
        for (int k = 0; k < 3; ++k) {
            if (k == best) continue;
            min_gap = std::min(min_gap, ds.population_regret(i, k));
        }
        CHECK(ds.population_regret(i, best) == 0.0);
    }
    CHECK(min_gap >= 0.2 - 1e-12);
}

TEST_CASE("Tsybakov synthetic data reaches small gaps") {
    SynthSpec spec;
    spec.mode = NoiseMode::Tsybakov;
    spec.alpha = 1.0;
    spec.n = 2000;
    const auto ds = synth(spec);
    double min_gap = 1.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const int best = ds.bayes_label(i);
        min_gap = std::min(min_gap, ds.population_regret(i, (best + 1) % 3));
    }
    CHECK(min_gap < 0.05);
}

TEST_CASE("synthetic edge cases and determinism") {
    SynthSpec spec;
    spec.n = 0;
    CHECK(synth(spec).size() == 0);
    spec.n = 100;
    spec.num_classes = 11;
    CHECK_THROWS_AS(synth(spec), ConfigError);
    spec.num_classes = 3;
    const auto a = synth(spec);
    const auto b = synth(spec);
    CHECK(a.inputs == b.inputs);
    CHECK(a.labels == b.labels);
    CHECK(a.shuffled(5).labels == b.shuffled(5).labels);
    CHECK(a.shuffled(5).inputs == b.shuffled(5).inputs);
    CHECK_FALSE(a.shuffled(5).labels == a.shuffled(6).labels);
}

TEST_CASE("split and subset keep rows together") {
    SynthSpec spec;
    spec.n = 50;
    const auto ds = synth(spec).shuffled(1);
    const auto parts = split(ds, 30);
    CHECK(parts.train.size() == 30);
    CHECK(parts.test.size() == 20);
    CHECK(parts.test.x(0) == ds.x(30));
    CHECK(parts.test.labels[0] == ds.labels[30]);
    CHECK(parts.test.posterior.col(0) == ds.posterior.col(30));
}
