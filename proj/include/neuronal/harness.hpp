#pragma once

#include "neuronal/data.hpp"
#include "neuronal/pool.hpp"
#include "neuronal/stream.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace neuronal::harness {

using json = nlohmann::ordered_json;

enum class Algorithm { NeuronalStream, NeuronalPool, NeuUnis, RandomStream, RandomPool, MarginStream };

std::string to_string(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& name);
bool is_stream(Algorithm algorithm);

struct DataSource {
    // Either a delimited file or a synthetic spec.
    std::optional<std::filesystem::path> path;
    data::FileFormat format = data::FileFormat::Csv;
    double test_fraction = 0.2;  // file data only
    data::SynthSpec synth;
    std::size_t train_size = 2000;  // synthetic data only
    std::size_t test_size = 1000;
};

struct ExperimentConfig {
    Algorithm algorithm = Algorithm::NeuronalStream;
    int width = 100;
    int depth = 2;
    nn::TrainSpec train{1e-3, 1, 64, nn::TrainMode::MiniBatch};
    stream::StreamConfig stream;
    std::optional<double> budget_fraction = 0.3;  // overrides stream.budget when set
    pool::PoolConfig pool;
    DataSource data;
    std::vector<std::uint64_t> seeds{0};
    std::optional<std::filesystem::path> output;
    bool record_rounds = false;
    bool record_timing = false;

    void validate() const;
};

json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const json& j, ExperimentConfig base = {});

/// FNV-1a over the canonical config JSON, excluding seeds and output paths.
std::string config_hash(const ExperimentConfig& config);

struct Metrics {
    std::string algorithm;
    std::uint64_t seed = 0;
    std::vector<int> cumulative_regret;
    std::vector<double> cumulative_population_regret;  // stream runs only
    std::vector<stream::Checkpoint> checkpoints;
    std::size_t queries = 0;
    std::size_t budget = 0;
    double test_accuracy = 0.0;
    double wall_time = 0.0;
    bool exhausted = false;
};

struct ExperimentResult {
    std::vector<Metrics> runs;
    std::vector<json> records;  // one per seed, then one aggregate
};

/// Loads or generates the data split the experiment runs on.
data::Split prepare_data(const ExperimentConfig& config);

Metrics run_single(const ExperimentConfig& config, const data::Split& split, std::uint64_t seed,
                   json* rounds = nullptr);

/// Runs every seed, builds the per-seed records plus an aggregate and appends them to
/// config.output (JSON lines) when set.
ExperimentResult run_experiment(const ExperimentConfig& config);

json run_record(const ExperimentConfig& config, const Metrics& metrics, const json* rounds);

struct SummaryRow {
    std::string algorithm;
    std::string config_hash;
    std::size_t runs = 0;
    double accuracy_mean = 0.0, accuracy_std = 0.0;
    double queries_mean = 0.0, queries_std = 0.0;
    double regret_mean = 0.0, regret_std = 0.0;
    std::vector<double> regret_series;      // mean cumulative regret per round
    std::vector<std::pair<double, double>> accuracy_vs_labels;  // mean (labels, accuracy)
};

/// Mean and population standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

/// Groups run records by algorithm; mixing configs within one algorithm is an error.
std::vector<SummaryRow> metrics_summary(const std::vector<json>& records);

std::string format_table(const std::vector<SummaryRow>& rows);
json summary_json(const std::vector<SummaryRow>& rows);

std::vector<json> read_records(const std::filesystem::path& path);

}  // namespace neuronal::harness
