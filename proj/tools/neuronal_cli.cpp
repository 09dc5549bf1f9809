// neuronal: stream / pool active-learning experiments, NTK diagnostics, synthetic data
// and result summaries.

#include "neuronal/errors.hpp"
#include "neuronal/harness.hpp"
#include "neuronal/ntk.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

using namespace neuronal;
using harness::json;

namespace {

struct CommonFlags {
    std::optional<std::string> config;
    std::optional<std::string> seeds;
    std::optional<std::string> output;
    std::optional<int> width, depth, epochs, batch_size;
    std::optional<double> lr;
    std::optional<std::string> data_path, format;
    std::optional<double> test_fraction;
    std::optional<int> synth_dim, synth_classes;
    std::optional<double> synth_margin, synth_alpha, synth_spread, synth_ramp;
    std::optional<std::string> synth_mode;
    std::optional<std::uint64_t> synth_seed;
    std::optional<std::size_t> train_size, test_size;
    bool record_rounds = false;
    bool timing = false;
};

struct StreamFlags {
    std::optional<std::size_t> horizon, budget, checkpoint_every;
    std::optional<double> gamma, delta, s_norm, budget_fraction, margin_threshold;
    std::optional<std::string> pool_mode;
};

struct PoolFlags {
    std::optional<std::size_t> rounds, candidates, batch;
    std::optional<double> mu, gamma;
    bool fast = false;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config, "JSON config file mirroring the experiment config");
    app->add_option("--seeds", f.seeds, "comma-separated run seeds");
    app->add_option("--output", f.output, "results file (JSON lines, appended)");
    app->add_option("--width", f.width, "network width m");
    app->add_option("--depth", f.depth, "network depth L");
    app->add_option("--lr", f.lr, "SGD learning rate");
    app->add_option("--epochs", f.epochs, "passes per update");
    app->add_option("--batch-size", f.batch_size, "replay batch size");
    app->add_option("--data", f.data_path, "delimited data file, label in the last column");
    app->add_option("--format", f.format, "csv | tsv | whitespace");
    app->add_option("--test-fraction", f.test_fraction, "held-out fraction for file data");
    app->add_option("--synth-dim", f.synth_dim, "synthetic input dimension");
    app->add_option("--synth-classes", f.synth_classes, "synthetic number of classes");
    app->add_option("--synth-margin", f.synth_margin, "hard-margin epsilon");
    app->add_option("--synth-mode", f.synth_mode, "hard | tsybakov");
    app->add_option("--synth-alpha", f.synth_alpha, "Tsybakov noise exponent");
    app->add_option("--synth-spread", f.synth_spread, "cluster spread");
    app->add_option("--synth-ramp", f.synth_ramp, "cosine-gap ramp width");
    app->add_option("--synth-seed", f.synth_seed, "synthetic data seed");
    app->add_option("--train-size", f.train_size, "synthetic train rows");
    app->add_option("--test-size", f.test_size, "synthetic test rows");
    app->add_flag("--record-rounds", f.record_rounds, "store per-round logs in each record");
    app->add_flag("--timing", f.timing, "store wall time in records (breaks bit-identical reruns)");
}

void add_stream(CLI::App* app, StreamFlags& f) {
    app->add_option("--horizon", f.horizon, "rounds T (default: all training rows)");
    app->add_option("--stream-gamma", f.gamma, "exploration parameter gamma (> 1)");
    app->add_option("--delta", f.delta, "confidence parameter delta");
    app->add_option("--s-norm", f.s_norm, "norm parameter S");
    app->add_option("--budget", f.budget, "absolute label budget");
    app->add_option("--budget-fraction", f.budget_fraction, "label budget as a fraction of T");
    app->add_option("--pool-mode", f.pool_mode, "minibatch | exact-pool");
    app->add_option("--margin-threshold", f.margin_threshold, "margin-stream threshold");
    app->add_option("--checkpoint-every", f.checkpoint_every, "accuracy checkpoint interval");
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            seeds.push_back(std::stoull(item));
        } catch (const std::exception&) {
            throw ConfigError("bad seed '" + item + "'");
        }
    }
    return seeds;
}

harness::ExperimentConfig load_base(const CommonFlags& f) {
    harness::ExperimentConfig c;
    c.stream.horizon = 0;
    if (f.config) {
        std::ifstream in(*f.config);
        if (!in) throw ConfigError("cannot read config file " + *f.config);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config file: ") + e.what());
        }
        c = harness::config_from_json(j, c);
    }
    return c;
}

void apply_common(harness::ExperimentConfig& c, const CommonFlags& f) {
    if (f.seeds) c.seeds = parse_seeds(*f.seeds);
    if (f.output) c.output = *f.output;
    if (f.width) c.width = *f.width;
    if (f.depth) c.depth = *f.depth;
    if (f.lr) c.train.learning_rate = *f.lr;
    if (f.epochs) c.train.epochs = *f.epochs;
    if (f.batch_size) c.train.batch_size = *f.batch_size;
    if (f.data_path) c.data.path = *f.data_path;
    if (f.format) c.data.format = data::parse_format(*f.format);
    if (f.test_fraction) c.data.test_fraction = *f.test_fraction;
    auto& s = c.data.synth;
    if (f.synth_dim) s.dim = *f.synth_dim;
    if (f.synth_classes) s.num_classes = *f.synth_classes;
    if (f.synth_margin) s.margin = *f.synth_margin;
    if (f.synth_alpha) s.alpha = *f.synth_alpha;
    if (f.synth_spread) s.spread = *f.synth_spread;
    if (f.synth_ramp) s.ramp = *f.synth_ramp;
    if (f.synth_seed) s.seed = *f.synth_seed;
    if (f.synth_mode) {
        if (*f.synth_mode != "hard" && *f.synth_mode != "tsybakov") {
            throw ConfigError("--synth-mode must be hard or tsybakov");
        }
        s.mode = *f.synth_mode == "hard" ? data::NoiseMode::HardMargin : data::NoiseMode::Tsybakov;
    }
    if (f.train_size) c.data.train_size = *f.train_size;
    if (f.test_size) c.data.test_size = *f.test_size;
    c.record_rounds = c.record_rounds || f.record_rounds;
    c.record_timing = f.timing;
}

void apply_stream(harness::ExperimentConfig& c, const StreamFlags& f) {
    if (f.horizon) c.stream.horizon = *f.horizon;
    if (f.gamma) c.stream.gamma = *f.gamma;
    if (f.delta) c.stream.delta = *f.delta;
    if (f.s_norm) c.stream.s_norm = *f.s_norm;
    if (f.budget) {
        c.stream.budget = *f.budget;
        c.budget_fraction.reset();
    }
    if (f.budget_fraction) c.budget_fraction = *f.budget_fraction;
    if (f.margin_threshold) c.stream.margin_threshold = *f.margin_threshold;
    if (f.checkpoint_every) c.stream.checkpoint_every = *f.checkpoint_every;
    if (f.pool_mode) {
        if (*f.pool_mode != "minibatch" && *f.pool_mode != "exact-pool") {
            throw ConfigError("--pool-mode must be minibatch or exact-pool");
        }
        c.stream.pool_mode =
            *f.pool_mode == "exact-pool" ? stream::PoolMode::ExactPool : stream::PoolMode::MiniBatch;
    }
}

void resolve_output(harness::ExperimentConfig& c) {
    if (c.output) return;
    const char* dir = std::getenv("NEURONAL_OUTPUT_DIR");
    const std::filesystem::path base = dir != nullptr && *dir != '\0' ? dir : "results";
    c.output = base / (harness::to_string(c.algorithm) + "-" + harness::config_hash(c) + ".jsonl");
}

int run(const harness::ExperimentConfig& config) {
    const auto result = harness::run_experiment(config);
    std::cout << harness::format_table(harness::metrics_summary(result.records));
    std::cout << "records appended to " << config.output->string() << '\n';
    return 0;
}

json report_json(const ntk::ComplexityReport& r, int points, int classes, int depth) {
    return {{"T", points},
            {"K", classes},
            {"L", depth},
            {"lambda0", r.lambda0},
            {"S", r.S},
            {"L_H", r.L_H},
            {"effective_dim", r.effective_dim},
            {"lower_bound", r.lower_bound},
            {"bound_holds", r.bound_holds},
            {"jitter", r.jitter}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural active learning: stream and pool algorithms, NTK diagnostics"};
    app.require_subcommand(1);

    CommonFlags stream_common, pool_common, ntk_common;
    StreamFlags stream_flags, neu_unis_flags;
    PoolFlags pool_flags;

    std::string stream_algorithm = "neuronal";
    auto* stream_cmd = app.add_subcommand("stream", "stream-based run (neuronal | random | margin)");
    stream_cmd->add_option("--algorithm", stream_algorithm, "neuronal | random | margin")
        ->check(CLI::IsMember({"neuronal", "random", "margin"}));
    add_common(stream_cmd, stream_common);
    add_stream(stream_cmd, stream_flags);

    std::string pool_algorithm = "neuronal";
    auto* pool_cmd = app.add_subcommand("pool", "pool-based run (neuronal | random | neu-unis)");
    pool_cmd->add_option("--algorithm", pool_algorithm, "neuronal | random | neu-unis")
        ->check(CLI::IsMember({"neuronal", "random", "neu-unis"}));
    add_common(pool_cmd, pool_common);
    pool_cmd->add_option("--rounds", pool_flags.rounds, "query rounds Q");
    pool_cmd->add_option("--candidates", pool_flags.candidates, "candidates per round B");
    pool_cmd->add_option("--mu", pool_flags.mu, "IGW mu");
    pool_cmd->add_option("--gamma", pool_flags.gamma, "IGW gamma");
    pool_cmd->add_option("--batch", pool_flags.batch, "queries per round");
    pool_cmd->add_flag("--fast", pool_flags.fast, "score candidates once per round");
    pool_cmd->add_option("--stream-gamma", neu_unis_flags.gamma, "neu-unis stream gamma");
    pool_cmd->add_option("--delta", neu_unis_flags.delta, "neu-unis stream delta");
    pool_cmd->add_option("--s-norm", neu_unis_flags.s_norm, "neu-unis stream S");

    int ntk_points = 8, ntk_depth = 2, mc_width = 0, mc_nets = 32;
    std::uint64_t mc_seed = 0;
    auto* ntk_cmd = app.add_subcommand("ntk", "NTK matrix and complexity terms for the first T points");
    add_common(ntk_cmd, ntk_common);
    ntk_cmd->add_option("--points", ntk_points, "number of points T");
    ntk_cmd->add_option("--ntk-depth", ntk_depth, "ReLU layers in the kernel recursion");
    ntk_cmd->add_option("--mc-width", mc_width, "also estimate the finite-width Gram at this width");
    ntk_cmd->add_option("--mc-nets", mc_nets, "networks averaged by the Gram estimate");
    ntk_cmd->add_option("--mc-seed", mc_seed, "seed for the Gram estimate");

    data::SynthSpec synth_spec;
    std::string synth_out, synth_mode = "hard";
    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset as CSV");
    synth_cmd->add_option("--out", synth_out, "output CSV path")->required();
    synth_cmd->add_option("--dim", synth_spec.dim, "input dimension d");
    synth_cmd->add_option("--classes", synth_spec.num_classes, "classes K");
    synth_cmd->add_option("--n", synth_spec.n, "rows");
    synth_cmd->add_option("--margin", synth_spec.margin, "hard-margin epsilon");
    synth_cmd->add_option("--mode", synth_mode, "hard | tsybakov")->check(CLI::IsMember({"hard", "tsybakov"}));
    synth_cmd->add_option("--alpha", synth_spec.alpha, "Tsybakov exponent");
    synth_cmd->add_option("--spread", synth_spec.spread, "cluster spread");
    synth_cmd->add_option("--ramp", synth_spec.ramp, "cosine-gap ramp width");
    synth_cmd->add_option("--seed", synth_spec.seed, "seed");

    std::vector<std::string> report_files;
    std::string series_out;
    auto* report_cmd = app.add_subcommand("report", "mean +- std table over result files");
    report_cmd->add_option("files", report_files, "JSON-lines result files")->required();
    report_cmd->add_option("--series", series_out, "write plot series (JSON) here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ErrorCategory::Config);
    }

    try {
        if (*stream_cmd) {
            auto c = load_base(stream_common);
            c.algorithm = harness::parse_algorithm(stream_algorithm + "-stream");
            apply_common(c, stream_common);
            apply_stream(c, stream_flags);
            resolve_output(c);
            return run(c);
        }
        if (*pool_cmd) {
            auto c = load_base(pool_common);
            c.algorithm = pool_algorithm == "neu-unis"
                              ? harness::Algorithm::NeuUnis
                              : harness::parse_algorithm(pool_algorithm + "-pool");
            apply_common(c, pool_common);
            apply_stream(c, neu_unis_flags);
            if (pool_flags.rounds) c.pool.rounds = *pool_flags.rounds;
            if (pool_flags.candidates) c.pool.candidates = *pool_flags.candidates;
            if (pool_flags.mu) c.pool.mu = *pool_flags.mu;
            if (pool_flags.gamma) c.pool.gamma = *pool_flags.gamma;
            if (pool_flags.batch) c.pool.batch_per_round = *pool_flags.batch;
            if (pool_flags.fast) c.pool.rescore = false;
            resolve_output(c);
            return run(c);
        }
        if (*ntk_cmd) {
            auto c = load_base(ntk_common);
            apply_common(c, ntk_common);
            const auto split = harness::prepare_data(c);
            const auto& ds = split.train;
            const auto T = static_cast<std::size_t>(std::min<std::size_t>(ntk_points, ds.size()));
            if (T == 0) throw DataError("ntk: no data points");
            const Matrix X = ds.inputs.leftCols(static_cast<Eigen::Index>(T));
            const int K = ds.num_classes;
            // h(x)[k]: expected 0-1 loss from the known posterior, else the observed loss vector.
            Vector h(static_cast<Eigen::Index>(T) * K);
            for (std::size_t i = 0; i < T; ++i) {
                for (int k = 0; k < K; ++k) {
                    const auto idx = static_cast<Eigen::Index>(i) * K + k;
                    h[idx] = ds.has_posterior()
                                 ? 1.0 - ds.posterior(k, static_cast<Eigen::Index>(i))
                                 : (ds.labels[i] == k ? 0.0 : 1.0);
                }
            }
            const Matrix H = ntk::expand_multiclass(ntk::ntk_matrix(X, ntk_depth), K);
            const auto rep = ntk::complexity_terms(H, h);
            json out = report_json(rep, static_cast<int>(T), K, ntk_depth);
            if (mc_width > 0) {
                const auto gram = ntk::mc_gram_oracle(X, ntk_depth, mc_width, K, mc_nets, mc_seed);
                out["mc_frobenius_distance"] = (gram.mean - H).norm();
            }
            std::cout << out.dump(2) << '\n';
            return 0;
        }
        if (*synth_cmd) {
            synth_spec.mode = synth_mode == "hard" ? data::NoiseMode::HardMargin : data::NoiseMode::Tsybakov;
            const auto ds = data::synth(synth_spec);
            std::ofstream out(synth_out);
            if (!out) throw DataError("cannot write " + synth_out);
            out.precision(17);
            for (std::size_t i = 0; i < ds.size(); ++i) {
                for (Eigen::Index r = 0; r < ds.inputs.rows(); ++r) out << ds.inputs(r, static_cast<Eigen::Index>(i)) << ',';
                out << ds.labels[i] << '\n';
            }
            std::cout << "wrote " << ds.size() << " rows to " << synth_out << '\n';
            return 0;
        }
        if (*report_cmd) {
            std::vector<json> records;
            for (const auto& file : report_files) {
                auto more = harness::read_records(file);
                records.insert(records.end(), more.begin(), more.end());
            }
            const auto rows = harness::metrics_summary(records);
            std::cout << harness::format_table(rows);
            if (!series_out.empty()) {
                std::ofstream out(series_out);
                if (!out) throw DataError("cannot write " + series_out);
                out << harness::summary_json(rows).dump(2) << '\n';
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorCategory::Internal);
    }
    return 0;
}
