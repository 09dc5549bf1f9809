#include "neuronal/harness.hpp"

#include "neuronal/errors.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace neuronal::harness {

std::string to_string(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::NeuronalStream: return "neuronal-stream";
        case Algorithm::NeuronalPool: return "neuronal-pool";
        case Algorithm::NeuUnis: return "neu-unis";
        case Algorithm::RandomStream: return "random-stream";
        case Algorithm::RandomPool: return "random-pool";
        case Algorithm::MarginStream: return "margin-stream";
    }
    return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
    for (auto a : {Algorithm::NeuronalStream, Algorithm::NeuronalPool, Algorithm::NeuUnis,
                   Algorithm::RandomStream, Algorithm::RandomPool, Algorithm::MarginStream}) {
        if (to_string(a) == name) return a;
    }
    throw ConfigError("unknown algorithm '" + name + "'");
}

bool is_stream(Algorithm algorithm) {
    return algorithm == Algorithm::NeuronalStream || algorithm == Algorithm::RandomStream ||
           algorithm == Algorithm::MarginStream;
}

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (width < 1 || depth < 2) throw ConfigError("need width >= 1 and depth >= 2");
    train.validate();
    if (budget_fraction && !(*budget_fraction >= 0.0 && *budget_fraction <= 1.0)) {
        throw ConfigError("budget fraction must lie in [0, 1]");
    }
    if (is_stream(algorithm) || algorithm == Algorithm::NeuUnis) {
        auto s = stream;
        if (s.horizon == 0) s.horizon = 1;  // resolved from the data later
        if (algorithm != Algorithm::NeuronalStream && algorithm != Algorithm::NeuUnis) s.gamma = 2.0;
        s.validate();
    }
    if (!is_stream(algorithm)) pool.validate();
    if (!data.path) data.synth.validate();
    if (data.path && !(data.test_fraction > 0.0 && data.test_fraction < 1.0)) {
        throw ConfigError("test_fraction must lie in (0, 1)");
    }
}

namespace {

std::string format_name(data::FileFormat f) {
    switch (f) {
        case data::FileFormat::Csv: return "csv";
        case data::FileFormat::Tsv: return "tsv";
        case data::FileFormat::Whitespace: return "whitespace";
    }
    return "csv";
}

json config_body(const ExperimentConfig& c) {
    json j;
    j["algorithm"] = to_string(c.algorithm);
    j["net"] = {{"width", c.width}, {"depth", c.depth}};
    j["train"] = {{"learning_rate", c.train.learning_rate},
                  {"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size}};
    if (is_stream(c.algorithm) || c.algorithm == Algorithm::NeuUnis) {
        j["stream"] = {{"horizon", c.stream.horizon},
                       {"gamma", c.stream.gamma},
                       {"delta", c.stream.delta},
                       {"s_norm", c.stream.s_norm},
                       {"budget", c.stream.budget},
                       {"pool_mode", c.stream.pool_mode == stream::PoolMode::ExactPool ? "exact-pool"
                                                                                       : "minibatch"},
                       {"margin_threshold", c.stream.margin_threshold},
                       {"checkpoint_every", c.stream.checkpoint_every}};
        if (c.budget_fraction) j["budget_fraction"] = *c.budget_fraction;
    }
    if (!is_stream(c.algorithm)) {
        j["pool"] = {{"rounds", c.pool.rounds},
                     {"candidates", c.pool.candidates},
                     {"mu", c.pool.mu},
                     {"gamma", c.pool.gamma},
                     {"batch_per_round", c.pool.batch_per_round},
                     {"rescore", c.pool.rescore}};
    }
    json d;
    if (c.data.path) {
        d["path"] = c.data.path->string();
        d["format"] = format_name(c.data.format);
        d["test_fraction"] = c.data.test_fraction;
    } else {
        const auto& s = c.data.synth;
        d["synth"] = {{"dim", s.dim},
                      {"num_classes", s.num_classes},
                      {"margin", s.margin},
                      {"mode", s.mode == data::NoiseMode::HardMargin ? "hard" : "tsybakov"},
                      {"alpha", s.alpha},
                      {"spread", s.spread},
                      {"ramp", s.ramp},
                      {"seed", s.seed}};
        d["train_size"] = c.data.train_size;
        d["test_size"] = c.data.test_size;
    }
    j["data"] = d;
    return j;
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json to_json(const ExperimentConfig& config) {
    json j = config_body(config);
    j["seeds"] = config.seeds;
    if (config.output) j["output"] = config.output->string();
    j["record_rounds"] = config.record_rounds;
    return j;
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig c) {
    try {
        if (j.contains("algorithm")) c.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
        if (j.contains("net")) {
            read_if(j["net"], "width", c.width);
            read_if(j["net"], "depth", c.depth);
        }
        if (j.contains("train")) {
            read_if(j["train"], "learning_rate", c.train.learning_rate);
            read_if(j["train"], "epochs", c.train.epochs);
            read_if(j["train"], "batch_size", c.train.batch_size);
        }
        if (j.contains("stream")) {
            const auto& s = j["stream"];
            read_if(s, "horizon", c.stream.horizon);
            read_if(s, "gamma", c.stream.gamma);
            read_if(s, "delta", c.stream.delta);
            read_if(s, "s_norm", c.stream.s_norm);
            if (s.contains("budget")) {
                c.stream.budget = s["budget"].get<std::size_t>();
                c.budget_fraction.reset();
            }
            if (s.contains("pool_mode")) {
                const auto mode = s["pool_mode"].get<std::string>();
                if (mode != "exact-pool" && mode != "minibatch") {
                    throw ConfigError("pool_mode must be exact-pool or minibatch");
                }
                c.stream.pool_mode =
                    mode == "exact-pool" ? stream::PoolMode::ExactPool : stream::PoolMode::MiniBatch;
            }
            read_if(s, "margin_threshold", c.stream.margin_threshold);
            read_if(s, "checkpoint_every", c.stream.checkpoint_every);
        }
        if (j.contains("budget_fraction")) c.budget_fraction = j["budget_fraction"].get<double>();
        if (j.contains("pool")) {
            const auto& p = j["pool"];
            read_if(p, "rounds", c.pool.rounds);
            read_if(p, "candidates", c.pool.candidates);
            read_if(p, "mu", c.pool.mu);
            read_if(p, "gamma", c.pool.gamma);
            read_if(p, "batch_per_round", c.pool.batch_per_round);
            read_if(p, "rescore", c.pool.rescore);
        }
        if (j.contains("data")) {
            const auto& d = j["data"];
            if (d.contains("path")) c.data.path = d["path"].get<std::string>();
            if (d.contains("format")) c.data.format = data::parse_format(d["format"].get<std::string>());
            read_if(d, "test_fraction", c.data.test_fraction);
            read_if(d, "train_size", c.data.train_size);
            read_if(d, "test_size", c.data.test_size);
            if (d.contains("synth")) {
                const auto& s = d["synth"];
                auto& spec = c.data.synth;
                read_if(s, "dim", spec.dim);
                read_if(s, "num_classes", spec.num_classes);
                read_if(s, "margin", spec.margin);
                read_if(s, "alpha", spec.alpha);
                read_if(s, "spread", spec.spread);
                read_if(s, "ramp", spec.ramp);
                read_if(s, "seed", spec.seed);
                if (s.contains("mode")) {
                    const auto mode = s["mode"].get<std::string>();
                    if (mode != "hard" && mode != "tsybakov") {
                        throw ConfigError("synth mode must be hard or tsybakov");
                    }
                    spec.mode = mode == "hard" ? data::NoiseMode::HardMargin : data::NoiseMode::Tsybakov;
                }
            }
        }
        read_if(j, "seeds", c.seeds);
        if (j.contains("output")) c.output = j["output"].get<std::string>();
        read_if(j, "record_rounds", c.record_rounds);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    return c;
}

std::string config_hash(const ExperimentConfig& config) {
    const std::string text = config_body(config).dump();
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : text) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << hash;
    return out.str();
}

data::Split prepare_data(const ExperimentConfig& config) {
    if (config.data.path) {
        const auto full = data::load_normalize(*config.data.path, config.data.format);
        // Fixed split order so every seed sees the same held-out set.
        const auto shuffled = full.shuffled(0x2545f4914f6cdd1dULL);
        const auto train_size = static_cast<std::size_t>(
            std::llround((1.0 - config.data.test_fraction) * static_cast<double>(full.size())));
        return data::split(shuffled, train_size);
    }
    auto spec = config.data.synth;
    spec.n = config.data.train_size + config.data.test_size;
    return data::split(data::synth(spec), config.data.train_size);
}

namespace {

PairConfig pair_config(const ExperimentConfig& config, const data::Dataset& data) {
    PairConfig pc;
    pc.input_dim = data.dim();
    pc.num_classes = data.num_classes;
    pc.width = config.width;
    pc.depth = config.depth;
    pc.train1 = config.train;
    pc.train2 = config.train;
    return pc;
}

stream::StreamConfig resolve_stream(const ExperimentConfig& config, std::size_t rows) {
    auto sc = config.stream;
    if (sc.horizon == 0 || sc.horizon > rows) sc.horizon = rows;
    if (config.budget_fraction) {
        sc.budget = static_cast<std::size_t>(
            std::llround(*config.budget_fraction * static_cast<double>(sc.horizon)));
    }
    switch (config.algorithm) {
        case Algorithm::RandomStream: sc.rule = stream::QueryRule::Random; break;
        case Algorithm::MarginStream: sc.rule = stream::QueryRule::Margin; break;
        default: sc.rule = stream::QueryRule::Neuronal; break;
    }
    return sc;
}

json rounds_json(const std::vector<stream::RoundLog>& logs) {
    json out = json::array();
    for (const auto& r : logs) {
        out.push_back({{"t", r.t},
                       {"scores", std::vector<double>(r.scores.data(), r.scores.data() + r.scores.size())},
                       {"k_hat", r.k_hat},
                       {"k_circ", r.k_circ},
                       {"beta", r.beta},
                       {"I_t", r.fired ? 1 : 0},
                       {"queried", r.queried},
                       {"budget_blocked", r.budget_blocked},
                       {"label_used", r.queried ? "true" : "pseudo"},
                       {"regret_inc", r.regret_inc},
                       {"population_regret", r.population_regret}});
    }
    return out;
}

json rounds_json(const std::vector<pool::PoolRoundLog>& logs) {
    json out = json::array();
    for (const auto& r : logs) {
        out.push_back({{"round", r.round},
                       {"pool_index", r.pool_index},
                       {"k_hat", r.k_hat},
                       {"k_circ", r.k_circ},
                       {"gap", r.gap},
                       {"probability", r.probability},
                       {"true_label", r.true_label},
                       {"regret_inc", r.regret_inc}});
    }
    return out;
}

}  // namespace

Metrics run_single(const ExperimentConfig& config, const data::Split& split, std::uint64_t seed,
                   json* rounds) {
    const auto start = std::chrono::steady_clock::now();
    Metrics m;
    m.algorithm = to_string(config.algorithm);
    m.seed = seed;

    // The run seed drives stream order, network init and all sampling.
    const data::Dataset train = split.train.shuffled(seed);
    PredictorPair pair = PredictorPair::create(pair_config(config, train), seed + 1);

    try {
        if (is_stream(config.algorithm)) {
            const auto sc = resolve_stream(config, train.size());
            auto result = stream::run_stream(sc, train, std::move(pair), seed + 2, &split.test);
            m.cumulative_regret = std::move(result.cumulative_regret);
            m.cumulative_population_regret = std::move(result.cumulative_population_regret);
            m.checkpoints = std::move(result.checkpoints);
            m.queries = result.queries;
            m.budget = sc.budget;
            m.test_accuracy = m.checkpoints.empty() ? stream::accuracy(result.final_pair, split.test)
                                                    : m.checkpoints.back().accuracy;
            if (rounds) *rounds = rounds_json(result.logs);
        } else {
            auto pc = config.pool;
            pc.rule = config.algorithm == Algorithm::RandomPool ? pool::SelectionRule::Uniform
                                                                : pool::SelectionRule::Igw;
            pool::PoolMetrics result;
            if (config.algorithm == Algorithm::NeuUnis) {
                auto sc = config.stream;
                sc.horizon = train.size();
                sc.rule = stream::QueryRule::Neuronal;
                result = pool::neu_unis(sc, pc, train, std::move(pair), seed + 2, &split.test);
            } else {
                result = pool::run_pool(pc, train, std::move(pair), seed + 2, &split.test);
            }
            m.cumulative_regret = std::move(result.cumulative_regret);
            m.checkpoints = std::move(result.checkpoints);
            m.queries = result.queries;
            m.budget = pc.rounds * pc.batch_per_round;
            m.test_accuracy = result.test_accuracy;
            m.exhausted = result.exhausted;
            if (rounds) *rounds = rounds_json(result.logs);
        }
    } catch (Error& e) {
        throw Error(e.category(), "seed " + std::to_string(seed) + ": " + e.what());
    }
    m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return m;
}

json run_record(const ExperimentConfig& config, const Metrics& m, const json* rounds) {
    json checkpoints = json::array();
    for (const auto& c : m.checkpoints) {
        checkpoints.push_back({{"round", c.round}, {"labels", c.labels}, {"accuracy", c.accuracy}});
    }
    json metrics = {{"test_accuracy", m.test_accuracy},
                    {"N_T", m.queries},
                    {"budget", m.budget},
                    {"final_regret", m.cumulative_regret.empty() ? 0 : m.cumulative_regret.back()},
                    {"regret_curve", m.cumulative_regret},
                    {"checkpoints", checkpoints},
                    {"exhausted", m.exhausted}};
    if (!m.cumulative_population_regret.empty()) {
        metrics["final_population_regret"] = m.cumulative_population_regret.back();
        metrics["population_regret_curve"] = m.cumulative_population_regret;
    }
    if (config.record_timing) metrics["wall_time"] = m.wall_time;

    json record = {{"record", "run"},
                   {"algorithm", m.algorithm},
                   {"seed", m.seed},
                   {"config_hash", config_hash(config)},
                   {"config", to_json(config)},
                   {"metrics", metrics}};
    if (rounds) record["rounds"] = *rounds;
    return record;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const data::Split split = prepare_data(config);
    if (split.train.size() == 0 || split.test.size() == 0) {
        throw DataError("experiment needs non-empty train and test splits");
    }

    ExperimentResult result;
    for (const auto seed : config.seeds) {
        json rounds;
        Metrics m = run_single(config, split, seed, config.record_rounds ? &rounds : nullptr);
        result.records.push_back(run_record(config, m, config.record_rounds ? &rounds : nullptr));
        result.runs.push_back(std::move(m));
    }

    const auto rows = metrics_summary(result.records);
    json aggregate = {{"record", "aggregate"},
                      {"config_hash", config_hash(config)},
                      {"config", to_json(config)},
                      {"std_convention", "population"},
                      {"summary", summary_json(rows)}};
    result.records.push_back(aggregate);

    if (config.output) {
        if (config.output->has_parent_path()) std::filesystem::create_directories(config.output->parent_path());
        std::ofstream out(*config.output, std::ios::app);
        if (!out) throw DataError("cannot open results file " + config.output->string());
        for (const auto& r : result.records) out << r.dump() << '\n';
    }
    return result;
}

std::pair<double, double> mean_std(std::span<const double> values) {
    if (values.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (const double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (const double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    return {mean, std::sqrt(var)};
}

std::vector<SummaryRow> metrics_summary(const std::vector<json>& records) {
    std::map<std::string, std::vector<const json*>> groups;
    std::vector<std::string> order;
    for (const auto& r : records) {
        if (r.value("record", "") != "run") continue;
        const auto algorithm = r.at("algorithm").get<std::string>();
        if (!groups.count(algorithm)) order.push_back(algorithm);
        groups[algorithm].push_back(&r);
    }
    if (groups.empty()) throw DataError("metrics_summary: no run records");

    std::vector<SummaryRow> rows;
    for (const auto& algorithm : order) {
        const auto& group = groups[algorithm];
        SummaryRow row;
        row.algorithm = algorithm;
        row.config_hash = group.front()->at("config_hash").get<std::string>();
        row.runs = group.size();
        std::vector<double> acc, queries, regret;
        std::size_t shortest = std::numeric_limits<std::size_t>::max();
        std::size_t checkpoints = std::numeric_limits<std::size_t>::max();
        for (const auto* r : group) {
            if (r->at("config_hash").get<std::string>() != row.config_hash) {
                throw ConfigError("metrics_summary: records for '" + algorithm +
                                  "' come from different configs");
            }
            const auto& m = r->at("metrics");
            acc.push_back(m.at("test_accuracy").get<double>());
            queries.push_back(m.at("N_T").get<double>());
            regret.push_back(m.at("final_regret").get<double>());
            shortest = std::min(shortest, m.at("regret_curve").size());
            checkpoints = std::min(checkpoints, m.at("checkpoints").size());
        }
        std::tie(row.accuracy_mean, row.accuracy_std) = mean_std(acc);
        std::tie(row.queries_mean, row.queries_std) = mean_std(queries);
        std::tie(row.regret_mean, row.regret_std) = mean_std(regret);

        row.regret_series.assign(shortest, 0.0);
        row.accuracy_vs_labels.assign(checkpoints, {0.0, 0.0});
        for (const auto* r : group) {
            const auto& m = r->at("metrics");
            for (std::size_t t = 0; t < shortest; ++t) row.regret_series[t] += m["regret_curve"][t].get<double>();
            for (std::size_t c = 0; c < checkpoints; ++c) {
                row.accuracy_vs_labels[c].first += m["checkpoints"][c]["labels"].get<double>();
                row.accuracy_vs_labels[c].second += m["checkpoints"][c]["accuracy"].get<double>();
            }
        }
        const double n = static_cast<double>(group.size());
        for (auto& v : row.regret_series) v /= n;
        for (auto& [labels, accuracy] : row.accuracy_vs_labels) {
            labels /= n;
            accuracy /= n;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_table(const std::vector<SummaryRow>& rows) {
    std::ostringstream out;
    out << "# mean +- std over seeds (std: population convention)\n";
    out << std::left << std::setw(18) << "algorithm" << std::setw(6) << "runs" << std::setw(22)
        << "accuracy" << std::setw(22) << "N_T" << "final regret\n";
    out << std::fixed;
    for (const auto& r : rows) {
        std::ostringstream acc, q, reg;
        acc << std::fixed << std::setprecision(4) << r.accuracy_mean << " +- " << r.accuracy_std;
        q << std::fixed << std::setprecision(1) << r.queries_mean << " +- " << r.queries_std;
        reg << std::fixed << std::setprecision(1) << r.regret_mean << " +- " << r.regret_std;
        out << std::left << std::setw(18) << r.algorithm << std::setw(6) << r.runs << std::setw(22)
            << acc.str() << std::setw(22) << q.str() << reg.str() << '\n';
    }
    return out.str();
}

json summary_json(const std::vector<SummaryRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) {
        json acc_labels = json::array();
        for (const auto& [labels, accuracy] : r.accuracy_vs_labels) {
            acc_labels.push_back({{"labels", labels}, {"accuracy", accuracy}});
        }
        out.push_back({{"algorithm", r.algorithm},
                       {"config_hash", r.config_hash},
                       {"runs", r.runs},
                       {"accuracy_mean", r.accuracy_mean},
                       {"accuracy_std", r.accuracy_std},
                       {"queries_mean", r.queries_mean},
                       {"queries_std", r.queries_std},
                       {"regret_mean", r.regret_mean},
                       {"regret_std", r.regret_std},
                       {"regret_series", r.regret_series},
                       {"accuracy_vs_labels", acc_labels}});
    }
    return out;
}

std::vector<json> read_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read results file " + path.string());
    std::vector<json> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            records.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw DataError("results line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

}  // namespace neuronal::harness
