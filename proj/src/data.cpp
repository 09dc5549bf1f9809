#include "neuronal/data.hpp"

#include "neuronal/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace neuronal::data {

int Dataset::bayes_label(std::size_t i) const {
    if (!has_posterior()) return labels[i];
    Eigen::Index best = 0;
    posterior.col(static_cast<Eigen::Index>(i)).maxCoeff(&best);
    return static_cast<int>(best);
}

double Dataset::population_regret(std::size_t i, int predicted) const {
    if (!has_posterior()) return predicted == labels[i] ? 0.0 : 1.0;
    const auto col = posterior.col(static_cast<Eigen::Index>(i));
    return col.maxCoeff() - col[predicted];
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.name = name;
    out.num_classes = num_classes;
    out.normalized = normalized;
    out.inputs.resize(inputs.rows(), static_cast<Eigen::Index>(rows.size()));
    out.labels.reserve(rows.size());
    if (has_posterior()) out.posterior.resize(posterior.rows(), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
        const auto src = static_cast<Eigen::Index>(rows[j]);
        const auto dst = static_cast<Eigen::Index>(j);
        out.inputs.col(dst) = inputs.col(src);
        out.labels.push_back(labels[rows[j]]);
        if (has_posterior()) out.posterior.col(dst) = posterior.col(src);
    }
    return out;
}

Dataset Dataset::shuffled(std::uint64_t seed) const {
    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    return subset(order);
}

void Dataset::validate() const {
    if (static_cast<std::size_t>(inputs.cols()) != labels.size()) {
        throw DataError("dataset '" + name + "': " + std::to_string(inputs.cols()) +
                        " points but " + std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes) {
            throw DataError("dataset '" + name + "': label " + std::to_string(labels[i]) +
                            " at row " + std::to_string(i) + " outside [0, " +
                            std::to_string(num_classes) + ")");
        }
    }
    if (normalized) {
        for (Eigen::Index i = 0; i < inputs.cols(); ++i) {
            if (std::abs(inputs.col(i).norm() - 1.0) > 1e-9) {
                throw DataError("dataset '" + name + "': row " + std::to_string(i) +
                                " is flagged normalized but has norm " +
                                std::to_string(inputs.col(i).norm()));
            }
        }
    }
}

Split split(const Dataset& dataset, std::size_t train_size) {
    train_size = std::min(train_size, dataset.size());
    std::vector<std::size_t> head(train_size);
    std::vector<std::size_t> tail(dataset.size() - train_size);
    std::iota(head.begin(), head.end(), 0);
    std::iota(tail.begin(), tail.end(), train_size);
    return {dataset.subset(head), dataset.subset(tail)};
}

FileFormat parse_format(const std::string& name) {
    if (name == "csv") return FileFormat::Csv;
    if (name == "tsv") return FileFormat::Tsv;
    if (name == "whitespace" || name == "ws") return FileFormat::Whitespace;
    throw ConfigError("unknown dataset format '" + name + "' (expected csv, tsv or whitespace)");
}

void normalize_columns(Matrix& inputs) {
    for (Eigen::Index i = 0; i < inputs.cols(); ++i) {
        const double norm = inputs.col(i).norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) {
            throw DataError("row " + std::to_string(i) + " has zero (or non-finite) norm");
        }
        inputs.col(i) /= norm;
    }
}

namespace {

std::string trim(std::string_view s) {
    const auto begin = s.find_first_not_of(" \t\r\"");
    if (begin == std::string_view::npos) return {};
    const auto end = s.find_last_not_of(" \t\r\"");
    return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split_fields(const std::string& line, FileFormat format) {
    std::vector<std::string> fields;
    if (format == FileFormat::Whitespace) {
        std::istringstream in(line);
        std::string tok;
        while (in >> tok) fields.push_back(tok);
        return fields;
    }
    const char delim = format == FileFormat::Csv ? ',' : '\t';
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        fields.push_back(trim(std::string_view(line).substr(start, pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return fields;
}

std::optional<double> parse_number(const std::string& s) {
    double value = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || s.empty()) return std::nullopt;
    return value;
}

}  // namespace

Dataset parse_normalize(const std::string& text, FileFormat format, const std::string& name) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> raw_labels;
    std::size_t width = 0;
    std::size_t line_no = 0;
    bool first_content = true;

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line, format);
        if (fields.size() < 2) {
            throw DataError("line " + std::to_string(line_no) +
                            ": need at least one feature and a label");
        }
        std::vector<double> features;
        features.reserve(fields.size() - 1);
        bool numeric = true;
        for (std::size_t c = 0; c + 1 < fields.size(); ++c) {
            const auto v = parse_number(fields[c]);
            if (!v) {
                numeric = false;
                break;
            }
            features.push_back(*v);
        }
        if (!numeric) {
            if (first_content) {  // header row
                first_content = false;
                continue;
            }
            throw DataError("line " + std::to_string(line_no) + ": non-numeric feature");
        }
        first_content = false;
        if (width == 0) width = features.size();
        if (features.size() != width) {
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(width) + " features, got " +
                            std::to_string(features.size()));
        }
        const std::string label = trim(fields.back());
        if (label.empty()) throw DataError("line " + std::to_string(line_no) + ": empty label");
        rows.push_back(std::move(features));
        raw_labels.push_back(label);
    }

    // Numeric labels sort numerically, anything else lexicographically.
    const bool numeric_labels = std::all_of(raw_labels.begin(), raw_labels.end(),
                                            [](const std::string& s) { return parse_number(s).has_value(); });
    std::vector<std::string> distinct = raw_labels;
    std::sort(distinct.begin(), distinct.end(), [&](const std::string& a, const std::string& b) {
        return numeric_labels ? *parse_number(a) < *parse_number(b) : a < b;
    });
    distinct.erase(std::unique(distinct.begin(), distinct.end(),
                               [&](const std::string& a, const std::string& b) {
                                   return numeric_labels ? *parse_number(a) == *parse_number(b)
                                                         : a == b;
                               }),
                   distinct.end());
    std::map<std::string, int> index;
    for (const auto& raw : raw_labels) {
        if (index.count(raw)) continue;
        const auto it = std::find_if(distinct.begin(), distinct.end(), [&](const std::string& d) {
            return numeric_labels ? *parse_number(d) == *parse_number(raw) : d == raw;
        });
        index[raw] = static_cast<int>(it - distinct.begin());
    }

    Dataset ds;
    ds.name = name;
    ds.num_classes = static_cast<int>(distinct.size());
    ds.inputs.resize(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(rows.size()));
    ds.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ds.inputs.col(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Vector>(rows[i].data(), static_cast<Eigen::Index>(width));
        ds.labels.push_back(index.at(raw_labels[i]));
    }
    normalize_columns(ds.inputs);
    ds.normalized = true;
    return ds;
}

Dataset load_normalize(const std::filesystem::path& path, FileFormat format) {
    std::ifstream file(path);
    if (!file) throw DataError("cannot read dataset file " + path.string());
    std::ostringstream buffer;
    buffer << file.rdbuf();
    return parse_normalize(buffer.str(), format, path.stem().string());
}

LossVector make_loss_vector(int label, int num_classes, LossKind kind,
                            const LossFunction& custom) {
    if (label < 0 || label >= num_classes) {
        throw DataError("label " + std::to_string(label) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
    Vector u(num_classes);
    for (int k = 0; k < num_classes; ++k) {
        if (kind == LossKind::ZeroOne) {
            u[k] = k == label ? 0.0 : 1.0;
        } else {
            if (!custom) throw ConfigError("custom loss kind without a loss function");
            u[k] = custom(k, label);
        }
    }
    return LossVector(std::move(u));
}

void SynthSpec::validate() const {
    if (dim < 1 || num_classes < 1) throw ConfigError("synth: need dim >= 1 and num_classes >= 1");
    if (num_classes > dim) {
        throw ConfigError("synth: " + std::to_string(num_classes) +
                          " orthonormal anchors do not fit in dimension " + std::to_string(dim));
    }
    if (mode == NoiseMode::HardMargin && !(margin > 0.0 && margin <= 1.0)) {
        throw ConfigError("synth: hard-margin mode needs margin in (0, 1]");
    }
    if (mode == NoiseMode::Tsybakov && !(alpha >= 0.0)) {
        throw ConfigError("synth: alpha must be >= 0");
    }
    if (!(spread >= 0.0) || !(ramp > 0.0)) throw ConfigError("synth: need spread >= 0 and ramp > 0");
}

Dataset synth(const SynthSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int d = spec.dim;
    const int K = spec.num_classes;

    // Random orthonormal anchors from a QR factorization of a Gaussian matrix.
    Matrix gauss(d, K);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < K; ++c) gauss(r, c) = normal(rng);
    const Matrix anchors = Eigen::HouseholderQR<Matrix>(gauss).householderQ() * Matrix::Identity(d, K);

    Dataset ds;
    ds.name = spec.mode == NoiseMode::HardMargin ? "synth-hard" : "synth-tsybakov";
    ds.num_classes = K;
    ds.normalized = true;
    ds.inputs.resize(d, static_cast<Eigen::Index>(spec.n));
    ds.posterior.resize(K, static_cast<Eigen::Index>(spec.n));
    ds.labels.reserve(spec.n);

    std::uniform_int_distribution<int> cluster(0, K - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double noise_scale = spec.spread / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < spec.n; ++i) {
        Vector x;
        do {
            x = anchors.col(cluster(rng));
            for (int r = 0; r < d; ++r) x[r] += noise_scale * normal(rng);
        } while (!(x.norm() > 0.0));
        x.normalize();

        const Vector cosines = anchors.transpose() * x;
        Eigen::Index best = 0;
        const double top = cosines.maxCoeff(&best);
        double second = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k)
            if (k != best) second = std::max(second, cosines[k]);
        const double ratio = K == 1 ? 1.0 : std::min(1.0, (top - second) / spec.ramp);

        double gap = 1.0;
        if (spec.mode == NoiseMode::HardMargin) {
            gap = spec.margin + (1.0 - spec.margin) * ratio;
        } else if (spec.alpha == 0.0) {
            gap = ratio < 1.0 ? 0.0 : 1.0;
        } else {
            gap = std::pow(ratio, 1.0 / spec.alpha);
        }

        auto post = ds.posterior.col(static_cast<Eigen::Index>(i));
        post.setConstant((1.0 - gap) / K);
        post[best] = (1.0 + (K - 1) * gap) / K;

        // Inverse-CDF draw of the observed label.
        const double draw = unit(rng);
        double cumulative = 0.0;
        int label = K - 1;
        for (int k = 0; k < K; ++k) {
            cumulative += post[k];
            if (draw < cumulative) {
                label = k;
                break;
            }
        }
        ds.inputs.col(static_cast<Eigen::Index>(i)) = x;
        ds.labels.push_back(label);
    }
    return ds;
}

}  // namespace neuronal::data
