#pragma once

#include "neuronal/pair.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace neuronal::data {

/// Labeled points stored column-wise: inputs is d x N, one point per column.
struct Dataset {
    std::string name;
    Matrix inputs;
    std::vector<int> labels;
    int num_classes = 0;
    bool normalized = false;
    // Generator-known posterior P(y = k | x), K x N. Empty for loaded files.
    Matrix posterior;

    std::size_t size() const { return labels.size(); }
    int dim() const { return static_cast<int>(inputs.rows()); }
    auto x(std::size_t i) const { return inputs.col(static_cast<Eigen::Index>(i)); }
    bool has_posterior() const { return posterior.cols() == inputs.cols() && posterior.size() > 0; }
    /// argmax posterior; falls back to the observed label.
    int bayes_label(std::size_t i) const;
    /// Expected 0-1 loss gap h[k] - h[k*] of predicting k at point i.
    double population_regret(std::size_t i, int predicted) const;

    Dataset subset(std::span<const std::size_t> rows) const;
    /// Seeded permutation of the rows.
    Dataset shuffled(std::uint64_t seed) const;
    void validate() const;
};

struct Split {
    Dataset train;
    Dataset test;
};

/// First `train_size` rows train, the remainder test.
Split split(const Dataset& dataset, std::size_t train_size);

enum class FileFormat { Csv, Tsv, Whitespace };

FileFormat parse_format(const std::string& name);

/// Delimited numeric features with the label in the last column; optional header row.
/// Rows are L2-normalized, labels remapped to 0..K-1 in sorted order.
Dataset load_normalize(const std::filesystem::path& path, FileFormat format = FileFormat::Csv);

/// Same as load_normalize for in-memory text.
Dataset parse_normalize(const std::string& text, FileFormat format, const std::string& name = "");

/// Scale every column of a d x N matrix to unit norm; throws on a zero column.
void normalize_columns(Matrix& inputs);

enum class LossKind { ZeroOne, Custom };

/// ell(k, label) for custom loss vectors; must map into [0,1].
using LossFunction = std::function<double(int k, int label)>;

LossVector make_loss_vector(int label, int num_classes, LossKind kind = LossKind::ZeroOne,
                            const LossFunction& custom = {});

enum class NoiseMode { HardMargin, Tsybakov };

/// Synthetic K-class data on the unit sphere.
///
/// K orthonormal anchors a_k are drawn at random (needs K <= d). Each point picks a
/// cluster c uniformly and sets x = normalize(a_c + spread * z / sqrt(d)), z ~ N(0, I).
/// The Bayes class is argmax_k <a_k, x>; with delta(x) the gap between the two largest
/// anchor cosines and r = min(1, delta / ramp):
///   hard margin: gap(x) = margin + (1 - margin) * r
///   Tsybakov:    gap(x) = r^(1/alpha), and for alpha = 0 gap is 0 below the ramp, 1 above.
/// The posterior puts (1 + (K-1) gap) / K on the Bayes class and (1 - gap) / K on every
/// other class, so h[k] - h[k*] = gap for every k != k* under the 0-1 loss.
struct SynthSpec {
    int dim = 10;
    int num_classes = 3;
    std::size_t n = 1000;
    double margin = 0.2;
    NoiseMode mode = NoiseMode::HardMargin;
    double alpha = 1.0;
    double spread = 1.0;
    double ramp = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

Dataset synth(const SynthSpec& spec);

}  // namespace neuronal::data
