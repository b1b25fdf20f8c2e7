#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "camadapt/adapter.hpp"
#include "camadapt/records.hpp"

namespace camadapt {

/// Desk-scale separable task with a known optimum.
///
/// Class directions e_c are random orthonormal vectors. Prompt features are
/// z_c = e_c + mixing · e_{(c+1) mod C}, so the frozen prompts confuse every
/// class with its predecessor while a bottleneck adapter can map z_c back to
/// e_c exactly. Images are normalize(e_t + noise · g) with g ~ N(0, I).
struct SynthConfig {
    std::size_t classes = 5;
    std::size_t train_per_class = 40;
    std::size_t test_per_class = 20;
    std::size_t dim = 32;
    /// Per-coordinate noise std; calibrated against target_ideal_accuracy
    /// when absent.
    std::optional<double> noise;
    double target_ideal_accuracy = 0.9999;
    double mixing = 0.9;
    /// Views per test record (view 0 plus jittered copies).
    std::size_t test_views = 4;
    double view_jitter = 0.05;
    std::uint64_t seed = 0;

    /// Throws ConfigError on dim < classes, classes < 2, mixing outside
    /// [0, 1] (or >= 1 for two classes), or a target outside (1/C, 1).
    void validate() const;
};

/// Noise multipliers of the three test conditions relative to the train noise.
inline constexpr double kAllBlackNoiseScale = 1.5;
inline constexpr double kPredMaskNoiseScale = 1.2;

struct SynthInfo {
    std::size_t classes = 0;
    std::size_t dim = 0;
    double noise = 0.0;
    double mixing = 0.0;
    std::uint64_t seed = 0;
    /// Accuracy of the nearest-direction rule at this noise, in closed form.
    double closed_form_ideal_accuracy = 0.0;
    /// Measured on the gt_mask canonical test views.
    double baseline_test_accuracy = 0.0;
    double ideal_test_accuracy = 0.0;
};

struct SynthDataset {
    PromptTable prompts;
    std::vector<EmbeddingRecord> train;
    std::vector<EmbeddingRecord> test;
    std::vector<Vec> directions;  // e_c
    SynthInfo info;
};

/// P(correct) of argmax_c <x, e_c> for x = e_t + noise · g:
///   ∫ φ(u) Φ(u + 1/noise)^(C-1) du.
double closed_form_ideal_accuracy(std::size_t classes, double noise);

/// Noise at which closed_form_ideal_accuracy equals `target` (bisection).
double calibrate_noise(std::size_t classes, double target);

/// Deterministic in cfg: the same config yields identical records.
SynthDataset synth_generate(const SynthConfig& cfg);

/// Adapter inside the hypothesis class that maps every prompt z_c onto e_c.
/// Requires classes <= r <= dim.
AdapterParams synth_ideal_adapter(const SynthDataset& ds, std::size_t r);

/// Writes prompts.jsonl, train.jsonl, test.jsonl and synth.json into `dir`.
void write_synth(const SynthDataset& ds, const std::string& dir);

std::string format_synth_info(const SynthInfo& info);
SynthInfo parse_synth_info(const std::string& text);

}  // namespace camadapt
