#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "camadapt/classification.hpp"
#include "camadapt/init.hpp"
#include "camadapt/metrics.hpp"
#include "camadapt/training.hpp"

namespace camadapt {

enum class InitMode { lai, standard };

/// Effective configuration of one run. Keys are flat and dotted:
///   seed (alias init.seed)
///   init.mode ("lai" | "standard"), init.rank (0 = automatic),
///   init.sigma_down, init.sigma_mid, init.sigma_up, init.s_lo, init.s_hi,
///   init.sigma (standard; 0 = geometric mean of the LAI sigmas), init.s0
///   train.lr, train.momentum, train.weight_decay, train.epochs,
///   train.batch_size, train.tau, train.decay_scale
///   tta.enabled, tta.weighting ("tempered" | "raw")
///   metrics.beta2, metrics.fbeta_threshold, metrics.em_threshold,
///   metrics.iou_threshold ("adaptive" or a number), metrics.gating
///   ("class_aware" | "none")
/// The seed drives both initialization and shuffling.
struct RunConfig {
    std::uint64_t seed = 0;

    InitMode init_mode = InitMode::lai;
    std::size_t rank = 0;
    InitConfig init;
    double standard_sigma = 0.0;
    double standard_s0 = 0.15;

    TrainConfig train;

    bool tta = false;
    TtaWeighting tta_weighting = TtaWeighting::tempered;

    MetricsConfig metrics;
    Gating gating = Gating::class_aware;

    /// Sets one key. Throws UsageError on unknown keys, ConfigError when the
    /// value has the wrong type or range.
    void set(std::string_view key, const nlohmann::json& value);

    /// "key=value"; the value is read as JSON when it parses, otherwise as a
    /// string.
    void set_from_assignment(std::string_view assignment);

    /// Accepts nested sections ({"train": {"lr": ...}}) or dotted keys.
    void merge_json(const nlohmann::json& doc);
    void merge_file(const std::string& path);

    /// Every effective value under its flat key, in a fixed order.
    nlohmann::ordered_json to_json() const;

    /// Cross-field checks (sigma ordering, positive rates, ...).
    void validate() const;

    /// Rank to use for feature dimension d: the configured rank, or 64 when
    /// d >= 128 and max(1, d/4) otherwise.
    std::size_t effective_rank(std::size_t d) const;

    /// Initial adapter according to init.mode.
    AdapterParams initial_params(std::size_t d) const;

    /// Settings written by `synth` next to the generated data.
    static RunConfig desk_scale();
};

std::string_view to_string(InitMode m);
std::string_view to_string(TtaWeighting w);
std::string_view to_string(Gating g);

}  // namespace camadapt
