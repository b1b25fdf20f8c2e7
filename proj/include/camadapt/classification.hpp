#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camadapt/adapter.hpp"
#include "camadapt/records.hpp"

namespace camadapt {

struct Prediction {
    Vec probs;
    std::size_t pred_idx = 0;
};

/// Adapter-conditioned open-vocabulary classification of one embedding.
/// probs = softmax(class_logits); argmax ties go to the lowest index.
Prediction classify(const AdapterParams& p, const PromptTable& prompts, std::span<const double> img, double tau);

/// The same scoring with the raw prompt features (no adapter at all).
Prediction classify_frozen(const PromptTable& prompts, std::span<const double> img, double tau);

/// How the per-view confidence weight is computed.
enum class TtaWeighting {
    tempered,  // w_i = max softmax(z_i / tau), same temperature as the vote
    raw,       // w_i = max softmax(z_i)
};

/// Confidence-weighted vote over views:
///   P = Σ w_i softmax(z_i/tau) / Σ w_i
/// Views are summed in the order given.
Vec tta_aggregate(std::span<const Vec> view_logits, double tau, TtaWeighting weighting = TtaWeighting::tempered);

/// Groups records by (id, condition) with views ordered by index. Every
/// group must contain view 0, view indices must be unique, and all views
/// must share the class label. Output is sorted by (id, condition).
std::vector<ViewSet> make_view_sets(std::span<const EmbeddingRecord> records);

struct RecordPrediction {
    std::string id;
    Condition condition = Condition::gt_mask;
    std::string pred_class;
    double prob_top1 = 0.0;
    std::string true_class;
    bool correct = false;
};

struct ClassAccuracy {
    std::size_t total = 0;
    std::size_t correct = 0;
    double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

struct AccuracyReport {
    std::size_t total = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
    std::map<std::string, ClassAccuracy> per_class;
    /// confusion[true][pred], indexed like the prompt table.
    std::vector<std::vector<std::size_t>> confusion;
    std::vector<RecordPrediction> predictions;  // in (id, condition) order
};

struct EvalOptions {
    std::optional<Condition> condition;  // nullopt = all conditions
    bool tta = false;
    double tau = 0.01;
    TtaWeighting weighting = TtaWeighting::tempered;
};

/// Top-1 accuracy over view sets. Without TTA only view 0 is scored; with
/// TTA all views are combined by tta_aggregate over cosine similarities.
/// Throws DataError when the condition filter leaves nothing to score or a
/// true class is missing from the prompt table.
AccuracyReport evaluate_accuracy(const AdapterParams& p, const PromptTable& prompts, std::span<const ViewSet> dataset,
                                 const EvalOptions& opts);

}  // namespace camadapt
