#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "camadapt/adapter.hpp"
#include "camadapt/records.hpp"

namespace camadapt {

struct TrainConfig {
    double lr = 0.0035;
    double momentum = 0.9;
    double weight_decay = 1e-5;
    std::size_t epochs = 10;
    std::size_t batch_size = 16;
    double tau = 0.01;
    std::uint64_t seed = 0;
    bool decay_scale = false;  // apply weight decay to s as well

    void validate() const;
};

struct MomentumState {
    Mat v_down;
    Mat v_mid;
    Mat v_up;
    double v_s = 0.0;

    static MomentumState zeros_like(const AdapterParams& p);
};

/// cos(img, feature_c) / tau for every feature, each feature normalized to
/// unit length first. This is the frozen-baseline scoring rule; the adapted
/// classifier runs it on the adapter outputs.
Vec cosine_logits(std::span<const Vec> features, std::span<const double> img, double tau);

/// Adapter outputs y_c for every class prompt.
std::vector<Vec> adapted_features(const AdapterParams& p, const PromptTable& prompts);

/// cosine_logits over the adapted prompt features.
Vec class_logits(const AdapterParams& p, std::span<const double> img, const PromptTable& prompts, double tau);

struct CrossEntropy {
    double loss = 0.0;
    Vec dlogits;  // softmax(logits) - onehot(true_idx)
};

CrossEntropy cross_entropy(std::span<const double> logits, std::size_t true_idx);

void sgd_step(AdapterParams& p, const AdapterGrads& g, MomentumState& m, const TrainConfig& cfg);

struct LabeledEmbedding {
    std::span<const double> embedding;
    std::size_t label = 0;
};

struct BatchResult {
    double mean_loss = 0.0;
    std::size_t correct = 0;
    AdapterGrads grads;  // averaged over the batch
};

/// Mean cross-entropy of cosine_logits over `batch` and its exact gradient
/// with respect to every adapter parameter. Prompt features are pushed
/// through the adapter once and the per-class upstream gradients are summed
/// before a single backward pass per class.
BatchResult batch_loss_and_grad(const AdapterParams& p, const PromptTable& prompts,
                                std::span<const LabeledEmbedding> batch, double tau);

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double mean_loss = 0.0;
    double train_accuracy = 0.0;
};

struct TrainResult {
    AdapterParams params;
    std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Seeded shuffle, mini-batches (final partial batch kept), one sgd_step per
/// batch. Throws DataError naming the record when a class label is missing
/// from `prompts`.
TrainResult train(const AdapterParams& p0, const PromptTable& prompts, std::span<const EmbeddingRecord> data,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace camadapt
