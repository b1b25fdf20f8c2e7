#include "camadapt/training.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "camadapt/error.hpp"

namespace camadapt {

void TrainConfig::validate() const {
    if (!(lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
    if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
    if (!(tau > 0.0)) throw ConfigError("train.tau must be > 0");
}

MomentumState MomentumState::zeros_like(const AdapterParams& p) {
    return MomentumState{Mat(p.w_down.rows(), p.w_down.cols()), Mat(p.w_mid.rows(), p.w_mid.cols()),
                         Mat(p.w_up.rows(), p.w_up.cols()), 0.0};
}

Vec cosine_logits(std::span<const Vec> features, std::span<const double> img, double tau) {
    if (!(tau > 0.0)) throw DomainError("tau must be > 0");
    Vec logits(features.size());
    for (std::size_t c = 0; c < features.size(); ++c) {
        logits[c] = cosine_sim(img, normalized(features[c])) / tau;
    }
    return logits;
}

std::vector<Vec> adapted_features(const AdapterParams& p, const PromptTable& prompts) {
    if (prompts.empty()) throw ShapeError("prompt table is empty");
    if (prompts.dim() != p.d()) {
        throw ShapeError("prompt features have dim " + std::to_string(prompts.dim()) + " but adapter has d=" +
                         std::to_string(p.d()));
    }
    std::vector<Vec> out;
    out.reserve(prompts.size());
    for (const auto& e : prompts.entries()) out.push_back(forward(p, e.feature).y);
    return out;
}

Vec class_logits(const AdapterParams& p, std::span<const double> img, const PromptTable& prompts, double tau) {
    return cosine_logits(adapted_features(p, prompts), img, tau);
}

CrossEntropy cross_entropy(std::span<const double> logits, std::size_t true_idx) {
    if (true_idx >= logits.size()) {
        throw DomainError("cross_entropy: class index " + std::to_string(true_idx) + " out of range for " +
                          std::to_string(logits.size()) + " logits");
    }
    const std::size_t top = argmax(logits);
    const double mx = logits[top];
    // Sum of exp(l_i - max) excluding the max term, so log1p keeps precision
    // when the loss is tiny.
    double rest = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (i != top) rest += std::exp(logits[i] - mx);
    }
    CrossEntropy ce;
    ce.loss = (mx - logits[true_idx]) + std::log1p(rest);
    ce.dlogits = softmax_temp(logits, 1.0);
    ce.dlogits[true_idx] -= 1.0;
    return ce;
}

void sgd_step(AdapterParams& p, const AdapterGrads& g, MomentumState& m, const TrainConfig& cfg) {
    if (!g.g_down.same_shape(p.w_down) || !g.g_mid.same_shape(p.w_mid) || !g.g_up.same_shape(p.w_up) ||
        !m.v_down.same_shape(p.w_down) || !m.v_mid.same_shape(p.w_mid) || !m.v_up.same_shape(p.w_up)) {
        throw ShapeError("sgd_step: gradient or momentum shapes do not match the adapter");
    }
    auto update = [&](Mat& w, const Mat& grad, Mat& vel) {
        auto wv = w.values();
        auto gv = grad.values();
        auto vv = vel.values();
        for (std::size_t i = 0; i < wv.size(); ++i) {
            vv[i] = cfg.momentum * vv[i] - cfg.lr * (gv[i] + cfg.weight_decay * wv[i]);
            wv[i] += vv[i];
        }
    };
    update(p.w_down, g.g_down, m.v_down);
    update(p.w_mid, g.g_mid, m.v_mid);
    update(p.w_up, g.g_up, m.v_up);
    const double wd_s = cfg.decay_scale ? cfg.weight_decay : 0.0;
    m.v_s = cfg.momentum * m.v_s - cfg.lr * (g.g_s + wd_s * p.s);
    p.s += m.v_s;
}

BatchResult batch_loss_and_grad(const AdapterParams& p, const PromptTable& prompts,
                                std::span<const LabeledEmbedding> batch, double tau) {
    if (batch.empty()) throw DomainError("empty batch");
    if (prompts.empty()) throw ShapeError("prompt table is empty");
    if (prompts.dim() != p.d()) {
        throw ShapeError("prompt features have dim " + std::to_string(prompts.dim()) + " but adapter has d=" +
                         std::to_string(p.d()));
    }
    const std::size_t n_classes = prompts.size();
    const std::size_t d = p.d();

    std::vector<ForwardTrace> traces;
    std::vector<Vec> unit;
    std::vector<double> norms;
    traces.reserve(n_classes);
    for (const auto& e : prompts.entries()) {
        traces.push_back(forward(p, e.feature));
        norms.push_back(norm2(traces.back().y));
        unit.push_back(normalized(traces.back().y));
    }

    std::vector<Vec> dy(n_classes, Vec(d, 0.0));
    BatchResult out{0.0, 0, AdapterGrads::zeros_like(p)};
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    for (const auto& sample : batch) {
        if (sample.embedding.size() != d) {
            throw ShapeError("embedding has length " + std::to_string(sample.embedding.size()) + ", expected " +
                             std::to_string(d));
        }
        const double img_norm = norm2(sample.embedding);
        if (!(img_norm > 0.0)) throw DomainError("zero image embedding");
        Vec cos(n_classes);
        Vec logits(n_classes);
        for (std::size_t c = 0; c < n_classes; ++c) {
            cos[c] = cosine_sim(sample.embedding, unit[c]);
            logits[c] = cos[c] / tau;
        }
        const CrossEntropy ce = cross_entropy(logits, sample.label);
        out.mean_loss += ce.loss * inv_batch;
        if (argmax(logits) == sample.label) ++out.correct;

        // d cos(x, y)/dy = x/(|x||y|) - cos·y/|y|²
        for (std::size_t c = 0; c < n_classes; ++c) {
            const double g = ce.dlogits[c] * inv_batch / tau;
            if (g == 0.0) continue;
            const double a = g / (img_norm * norms[c]);
            const double b = g * cos[c] / norms[c];
            Vec& dyc = dy[c];
            for (std::size_t i = 0; i < d; ++i) dyc[i] += a * sample.embedding[i] - b * unit[c][i];
        }
    }
    for (std::size_t c = 0; c < n_classes; ++c) accumulate_backward(p, traces[c], dy[c], out.grads);
    return out;
}

TrainResult train(const AdapterParams& p0, const PromptTable& prompts, std::span<const EmbeddingRecord> data,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    p0.validate();
    if (prompts.empty()) throw DataError("prompt table is empty");
    if (prompts.dim() != p0.d()) {
        throw ShapeError("prompt features have dim " + std::to_string(prompts.dim()) + " but adapter has d=" +
                         std::to_string(p0.d()));
    }
    std::vector<LabeledEmbedding> samples;
    samples.reserve(data.size());
    for (const auto& rec : data) {
        const auto idx = prompts.index_of(rec.class_name);
        if (!idx) throw DataError("record '" + rec.id + "': unknown class '" + rec.class_name + "'");
        if (rec.embedding.size() != p0.d()) {
            throw ShapeError("record '" + rec.id + "': embedding length " + std::to_string(rec.embedding.size()) +
                             ", expected " + std::to_string(p0.d()));
        }
        samples.push_back({rec.embedding, *idx});
    }

    TrainResult result{p0, {}};
    if (cfg.epochs == 0 || samples.empty()) return result;

    MomentumState momentum = MomentumState::zeros_like(p0);
    Rng rng = Rng::stream(cfg.seed, "shuffle");
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<LabeledEmbedding> batch;
    batch.reserve(cfg.batch_size);

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            std::swap(order[i], order[rng.next_index(i + 1)]);
        }
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            for (std::size_t k = start; k < end; ++k) batch.push_back(samples[order[k]]);
            const BatchResult br = batch_loss_and_grad(result.params, prompts, batch, cfg.tau);
            loss_sum += br.mean_loss * static_cast<double>(batch.size());
            correct += br.correct;
            sgd_step(result.params, br.grads, momentum, cfg);
        }
        EpochStats stats{epoch, loss_sum / static_cast<double>(samples.size()),
                         static_cast<double>(correct) / static_cast<double>(samples.size())};
        result.history.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }
    return result;
}

}  // namespace camadapt
